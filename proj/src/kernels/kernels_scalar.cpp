#include "kz/kernels.hpp"

// Reference kernels.  Straight-line scalar code, bit-level layout:
// amplitude index i has qubit q in bit q.

namespace kz::kernels {
namespace {

void phase_rot(double* re, double* im, std::size_t n, int q, double c, double s) {
    const std::size_t bit = std::size_t{1} << q;
    for (std::size_t base = 0; base < n; base += 2 * bit) {
        for (std::size_t j = base; j < base + bit; ++j) {
            double r0 = re[j], i0 = im[j];
            re[j] = c * r0 - s * i0;
            im[j] = c * i0 + s * r0;
        }
        for (std::size_t j = base + bit; j < base + 2 * bit; ++j) {
            double r1 = re[j], i1 = im[j];
            re[j] = c * r1 + s * i1;
            im[j] = c * i1 - s * r1;
        }
    }
}

// Representatives have bit q == 0; the partner differs in bits q and q+1,
// so both blocks [base, base+bit) and [base+2bit, base+3bit) are
// representatives with contiguous partners.
void xx_rot(double* re, double* im, std::size_t n, int q, double c, double s) {
    const std::size_t bit = std::size_t{1} << q;
    const std::size_t m = 3 * bit;
    for (std::size_t base = 0; base < n; base += 4 * bit) {
        for (std::size_t off : {std::size_t{0}, 2 * bit}) {
            for (std::size_t j = base + off; j < base + off + bit; ++j) {
                std::size_t p = j ^ m;
                double ar = re[j], ai = im[j], br = re[p], bi = im[p];
                re[j] = c * ar - s * bi;
                im[j] = c * ai + s * br;
                re[p] = c * br - s * ai;
                im[p] = c * bi + s * ar;
            }
        }
    }
}

void hadamard(double* re, double* im, std::size_t n, int q) {
    const std::size_t bit = std::size_t{1} << q;
    const double k = 0.70710678118654752440;
    for (std::size_t base = 0; base < n; base += 2 * bit) {
        for (std::size_t j = base; j < base + bit; ++j) {
            std::size_t p = j | bit;
            double ar = re[j], ai = im[j], br = re[p], bi = im[p];
            re[j] = k * (ar + br);
            im[j] = k * (ai + bi);
            re[p] = k * (ar - br);
            im[p] = k * (ai - bi);
        }
    }
}

void pauli_x(double* re, double* im, std::size_t n, int q) {
    const std::size_t bit = std::size_t{1} << q;
    for (std::size_t base = 0; base < n; base += 2 * bit) {
        for (std::size_t j = base; j < base + bit; ++j) {
            std::size_t p = j | bit;
            std::swap(re[j], re[p]);
            std::swap(im[j], im[p]);
        }
    }
}

// Y = [[0, -i], [i, 0]]: a' = -i b, b' = i a.
void pauli_y(double* re, double* im, std::size_t n, int q) {
    const std::size_t bit = std::size_t{1} << q;
    for (std::size_t base = 0; base < n; base += 2 * bit) {
        for (std::size_t j = base; j < base + bit; ++j) {
            std::size_t p = j | bit;
            double ar = re[j], ai = im[j], br = re[p], bi = im[p];
            re[j] = bi;
            im[j] = -br;
            re[p] = -ai;
            im[p] = ar;
        }
    }
}

void pauli_z(double* re, double* im, std::size_t n, int q) {
    const std::size_t bit = std::size_t{1} << q;
    for (std::size_t base = bit; base < n; base += 2 * bit) {
        for (std::size_t j = base; j < base + bit; ++j) {
            re[j] = -re[j];
            im[j] = -im[j];
        }
    }
}

std::complex<double> xor_dot(const double* re, const double* im, std::size_t n,
                             std::uint64_t mask) {
    double rr = 0.0, ri = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = i ^ mask;
        rr += re[i] * re[j] + im[i] * im[j];
        ri += re[i] * im[j] - im[i] * re[j];
    }
    return {rr, ri};
}

} // namespace

const Table& scalar() {
    static const Table t{"scalar",  phase_rot, xx_rot, hadamard,
                         pauli_x,   pauli_y,   pauli_z, xor_dot};
    return t;
}

} // namespace kz::kernels
