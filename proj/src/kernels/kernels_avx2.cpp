#include <immintrin.h>

#include "kz/kernels.hpp"

// AVX2+FMA kernels.  Compiled with per-function target attributes so this TU
// needs no global -mavx2 (nothing here runs unless dispatch picked it).
//
// Arrays shorter than 8 fall back to the scalar kernels (vector loads
// would run off the end); beyond that, for q >= 2 every amplitude
// pair/block sits in contiguous runs of >= 4
// doubles and the loops are plain vector streams.  For q in {0,1} the
// partners live inside one 4-lane vector (or its 128-bit lane swap), handled
// with permutes for the hot kernels (phase, xx, hadamard) and scalar
// fallbacks for the rarely-hit low-qubit Pauli gates.

#define KZ_AVX2 __attribute__((target("avx2,fma")))

namespace kz::kernels {
namespace {

KZ_AVX2 inline __m256d neg(__m256d v) {
    return _mm256_xor_pd(v, _mm256_set1_pd(-0.0));
}

KZ_AVX2 void phase_rot(double* re, double* im, std::size_t n, int q, double c, double s) {
    if (n < 8) return scalar().phase_rot(re, im, n, q, c, s);

    const __m256d vc = _mm256_set1_pd(c);
    if (q >= 2) {
        const std::size_t bit = std::size_t{1} << q;
        const __m256d vs = _mm256_set1_pd(s);
        const __m256d vns = _mm256_set1_pd(-s);
        for (std::size_t base = 0; base < n; base += 2 * bit) {
            for (std::size_t j = base; j < base + bit; j += 4) {
                __m256d r = _mm256_loadu_pd(re + j), i = _mm256_loadu_pd(im + j);
                _mm256_storeu_pd(re + j, _mm256_fnmadd_pd(vs, i, _mm256_mul_pd(vc, r)));
                _mm256_storeu_pd(im + j, _mm256_fmadd_pd(vs, r, _mm256_mul_pd(vc, i)));
            }
            for (std::size_t j = base + bit; j < base + 2 * bit; j += 4) {
                __m256d r = _mm256_loadu_pd(re + j), i = _mm256_loadu_pd(im + j);
                _mm256_storeu_pd(re + j, _mm256_fnmadd_pd(vns, i, _mm256_mul_pd(vc, r)));
                _mm256_storeu_pd(im + j, _mm256_fmadd_pd(vns, r, _mm256_mul_pd(vc, i)));
            }
        }
    } else {
        // sign of s alternates with bit q across the 4 lanes
        const __m256d vs = q == 0 ? _mm256_setr_pd(s, -s, s, -s) : _mm256_setr_pd(s, s, -s, -s);
        for (std::size_t j = 0; j < n; j += 4) {
            __m256d r = _mm256_loadu_pd(re + j), i = _mm256_loadu_pd(im + j);
            _mm256_storeu_pd(re + j, _mm256_fnmadd_pd(vs, i, _mm256_mul_pd(vc, r)));
            _mm256_storeu_pd(im + j, _mm256_fmadd_pd(vs, r, _mm256_mul_pd(vc, i)));
        }
    }
}

KZ_AVX2 inline void xx_pair(double* re, double* im, std::size_t a, std::size_t b, __m256d vc,
                            __m256d vs) {
    __m256d ra = _mm256_loadu_pd(re + a), ia = _mm256_loadu_pd(im + a);
    __m256d rb = _mm256_loadu_pd(re + b), ib = _mm256_loadu_pd(im + b);
    _mm256_storeu_pd(re + a, _mm256_fnmadd_pd(vs, ib, _mm256_mul_pd(vc, ra)));
    _mm256_storeu_pd(im + a, _mm256_fmadd_pd(vs, rb, _mm256_mul_pd(vc, ia)));
    _mm256_storeu_pd(re + b, _mm256_fnmadd_pd(vs, ia, _mm256_mul_pd(vc, rb)));
    _mm256_storeu_pd(im + b, _mm256_fmadd_pd(vs, ra, _mm256_mul_pd(vc, ib)));
}

KZ_AVX2 void xx_rot(double* re, double* im, std::size_t n, int q, double c, double s) {
    if (n < 8) return scalar().xx_rot(re, im, n, q, c, s);

    const __m256d vc = _mm256_set1_pd(c);
    const __m256d vs = _mm256_set1_pd(s);
    if (q >= 2) {
        const std::size_t bit = std::size_t{1} << q;
        for (std::size_t base = 0; base < n; base += 4 * bit) {
            for (std::size_t j = base; j < base + bit; j += 4) xx_pair(re, im, j, j + 3 * bit, vc, vs);
            for (std::size_t j = base + 2 * bit; j < base + 3 * bit; j += 4)
                xx_pair(re, im, j, j - bit, vc, vs);
        }
    } else if (q == 0) {
        // partner i^3 is the reversal of each aligned 4-run
        for (std::size_t j = 0; j < n; j += 4) {
            __m256d r = _mm256_loadu_pd(re + j), i = _mm256_loadu_pd(im + j);
            __m256d pr = _mm256_permute4x64_pd(r, 0x1b), pi = _mm256_permute4x64_pd(i, 0x1b);
            _mm256_storeu_pd(re + j, _mm256_fnmadd_pd(vs, pi, _mm256_mul_pd(vc, r)));
            _mm256_storeu_pd(im + j, _mm256_fmadd_pd(vs, pr, _mm256_mul_pd(vc, i)));
        }
    } else {
        // q == 1: partner i^6 is the 128-bit lane swap of the neighbor vector
        for (std::size_t j = 0; j < n; j += 8) {
            __m256d r0 = _mm256_loadu_pd(re + j), i0 = _mm256_loadu_pd(im + j);
            __m256d r1 = _mm256_loadu_pd(re + j + 4), i1 = _mm256_loadu_pd(im + j + 4);
            __m256d pr0 = _mm256_permute2f128_pd(r1, r1, 1), pi0 = _mm256_permute2f128_pd(i1, i1, 1);
            __m256d pr1 = _mm256_permute2f128_pd(r0, r0, 1), pi1 = _mm256_permute2f128_pd(i0, i0, 1);
            _mm256_storeu_pd(re + j, _mm256_fnmadd_pd(vs, pi0, _mm256_mul_pd(vc, r0)));
            _mm256_storeu_pd(im + j, _mm256_fmadd_pd(vs, pr0, _mm256_mul_pd(vc, i0)));
            _mm256_storeu_pd(re + j + 4, _mm256_fnmadd_pd(vs, pi1, _mm256_mul_pd(vc, r1)));
            _mm256_storeu_pd(im + j + 4, _mm256_fmadd_pd(vs, pr1, _mm256_mul_pd(vc, i1)));
        }
    }
}

KZ_AVX2 void hadamard(double* re, double* im, std::size_t n, int q) {
    if (n < 8) return scalar().hadamard(re, im, n, q);

    const __m256d vk = _mm256_set1_pd(0.70710678118654752440);
    if (q >= 2) {
        const std::size_t bit = std::size_t{1} << q;
        for (std::size_t base = 0; base < n; base += 2 * bit) {
            for (std::size_t j = base; j < base + bit; j += 4) {
                std::size_t p = j + bit;
                __m256d ra = _mm256_loadu_pd(re + j), ia = _mm256_loadu_pd(im + j);
                __m256d rb = _mm256_loadu_pd(re + p), ib = _mm256_loadu_pd(im + p);
                _mm256_storeu_pd(re + j, _mm256_mul_pd(vk, _mm256_add_pd(ra, rb)));
                _mm256_storeu_pd(im + j, _mm256_mul_pd(vk, _mm256_add_pd(ia, ib)));
                _mm256_storeu_pd(re + p, _mm256_mul_pd(vk, _mm256_sub_pd(ra, rb)));
                _mm256_storeu_pd(im + p, _mm256_mul_pd(vk, _mm256_sub_pd(ia, ib)));
            }
        }
    } else {
        const __m256d pat = q == 0 ? _mm256_setr_pd(1.0, -1.0, 1.0, -1.0)
                                   : _mm256_setr_pd(1.0, 1.0, -1.0, -1.0);
        for (std::size_t j = 0; j < n; j += 4) {
            __m256d r = _mm256_loadu_pd(re + j), i = _mm256_loadu_pd(im + j);
            __m256d sr = q == 0 ? _mm256_permute_pd(r, 0x5) : _mm256_permute2f128_pd(r, r, 1);
            __m256d si = q == 0 ? _mm256_permute_pd(i, 0x5) : _mm256_permute2f128_pd(i, i, 1);
            _mm256_storeu_pd(re + j, _mm256_mul_pd(vk, _mm256_fmadd_pd(pat, r, sr)));
            _mm256_storeu_pd(im + j, _mm256_mul_pd(vk, _mm256_fmadd_pd(pat, i, si)));
        }
    }
}

KZ_AVX2 void pauli_x(double* re, double* im, std::size_t n, int q) {
    if (n < 8) return scalar().pauli_x(re, im, n, q);

    const std::size_t bit = std::size_t{1} << q;
    if (q >= 2) {
        for (std::size_t base = 0; base < n; base += 2 * bit) {
            for (std::size_t j = base; j < base + bit; j += 4) {
                std::size_t p = j + bit;
                __m256d ra = _mm256_loadu_pd(re + j), ia = _mm256_loadu_pd(im + j);
                __m256d rb = _mm256_loadu_pd(re + p), ib = _mm256_loadu_pd(im + p);
                _mm256_storeu_pd(re + j, rb);
                _mm256_storeu_pd(im + j, ib);
                _mm256_storeu_pd(re + p, ra);
                _mm256_storeu_pd(im + p, ia);
            }
        }
    } else {
        for (std::size_t base = 0; base < n; base += 2 * bit)
            for (std::size_t j = base; j < base + bit; ++j) {
                std::size_t p = j | bit;
                std::swap(re[j], re[p]);
                std::swap(im[j], im[p]);
            }
    }
}

KZ_AVX2 void pauli_y(double* re, double* im, std::size_t n, int q) {
    if (n < 8) return scalar().pauli_y(re, im, n, q);

    const std::size_t bit = std::size_t{1} << q;
    if (q >= 2) {
        for (std::size_t base = 0; base < n; base += 2 * bit) {
            for (std::size_t j = base; j < base + bit; j += 4) {
                std::size_t p = j + bit;
                __m256d ra = _mm256_loadu_pd(re + j), ia = _mm256_loadu_pd(im + j);
                __m256d rb = _mm256_loadu_pd(re + p), ib = _mm256_loadu_pd(im + p);
                _mm256_storeu_pd(re + j, ib);
                _mm256_storeu_pd(im + j, neg(rb));
                _mm256_storeu_pd(re + p, neg(ia));
                _mm256_storeu_pd(im + p, ra);
            }
        }
    } else {
        for (std::size_t base = 0; base < n; base += 2 * bit)
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

KZ_AVX2 void pauli_z(double* re, double* im, std::size_t n, int q) {
    if (n < 8) return scalar().pauli_z(re, im, n, q);

    if (q >= 2) {
        const std::size_t bit = std::size_t{1} << q;
        for (std::size_t base = bit; base < n; base += 2 * bit) {
            for (std::size_t j = base; j < base + bit; j += 4) {
                _mm256_storeu_pd(re + j, neg(_mm256_loadu_pd(re + j)));
                _mm256_storeu_pd(im + j, neg(_mm256_loadu_pd(im + j)));
            }
        }
    } else {
        const __m256d pat = q == 0 ? _mm256_setr_pd(0.0, -0.0, 0.0, -0.0)
                                   : _mm256_setr_pd(0.0, 0.0, -0.0, -0.0);
        for (std::size_t j = 0; j < n; j += 4) {
            _mm256_storeu_pd(re + j, _mm256_xor_pd(pat, _mm256_loadu_pd(re + j)));
            _mm256_storeu_pd(im + j, _mm256_xor_pd(pat, _mm256_loadu_pd(im + j)));
        }
    }
}

KZ_AVX2 double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

KZ_AVX2 std::complex<double> xor_dot(const double* re, const double* im, std::size_t n,
                                     std::uint64_t mask) {
    if ((mask & 3) != 0 || n < 4) {
        double rr = 0.0, ri = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t j = i ^ mask;
            rr += re[i] * re[j] + im[i] * im[j];
            ri += re[i] * im[j] - im[i] * re[j];
        }
        return {rr, ri};
    }
    // mask leaves the low 2 bits alone, so i^mask maps aligned runs to runs
    __m256d arr = _mm256_setzero_pd(), ari = _mm256_setzero_pd();
    for (std::size_t i = 0; i < n; i += 4) {
        std::size_t j = i ^ mask;
        __m256d ri_ = _mm256_loadu_pd(re + i), ii = _mm256_loadu_pd(im + i);
        __m256d rj = _mm256_loadu_pd(re + j), ij = _mm256_loadu_pd(im + j);
        arr = _mm256_fmadd_pd(ri_, rj, arr);
        arr = _mm256_fmadd_pd(ii, ij, arr);
        ari = _mm256_fmadd_pd(ri_, ij, ari);
        ari = _mm256_fnmadd_pd(ii, rj, ari);
    }
    return {hsum(arr), hsum(ari)};
}

} // namespace

const Table& avx2() {
    static const Table t{"avx2",   phase_rot, xx_rot, hadamard,
                         pauli_x,  pauli_y,   pauli_z, xor_dot};
    return t;
}

} // namespace kz::kernels
