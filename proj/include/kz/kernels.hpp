#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>

namespace kz::kernels {

// Statevector gate kernels over split re/im arrays (structure-of-arrays; the
// hot loops are pure FMA streams that way).  `n` is the full array length
// 2^n_qubits, `q` a qubit index, (c, s) = (cos theta, sin theta).
//
// Two implementations ship: a scalar reference and an AVX2+FMA variant.
// Both satisfy the same contract; the AVX2 path is selected at runtime when
// the CPU supports it and is held to agree with the scalar path to ~1e-14
// by the equivalence tests.
struct Table {
    const char* name;
    // amp *= (c + i s) where bit q == 0, amp *= (c - i s) where bit q == 1
    void (*phase_rot)(double* re, double* im, std::size_t n, int q, double c, double s);
    // exp(i theta X_q X_{q+1}): pairs (idx, idx ^ m), m = 3 << q
    void (*xx_rot)(double* re, double* im, std::size_t n, int q, double c, double s);
    void (*hadamard)(double* re, double* im, std::size_t n, int q);
    void (*pauli_x)(double* re, double* im, std::size_t n, int q);
    void (*pauli_y)(double* re, double* im, std::size_t n, int q);
    void (*pauli_z)(double* re, double* im, std::size_t n, int q);
    // sum_i conj(a_i) * a_{i XOR mask}
    std::complex<double> (*xor_dot)(const double* re, const double* im, std::size_t n,
                                    std::uint64_t mask);
};

const Table& scalar();
const Table& avx2();      // table always exists; only call through it when
                          // avx2_supported() (dispatch enforces this)
bool avx2_supported();

// Active table: avx2 when supported, else scalar.  Overridable via
// set_active("scalar"|"avx2"|"auto") or the KZ_KERNELS environment variable
// (read once, first use).
const Table& active();
void set_active(const std::string& name);

} // namespace kz::kernels
