#pragma once

#include <array>
#include <complex>
#include <vector>

#include "kz/model.hpp"

namespace kz::ode {

// Dense RK4 integration of i d|psi>/dt = H(t)|psi> from |00...0>, H(t) the
// quench Hamiltonian.  Deliberately independent of the gate kernels (its own
// matvec, its own basis rotation) so it can serve as the reference that
// Trotterized circuits are compared against.  steps = 0 picks
// ceil(2000 * max(t_final, 1)) which keeps the integrator error orders of
// magnitude below any Trotter error of interest.
std::vector<std::complex<double>> evolve(const QuenchSchedule& s, int n_qubits, double t_final,
                                         int steps = 0);

// Kink-count distribution of an X-basis readout of `state` (a raw evolved
// state, no measurement rotation applied yet).
std::vector<double> xbasis_kink_pmf(std::vector<std::complex<double>> state, int n_qubits);

} // namespace kz::ode

namespace kz {

// mu_m = sum_k pmf[k] * (k/N)^m, m = 1..3.
std::array<double, 3> moments_from_kink_pmf(const std::vector<double>& pmf, int n_qubits);

} // namespace kz
