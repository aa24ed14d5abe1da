#include "kz/ode.hpp"

#include <bit>
#include <cmath>

#include "kz/errors.hpp"

namespace kz::ode {

namespace {

using State = std::vector<std::complex<double>>;

// out = -i H(t) psi;  (H psi)_i = -h (N - 2 popcount(i)) psi_i
//                                 - J sum_bonds psi_{i ^ (3 << bond)}
void deriv(const QuenchSchedule& s, int n, double t, const State& psi, State& out) {
    auto [j, h] = couplings_at(s, t);
    const std::size_t dim = psi.size();
    for (std::size_t i = 0; i < dim; ++i) {
        double zsum = n - 2 * std::popcount(i);
        std::complex<double> acc = -h * zsum * psi[i];
        for (int b = 0; b + 1 < n; ++b) acc -= j * psi[i ^ (std::size_t{3} << b)];
        out[i] = std::complex<double>(acc.imag(), -acc.real()); // * (-i)
    }
}

} // namespace

std::vector<std::complex<double>> evolve(const QuenchSchedule& s, int n_qubits, double t_final,
                                         int steps) {
    if (n_qubits < 2 || n_qubits > 22)
        throw ResourceError("ode oracle supports 2..22 qubits");
    if (steps <= 0) steps = static_cast<int>(std::ceil(2000.0 * std::max(t_final, 1.0)));

    const std::size_t dim = std::size_t{1} << n_qubits;
    State y(dim, 0.0), k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
    y[0] = 1.0;

    const double dt = t_final / steps;
    for (int step = 0; step < steps; ++step) {
        double t = step * dt;
        deriv(s, n_qubits, t, y, k1);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
        deriv(s, n_qubits, t + 0.5 * dt, tmp, k2);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
        deriv(s, n_qubits, t + 0.5 * dt, tmp, k3);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = y[i] + dt * k3[i];
        deriv(s, n_qubits, t + dt, tmp, k4);
        for (std::size_t i = 0; i < dim; ++i)
            y[i] += (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return y;
}

std::vector<double> xbasis_kink_pmf(std::vector<std::complex<double>> state, int n_qubits) {
    const std::size_t dim = state.size();
    const double k = 0.70710678118654752440;
    // own Hadamard sweep: keeps this oracle decoupled from the gate kernels
    for (int q = 0; q < n_qubits; ++q) {
        const std::size_t bit = std::size_t{1} << q;
        for (std::size_t base = 0; base < dim; base += 2 * bit)
            for (std::size_t i = base; i < base + bit; ++i) {
                auto a = state[i], b = state[i | bit];
                state[i] = k * (a + b);
                state[i | bit] = k * (a - b);
            }
    }
    std::vector<double> pmf(static_cast<std::size_t>(n_qubits), 0.0);
    const std::size_t bond_mask = (std::size_t{1} << (n_qubits - 1)) - 1;
    for (std::size_t i = 0; i < dim; ++i)
        pmf[static_cast<std::size_t>(std::popcount((i ^ (i >> 1)) & bond_mask))] +=
            std::norm(state[i]);
    return pmf;
}

} // namespace kz::ode

namespace kz {

std::array<double, 3> moments_from_kink_pmf(const std::vector<double>& pmf, int n_qubits) {
    std::array<double, 3> mu{0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < pmf.size(); ++k) {
        double x = static_cast<double>(k) / n_qubits;
        mu[0] += pmf[k] * x;
        mu[1] += pmf[k] * x * x;
        mu[2] += pmf[k] * x * x * x;
    }
    return mu;
}

} // namespace kz
