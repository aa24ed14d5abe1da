#include "kz/model.hpp"

#include <algorithm>
#include <cmath>

#include "kz/errors.hpp"

namespace kz {

Couplings couplings_at(const QuenchSchedule& s, double t) {
    if (s.tau_q <= 0.0) throw ConfigError("tau_q must be positive");
    double x = t / s.tau_q;
    return {s.j0 * x, (1.0 - x) * s.h0};
}

namespace {

// Support of a product of bond operators: qubit q appears once per incident
// bond, so it survives (odd X count) iff exactly one of bonds q-1, q is in
// the set.  XOR of the two-qubit masks does exactly that.
std::vector<std::uint32_t> support_of(const std::vector<std::uint32_t>& bonds, int n_qubits) {
    std::vector<std::uint8_t> odd(static_cast<std::size_t>(n_qubits), 0);
    for (auto b : bonds) {
        odd[b] ^= 1;
        odd[b + 1] ^= 1;
    }
    std::vector<std::uint32_t> sup;
    for (int q = 0; q < n_qubits; ++q)
        if (odd[q]) sup.push_back(static_cast<std::uint32_t>(q));
    return sup;
}

void push_term(MomentExpansion& e, std::vector<std::uint32_t> bonds, std::int64_t num) {
    BondTerm t;
    t.support = support_of(bonds, e.n_qubits);
    t.bonds = std::move(bonds);
    t.coeff_num = num;
    e.terms.push_back(std::move(t));
}

} // namespace

// n = (1/2N) * (K - sum_i B_i) with K = N-1 bonds.  Powers expand in closed
// form because the B_i commute and square to the identity:
//   n^2: K^2+K on the identity, -2K per single bond, +2 per pair
//   n^3: K^3+3K^2 identity, -(3K^2+3K-2) per bond, +6K per pair, -6 per triple
MomentExpansion moment_expansion(int m, int n_qubits) {
    if (m < 1 || m > 3) throw ConfigError("moment order must be 1, 2, or 3");
    if (n_qubits < 2) throw ConfigError("need at least 2 qubits for a bond");
    const std::int64_t k = n_qubits - 1;

    MomentExpansion e;
    e.order = m;
    e.n_qubits = n_qubits;
    e.denom = std::pow(2.0 * n_qubits, m);

    if (m == 1) {
        push_term(e, {}, k);
        for (std::uint32_t i = 0; i < k; ++i) push_term(e, {i}, -1);
    } else if (m == 2) {
        push_term(e, {}, k * k + k);
        for (std::uint32_t i = 0; i < k; ++i) push_term(e, {i}, -2 * k);
        for (std::uint32_t i = 0; i < k; ++i)
            for (std::uint32_t j = i + 1; j < k; ++j) push_term(e, {i, j}, 2);
    } else {
        push_term(e, {}, k * k * k + 3 * k * k);
        for (std::uint32_t i = 0; i < k; ++i) push_term(e, {i}, -(3 * k * k + 3 * k - 2));
        for (std::uint32_t i = 0; i < k; ++i)
            for (std::uint32_t j = i + 1; j < k; ++j) push_term(e, {i, j}, 6 * k);
        for (std::uint32_t i = 0; i < k; ++i)
            for (std::uint32_t j = i + 1; j < k; ++j)
                for (std::uint32_t l = j + 1; l < k; ++l) push_term(e, {i, j, l}, -6);
    }
    return e;
}

CumulantSet cumulants_from_moments(double mu1, double mu2, double mu3, double tol) {
    CumulantSet c;
    c.kappa1 = mu1;
    c.kappa2 = mu2 - mu1 * mu1;
    c.kappa3 = mu3 - 3.0 * mu1 * mu2 + 2.0 * mu1 * mu1 * mu1;
    c.estimator = "plugin";
    if (c.kappa2 < 0.0) {
        if (c.kappa2 < -tol)
            throw NumericalError("inconsistent moments: kappa2 = " + std::to_string(c.kappa2) +
                                 " below -tol = " + std::to_string(-tol));
        c.kappa2 = 0.0;
    }
    return c;
}

} // namespace kz
