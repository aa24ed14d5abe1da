#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kz {

// Linear quench of the transverse-field Ising chain (open boundaries):
//   H(t) = -J(t) * sum_i X_i X_{i+1}  -  h(t) * sum_i Z_i
//   J(t) = j0 * t / tau_q,   h(t) = (1 - t / tau_q) * h0,   t in [0, tau_q]
// The couplings cross at t = tau_q/2, which is where the critical point
// J = h sits for j0 == h0.
struct QuenchSchedule {
    double tau_q = 1.0;
    double j0 = 1.0;
    double h0 = 1.0;
};

struct Couplings {
    double j;
    double h;
};

Couplings couplings_at(const QuenchSchedule& s, double t);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// First three cumulants of the kink density n = k/N, with standard errors
// and (when a posterior pass has run) equal-tailed credible intervals.
struct CumulantSet {
    double kappa1 = 0.0, kappa2 = 0.0, kappa3 = 0.0;
    double stderr1 = 0.0, stderr2 = 0.0, stderr3 = 0.0;
    std::optional<Interval> ci1, ci2, ci3;
    // which variance estimator produced kappa2/kappa3 ("unbiased" h-statistics
    // from samples, or "plugin" when assembled from corrected moments)
    std::string estimator = "unbiased";
};

// One monomial of n^m expanded over the bond operators B_i = X_i X_{i+1}.
// B_i^2 = 1, so every monomial reduces to a product over a *set* of bonds;
// the empty set is the identity term.  Coefficients are exact integers over
// the common denominator (2N)^m.
struct BondTerm {
    std::vector<std::uint32_t> bonds;         // sorted bond indices, bond i = (i, i+1)
    std::int64_t coeff_num = 0;
    std::vector<std::uint32_t> support;       // qubits with odd X count (empty = identity)
};

struct MomentExpansion {
    int order = 0;
    int n_qubits = 0;
    double denom = 1.0;                       // (2N)^order
    std::vector<BondTerm> terms;
    double coefficient(const BondTerm& t) const { return static_cast<double>(t.coeff_num) / denom; }
};

// Exact expansion of n^m (m = 1..3) for an N-qubit chain.
MomentExpansion moment_expansion(int m, int n_qubits);

// kappa1..3 from raw moments of n.  kappa2 within [-tol, 0) is clamped to
// zero (mitigation can overshoot); below -tol the moment vector is rejected.
CumulantSet cumulants_from_moments(double mu1, double mu2, double mu3, double tol = 1e-12);

} // namespace kz
