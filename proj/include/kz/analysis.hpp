#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "kz/batch.hpp"
#include "kz/mitigation.hpp"
#include "kz/model.hpp"

namespace kz {

// ---- cumulant estimation ---------------------------------------------------

// First three cumulants of the kink density from an X-basis batch, using
// the unbiased k-statistics (k2 = n/(n-1) m2, k3 = n^2/((n-1)(n-2)) m3).
// Standard errors come from the delta method on the per-shot moment vector
// (n_s, n_s^2, n_s^3) and are cluster-robust over twirl instances.
CumulantSet estimate_cumulants(const BitstringBatch& batch);

// Same estimates from a counts histogram (category weights = counts).  The
// twirl grouping is gone at this point, so errors are shot-level.
CumulantSet estimate_cumulants_from_counts(const CountsMap& counts, int n_qubits);

// ---- posterior credible intervals ------------------------------------------

struct PosteriorConfig {
    // Extra Dirichlet prior weight added to every observed category's count.
    // 0 is the Bayesian bootstrap, whose intervals track the multinomial
    // sampling noise and cover at close to nominal rate; positive values pull
    // the posterior toward uniform-over-observed (a bias of order K/n), which
    // only helps when sparse tail categories destabilize kappa3.
    double pseudocount = 0.0;
    int n_replicas = 500;
    // 0: evaluate the estimator on the reweighted distribution itself.
    // >0: draw a synthetic sample of this size per replica (posterior
    // predictive), which also folds in the estimator's own sampling noise.
    std::uint64_t resample_size = 0;
    double ci_level = 0.95;
    std::uint64_t seed = 1;
};

// Equal-tailed credible intervals for the cumulants: put a Dirichlet
// posterior on the multinomial over observed bitstrings, reweight (or
// resample) per replica, and take percentiles of the replica cumulants.
// Point estimates and standard errors are those of estimate_cumulants; the
// ci fields are filled in.
CumulantSet bayesian_intervals(const BitstringBatch& batch, const PosteriorConfig& cfg);

// Mitigated variant: every replica recomputes the corrected cumulants under
// the reweighting, with the calibration and renormalization factors held
// fixed (their uncertainty is separate and typically much smaller; folding
// them in here would smear the multinomial posterior with calibration noise
// drawn from the wrong stage of the pipeline).
MitigationResult bayesian_intervals(const BitstringBatch& batch, const ConfusionMatrix& cal,
                                    const RenormFactor& renorm, const MitigationSettings& settings,
                                    const PosteriorConfig& cfg);

// ---- power-law fits ----------------------------------------------------------

struct SweepPoint {
    double tau_q = 0.0;
    int n_qubits = 0;
    CumulantSet cumulants;
};

struct FitResult {
    double exponent = 0.0;  // OLS slope of log kappa vs log tau (KZ decay < 0)
    double exponent_se = 0.0;
    double amplitude = 0.0; // kappa ~ amplitude * tau^exponent
    double amplitude_se = 0.0;
    double r2 = 0.0;
    double residual_rms = 0.0; // RMS of the log-space fit residuals
    double tau_f = 0.0;      // freeze-out: kappa1 crosses 1/N (log-log interp)
    Interval window;         // tau range actually fitted
    int n_points = 0;        // points inside the window with kappa > 0
};

// Log-log OLS fit of cumulant `which` (1..3) against tau_q over the window
// [window_lo, tau_f].  tau_f is where kappa1 interpolates through 1/N --
// beyond it the kink density saturates at the finite-size floor and the
// power law no longer applies.  Points with non-positive kappa are dropped
// (a clamped kappa2 carries no slope information).  window_hi, when given,
// overrides the tau_f cut.
FitResult fit_decay(const std::vector<SweepPoint>& points, int which, double window_lo = 1.0,
                    std::optional<double> window_hi = std::nullopt);

// ---- maximum-entropy reconstruction ----------------------------------------

struct MaxEntSolution {
    std::vector<double> pmf;          // over kink counts k = 0 .. N-1
    std::array<double, 3> lambda{};   // p_k propto exp(sum_m lambda_m (k/N)^m)
    int iterations = 0;
    std::array<double, 3> residuals{}; // |E[(k/N)^m] - mu_m| per moment
    double max_residual = 0.0;         // worst of the three
    double entropy = 0.0;
};

// Maximum-entropy kink-count distribution matching the first three moments
// of n = k/N: minimizes the convex dual by damped Newton with line search,
// log-sum-exp stabilized.  Throws NumericalError when the moments are
// infeasible for the support or the residual target cannot be met.
MaxEntSolution maxent_pmf(int n_qubits, const std::array<double, 3>& moments,
                          double residual_tol = 1e-9, int max_iter = 200);

} // namespace kz
