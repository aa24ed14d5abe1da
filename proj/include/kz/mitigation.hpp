#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "kz/batch.hpp"
#include "kz/circuit.hpp"
#include "kz/model.hpp"
#include "kz/noise.hpp"

namespace kz {

// ---- randomized compiling ------------------------------------------------

struct TwirlOptions {
    bool gate_twirl = true;        // Pauli-sandwich every coupling rotation
    bool measurement_twirl = true; // random X layer before readout, undone in software
    bool fuse = true;              // cancel adjacent identical Paulis
};

// Cancel identical adjacent single-qubit Paulis (P P = 1) when no other op
// touches that qubit in between.  Restricted to identical pairs on purpose:
// merging different Paulis introduces phases, and keeping the rewrite
// phase-free preserves the circuit unitary exactly, not just up to phase.
void fuse_paulis(std::vector<GateOp>& ops, int n_qubits);

// `instances` independently randomized copies of `base`.  Each coupling
// rotation exp(i th XX) is conjugated by a uniformly random two-qubit Pauli
// pair; the rotation angle flips sign when exactly one leg anticommutes
// with X, so every sandwich implements the original gate *exactly* and the
// noiseless circuit unitary is unchanged.  Averaging over instances turns
// coherent error on the coupling layer into a stochastic Pauli channel.
// Measurement twirling appends a random X layer (recorded in
// meas_flip_mask; the sampler undoes it bitwise), which symmetrizes
// readout: every qubit's effective flip rate becomes (p01 + p10) / 2
// regardless of the true bit value.
std::vector<Circuit> twirl_circuit(const Circuit& base, int instances, std::uint64_t seed,
                                   const TwirlOptions& opt = {});

// Near-even split of a shot budget (the first total % instances get one
// extra shot).
std::vector<std::uint64_t> split_shots(std::uint64_t total, std::size_t instances);

// ---- readout calibration ---------------------------------------------------

// Per-qubit confusion rates, assuming readout errors are independent across
// qubits (which is what makes two probe states enough).
struct ConfusionMatrix {
    std::vector<std::pair<double, double>> rates; // (p01, p10) per qubit
    std::uint64_t shots_per_state = 0;

    int n_qubits() const { return static_cast<int>(rates.size()); }
    double p01(int q) const { return rates[static_cast<std::size_t>(q)].first; }
    double p10(int q) const { return rates[static_cast<std::size_t>(q)].second; }
    // effective flip rate seen by measurement-twirled data
    double flip_rate(int q) const { return 0.5 * (p01(q) + p10(q)); }

    // Parity-inversion weights: E[w(read bit) | true bit] == 1 - 2*(true bit)
    // exactly, so products of w over a support are unbiased estimators of
    // the true parity.  symmetric=true uses the twirl-averaged rate and is
    // the right choice for measurement-twirled batches; false inverts the
    // raw asymmetric rates and is exact for untwirled ones.
    double w0(int q, bool symmetric) const;
    double w1(int q, bool symmetric) const;

    // Rejects rates whose inversion determinant 1 - p01 - p10 falls below
    // min_det: beyond that, correction amplifies noise more than 1/min_det.
    void validate(double min_det = 0.05) const;
};

// Estimate the confusion rates from the two uniform probe states |0..0> and
// |1..1> (depth-0 circuits).  Only the readout channel of `noise` applies:
// the depolarizing knobs model error accumulated by the quench's gates, and
// a probe with no entangling gates does not suffer it -- carrying it over
// would corrupt the confusion matrix and double-count error that the
// renormalization stage already removes.
ConfusionMatrix calibrate_readout(int n_qubits, const NoiseModel& noise,
                                  std::uint64_t shots_per_state, std::uint64_t seed);

// ---- corrected observables -------------------------------------------------

struct Correlator {
    std::vector<std::uint32_t> support;
    double raw = 0.0;       // plain parity mean of the recorded bits
    double corrected = 0.0; // readout-inverted estimate of the true parity
    double se = 0.0;        // standard error of `corrected`
};

// Readout-corrected parity estimates for arbitrary supports.  `symmetric`
// selects the weight mode (see ConfusionMatrix); pass the value matching
// how the batch was taken.  Standard errors here and downstream are
// cluster-robust over twirl instances (shots sharing a twirl_id also share
// its drawn Paulis and flip mask, so the instance average -- not the shot --
// is the independent unit); single-instance batches fall back to shot-level
// errors.
std::vector<Correlator> estimate_correlators(const BitstringBatch& batch,
                                             const std::vector<std::vector<std::uint32_t>>& supports,
                                             const ConfusionMatrix& cal, bool symmetric);

enum class RenormStat {
    mean_bond, // average corrected bond correlator (default)
    max_bond,  // least-depolarized bond; robust to spatially uneven noise
};

struct RenormFactor {
    double factor = 1.0;
    double se = 0.0;
    std::vector<double> bond_values; // corrected per-bond correlators
    RenormStat stat = RenormStat::mean_bond;
};

// Depolarization scale from a reference batch whose noiseless bond
// correlators <X_i X_{i+1}> are all +1 by construction: after readout
// correction, any remaining deficit is the depolarizing attenuation.
// Throws NumericalError when the factor lands below `floor` -- dividing by
// it would amplify noise past usefulness, and a reference that flat is a
// sign the noise model is outside the method's regime.
RenormFactor estimate_renorm(const BitstringBatch& ref_batch, const ConfusionMatrix& cal,
                             bool symmetric, RenormStat stat = RenormStat::mean_bond,
                             double floor = 0.05);

// ---- mitigated cumulants ---------------------------------------------------

struct MitigationSettings {
    bool symmetric_readout = true; // batch was measurement-twirled
    // Divide a weight-w parity by factor^(w/2) instead of factor: exact for
    // noise that acts per qubit rather than globally.  The default divides
    // every traceless term by the factor once, exact for a global
    // depolarizing channel.
    bool weight_scaled = false;
};

struct MitigationResult {
    std::array<double, 3> moments{};   // corrected raw moments of n
    std::array<double, 3> moment_se{};
    CumulantSet cumulants;             // with delta-method standard errors
};

// Corrected-moment evaluator: flattens the bond-parity expansions of
// n^1..n^3 with the readout weights and renormalization folded into each
// term, then evaluates the corrected moment triple for one packed
// bitstring.  Build once per (calibration, renorm) pair; eval() reuses
// internal scratch, so share across threads only behind one instance each.
class CorrectedMoments {
  public:
    CorrectedMoments(int n_qubits, const ConfusionMatrix& cal, const RenormFactor& renorm,
                     const MitigationSettings& settings);
    std::array<double, 3> eval(const std::uint64_t* bits) const;
    int n_qubits() const { return nq_; }

  private:
    struct FlatTerm {
        double scale; // coefficient with the renormalization divided out
        std::vector<std::uint32_t> sup;
    };
    int nq_;
    std::array<double, 3> constant_{};
    std::array<std::vector<FlatTerm>, 3> terms_;
    std::vector<double> w0_, w1_;
    mutable std::vector<double> wq_;
};

// Full correction of the kink-density moments: expand n^m over bond
// parities, readout-invert and renormalize every traceless term (the
// identity term passes through untouched), and propagate per-shot spread
// through the moment -> cumulant map by the delta method, all in one pass
// over the shots.  Calibration and renormalization enter as fixed scalars;
// their own (typically much smaller) uncertainty is not folded in here.
MitigationResult mitigate_cumulants(const BitstringBatch& batch, const ConfusionMatrix& cal,
                                    const RenormFactor& renorm,
                                    const MitigationSettings& settings = {});

} // namespace kz
