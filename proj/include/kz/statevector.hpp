#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "kz/batch.hpp"
#include "kz/circuit.hpp"
#include "kz/model.hpp"
#include "kz/noise.hpp"

namespace kz {

// Dense statevector over split re/im arrays.  Gate application goes through
// the runtime-dispatched kernel table (kz/kernels.hpp).
class StateVector {
  public:
    static constexpr std::size_t default_mem_budget = std::size_t{512} << 20;

    // |00...0> on n qubits; throws ResourceError when 24 * 2^n bytes (state
    // plus sampling workspace) exceed the budget: N=24 fits the default,
    // N=25 does not -- use the MPS backend instead.
    static StateVector prepare(int n_qubits, std::size_t mem_budget = default_mem_budget);

    int n_qubits() const { return n_qubits_; }
    std::size_t dim() const { return re_.size(); }

    void apply(const GateOp& g);
    void apply_ops(std::span<const GateOp> ops);
    void apply_circuit(const Circuit& c) { apply_ops(c.ops); }

    std::complex<double> amplitude(std::uint64_t idx) const { return {re_[idx], im_[idx]}; }
    double norm_sq() const;

    // <prod_{q in S} X_q> of the current state (via sum_i conj(a_i) a_{i^mask});
    // imaginary part must vanish for these Hermitian products, checked to 1e-10.
    double x_correlator(std::span<const std::uint32_t> support) const;
    // <prod_{q in S} Z_q>: diagonal parity sum.  Equals the X correlator of
    // the pre-rotation state once the trailing Hadamard layer has run.
    double z_parity(std::span<const std::uint32_t> support) const;

    // Exact moment <n^m> of the kink density.  `diagonal` picks z_parity
    // (state already includes the measurement-basis rotation, the normal case
    // for circuits ending in H_LAYER) vs x_correlator (raw evolved state).
    double expect_moment(const MomentExpansion& e, bool diagonal = true) const;

    // Exact distribution of the kink count of a computational-basis readout
    // of the current state (index k = number of adjacent unequal bits).
    std::vector<double> kink_pmf() const;

    const double* re() const { return re_.data(); }
    const double* im() const { return im_.data(); }
    double* re() { return re_.data(); }
    double* im() { return im_.data(); }

  private:
    StateVector() = default;
    int n_qubits_ = 0;
    std::vector<double> re_, im_;
};

// Evolve `circuit` from |00...0> and draw `shots` samples under `noise`.
// Deterministic in (circuit, noise, shots, seed): shot s consumes only the
// derived stream (seed, s).  Depolarizing insertions re-evolve the affected
// shot's trajectory; clean shots sample from the cached noiseless
// distribution.  Readout flips and the measurement-twirl unflip act on
// classical bits at the end.
BitstringBatch run_noisy(const Circuit& circuit, const NoiseModel& noise, std::uint64_t shots,
                         std::uint64_t seed,
                         std::size_t mem_budget = StateVector::default_mem_budget);

} // namespace kz
