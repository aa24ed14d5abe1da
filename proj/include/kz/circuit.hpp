#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kz/model.hpp"

namespace kz {

// Gate alphabet.  Rotations use the full-exponent convention:
//   FieldRotation(q, theta)    = exp(+i * theta * Z_q)
//   CouplingRotation(q, theta) = exp(+i * theta * X_q X_{q+1})
// (theta is the whole exponent, not a half angle).
enum class GateKind : std::uint8_t {
    HadamardLayer,  // H on every qubit
    PauliX,
    PauliY,
    PauliZ,
    FieldRotation,
    CouplingRotation,
};

struct GateOp {
    GateKind kind;
    int q = -1;          // qubit (or left qubit of the bond); unused for HadamardLayer
    double angle = 0.0;  // rotations only
};

struct TrotterPlan {
    int r = 1;           // number of Trotter steps
    double t = 1.0;      // total evolved time
    double dt() const { return t / r; }
};

// Midpoint times (k + 1/2) * dt, k = 0..r-1, at which the schedule is frozen
// for step k.  Exposed so tests and diagnostics see exactly what the builder
// uses.
std::vector<double> midpoint_times(const TrotterPlan& plan);

struct Circuit {
    int n_qubits = 0;
    char measure_basis = 'X';  // what a computational-basis readout of the
                               // final state means; 'X' once the trailing
                               // Hadamard layer is part of the op list
    std::vector<GateOp> ops;
    QuenchSchedule schedule;
    int r = 0;
    std::string variant = "quench";  // quench | ref_zero_field | ref_pi_field
    // measurement-twirl bookkeeping (set by the twirler, empty otherwise)
    std::vector<std::uint64_t> meas_flip_mask;
    int twirl_id = -1;

    std::size_t coupling_count() const;
};

struct TrotterOptions {
    // Second-order split: field half-step outside, coupling inside (default).
    // field_outside = false swaps the roles (coupling halved, field whole).
    bool field_outside = true;
    // Merge the adjacent field half-layers of consecutive steps into one
    // full-angle layer.  Off by default: per-step layers keep gate counts
    // and twirling patterns uniform across steps.
    bool merge_field_layers = false;
};

// Second-order Trotterization of the quench from t=0 to t=plan.t, both
// couplings frozen at the step midpoint.  State preparation is the all-zero
// computational state (ground state at t=0, where h dominates); the circuit
// ends with a Hadamard layer so that a computational readout measures in
// the X basis.
Circuit build_quench_circuit(const QuenchSchedule& s, const TrotterPlan& plan, int n_qubits,
                             const TrotterOptions& opt = {});

enum class ReferenceVariant { zero_field, pi_field };

// Depolarization-probe twin of `base`: same gate sequence and coupling
// angles, but prepared in |+...+> via a leading Hadamard layer, and with the
// field angles either zeroed or rescaled so each qubit's summed field angle
// is exactly pi.  Noiselessly, every bond correlator <X_i X_{i+1}> of the
// probe equals +1 (zero_field leaves |+..+> invariant up to phase; a summed
// pi field angle is a global spin flip in the X basis), so any measured
// deficit is attributable to noise.
Circuit build_reference_circuit(const Circuit& base, ReferenceVariant v);

// Text round-trip.  Header "N r tau_Q variant" (plus "j0 h0" when either
// differs from 1), one gate per line, angles with 17 significant digits.
std::string serialize(const Circuit& c);
Circuit parse_circuit(const std::string& text);

// FNV-1a of the serialized text; stable identity for batches and records.
std::string circuit_hash_hex(const Circuit& c);

} // namespace kz
