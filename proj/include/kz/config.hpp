#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kz/analysis.hpp"
#include "kz/noise.hpp"

namespace kz {

struct PlannedPoint {
    double tau_q = 1.0;
    int r = 1;
};

struct MitigationConfig {
    bool enabled = false;
    int n_twirls = 50;
    bool gate_twirl = true;
    bool measurement_twirl = true;
    std::uint64_t calibration_shots = 20000; // per probe state
    std::uint64_t reference_shots = 0;       // 0: reuse the main shot budget
    std::string reference = "zero_field";    // zero_field | pi_field
    std::string renorm_stat = "mean_bond";   // mean_bond | max_bond
    double renorm_floor = 0.05;
    bool weight_scaled = false; // per-qubit instead of global depolarizing model
};

// One experiment: a sweep over (tau_q, r) points at fixed size, backend,
// shot budget, noise and mitigation settings.  Parsed from a JSON file
// (grammar documented in the README); unknown keys are rejected so a typo
// cannot silently fall back to a default.
struct ExperimentConfig {
    int n_qubits = 0;
    std::string backend = "statevector"; // statevector | mps
    double j0 = 1.0;
    double h0 = 1.0;
    std::vector<PlannedPoint> sweep;     // may be empty: manifest-only run
    std::uint64_t shots = 2000;
    NoiseModel noise;
    MitigationConfig mitigation;
    // absent: no credible intervals, records carry point estimates + stderr
    std::optional<PosteriorConfig> posterior;
    double trunc_tol = 1e-12; // mps backend only
    long max_bond = 0;        // mps bond-dimension cap; 0 = none
    std::uint64_t seed = 1;
    std::string out = "results.ndjson";
    int workers = 1;

    void validate() const; // throws ConfigError
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

// Canonical serialization: every field materialized (defaults included),
// keys sorted, no whitespace.  Two configs hash equal iff every knob that
// can influence the records is equal; the output path and worker count are
// excluded on purpose (they change where/how results are written, not what
// they contain).
std::string canonical_json(const ExperimentConfig& cfg);
std::string config_hash_hex(const ExperimentConfig& cfg);

} // namespace kz
