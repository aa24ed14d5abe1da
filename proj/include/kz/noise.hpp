#pragma once

#include <utility>
#include <vector>

#include "kz/errors.hpp"

namespace kz {

// Stochastic noise injected by the sampling backends.
//   two_qubit_depol: after each CouplingRotation, with this probability one
//     of the 15 non-identity two-qubit Paulis (uniform) hits the bond.
//   global_depol: per shot, with this probability the measured outcome is
//     replaced by a uniformly random bitstring.
//   readout: classical bit flips applied to each measured bit;
//     (p01, p10) = P(read 1 | true 0), P(read 0 | true 1).  One entry
//     broadcasts to all qubits; otherwise one entry per qubit.
struct NoiseModel {
    double two_qubit_depol = 0.0;
    double global_depol = 0.0;
    std::vector<std::pair<double, double>> readout;

    bool has_readout() const {
        for (auto [a, b] : readout)
            if (a != 0.0 || b != 0.0) return true;
        return false;
    }
    bool any_noise() const {
        return two_qubit_depol > 0.0 || global_depol > 0.0 || has_readout();
    }
    std::pair<double, double> readout_for(int q) const {
        if (readout.empty()) return {0.0, 0.0};
        return readout.size() == 1 ? readout[0] : readout[static_cast<std::size_t>(q)];
    }
    void validate(int n_qubits) const {
        auto prob = [](double p, const char* what) {
            if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " outside [0,1]");
        };
        prob(two_qubit_depol, "two_qubit_depol");
        prob(global_depol, "global_depol");
        if (!readout.empty() && readout.size() != 1 &&
            readout.size() != static_cast<std::size_t>(n_qubits))
            throw ConfigError("readout noise needs 1 entry or one per qubit");
        for (auto [a, b] : readout) {
            prob(a, "readout p01");
            prob(b, "readout p10");
        }
    }
};

} // namespace kz
