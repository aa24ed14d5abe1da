#include "kz/statevector.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kz/errors.hpp"
#include "kz/kernels.hpp"
#include "kz/rng.hpp"

namespace kz {

StateVector StateVector::prepare(int n_qubits, std::size_t mem_budget) {
    if (n_qubits < 1 || n_qubits > 48) throw ConfigError("bad qubit count for statevector");
    std::size_t dim = std::size_t{1} << n_qubits;
    // re + im arrays plus the sampling workspace run_noisy keeps alongside
    std::size_t need = 24 * dim;
    if (need > mem_budget)
        throw ResourceError("statevector for N=" + std::to_string(n_qubits) + " needs " +
                            std::to_string(need) + " bytes, budget is " +
                            std::to_string(mem_budget) + "; raise mem_budget or use the mps backend");
    StateVector sv;
    sv.n_qubits_ = n_qubits;
    sv.re_.assign(dim, 0.0);
    sv.im_.assign(dim, 0.0);
    sv.re_[0] = 1.0;
    return sv;
}

void StateVector::apply(const GateOp& g) {
    const auto& k = kernels::active();
    const std::size_t n = dim();
    switch (g.kind) {
    case GateKind::HadamardLayer:
        for (int q = 0; q < n_qubits_; ++q) k.hadamard(re_.data(), im_.data(), n, q);
        break;
    case GateKind::PauliX: k.pauli_x(re_.data(), im_.data(), n, g.q); break;
    case GateKind::PauliY: k.pauli_y(re_.data(), im_.data(), n, g.q); break;
    case GateKind::PauliZ: k.pauli_z(re_.data(), im_.data(), n, g.q); break;
    case GateKind::FieldRotation:
        k.phase_rot(re_.data(), im_.data(), n, g.q, std::cos(g.angle), std::sin(g.angle));
        break;
    case GateKind::CouplingRotation:
        k.xx_rot(re_.data(), im_.data(), n, g.q, std::cos(g.angle), std::sin(g.angle));
        break;
    }
}

void StateVector::apply_ops(std::span<const GateOp> ops) {
    for (const auto& g : ops) apply(g);
}

double StateVector::norm_sq() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < re_.size(); ++i) acc += re_[i] * re_[i] + im_[i] * im_[i];
    return acc;
}

double StateVector::x_correlator(std::span<const std::uint32_t> support) const {
    std::uint64_t mask = 0;
    for (auto q : support) mask |= std::uint64_t{1} << q;
    auto v = kernels::active().xor_dot(re_.data(), im_.data(), dim(), mask);
    if (std::abs(v.imag()) > 1e-10)
        throw NumericalError("X correlator has imaginary part " + std::to_string(v.imag()));
    return v.real();
}

double StateVector::z_parity(std::span<const std::uint32_t> support) const {
    std::uint64_t mask = 0;
    for (auto q : support) mask |= std::uint64_t{1} << q;
    double acc = 0.0;
    for (std::size_t i = 0; i < re_.size(); ++i) {
        double p = re_[i] * re_[i] + im_[i] * im_[i];
        acc += (std::popcount(i & mask) & 1) ? -p : p;
    }
    return acc;
}

double StateVector::expect_moment(const MomentExpansion& e, bool diagonal) const {
    if (e.n_qubits != n_qubits_) throw ConfigError("moment expansion built for different N");
    double acc = 0.0;
    for (const auto& t : e.terms) {
        double corr = t.support.empty() ? 1.0
                    : diagonal          ? z_parity(t.support)
                                        : x_correlator(t.support);
        acc += e.coefficient(t) * corr;
    }
    return acc;
}

std::vector<double> StateVector::kink_pmf() const {
    std::vector<double> pmf(static_cast<std::size_t>(n_qubits_), 0.0);
    const std::uint64_t bond_mask = (std::uint64_t{1} << (n_qubits_ - 1)) - 1;
    for (std::size_t i = 0; i < re_.size(); ++i) {
        int k = std::popcount((i ^ (i >> 1)) & bond_mask);
        pmf[static_cast<std::size_t>(k)] += re_[i] * re_[i] + im_[i] * im_[i];
    }
    return pmf;
}

BitstringBatch run_noisy(const Circuit& circuit, const NoiseModel& noise, std::uint64_t shots,
                         std::uint64_t seed, std::size_t mem_budget) {
    const int n = circuit.n_qubits;
    noise.validate(n);

    BitstringBatch batch;
    batch.n_qubits = n;
    batch.basis = circuit.measure_basis;
    batch.words_per_shot = words_for(n);
    batch.reserve(shots);

    std::vector<std::uint64_t> flipw(static_cast<std::size_t>(batch.words_per_shot), 0ull);
    std::copy(circuit.meas_flip_mask.begin(), circuit.meas_flip_mask.end(), flipw.begin());
    std::uint64_t flip_mask = flipw[0]; // N <= 24 here, one word

    const std::uint64_t dim = std::uint64_t{1} << n;
    const std::uint64_t dim_mask = dim - 1;

    // noiseless evolution once; only the cumulative distribution survives
    std::vector<double> cdf(dim);
    {
        StateVector sv = StateVector::prepare(n, mem_budget);
        sv.apply_circuit(circuit);
        double acc = 0.0;
        for (std::uint64_t i = 0; i < dim; ++i) {
            double re = sv.re()[i], im = sv.im()[i];
            acc += re * re + im * im;
            cdf[i] = acc;
        }
    }
    const double total = cdf.back();

    std::vector<std::size_t> coup_ordinal_of_op;
    std::size_t n_coup = 0;
    for (const auto& g : circuit.ops) {
        coup_ordinal_of_op.push_back(g.kind == GateKind::CouplingRotation ? n_coup++ : SIZE_MAX);
    }

    const double lambda = noise.two_qubit_depol;
    const double p_glob = noise.global_depol;
    std::vector<std::uint8_t> ro_active(static_cast<std::size_t>(n), 0);
    bool any_ro = false;
    for (int q = 0; q < n; ++q) {
        auto [p01, p10] = noise.readout_for(q);
        ro_active[static_cast<std::size_t>(q)] = (p01 > 0.0 || p10 > 0.0);
        any_ro |= ro_active[static_cast<std::size_t>(q)] != 0;
    }

    Rng root(seed);
    struct Insertion {
        std::size_t gate;
        int code; // 1..15, low 2 bits left qubit's Pauli, next 2 bits right's
    };
    std::vector<Insertion> ins;
    std::vector<std::uint64_t> w(static_cast<std::size_t>(batch.words_per_shot));

    for (std::uint64_t s = 0; s < shots; ++s) {
        Rng rng = root.derive(s);

        ins.clear();
        if (lambda > 0.0)
            for (std::size_t g = 0; g < n_coup; ++g)
                if (rng.u01() < lambda)
                    ins.push_back({g, static_cast<int>(rng.below(15)) + 1});

        std::uint64_t outcome;
        bool replaced = p_glob > 0.0 && rng.u01() < p_glob;
        if (replaced) {
            outcome = rng.next() & dim_mask;
        } else if (ins.empty()) {
            double u = rng.u01() * total;
            auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
            outcome = std::min<std::uint64_t>(static_cast<std::uint64_t>(it - cdf.begin()), dim - 1);
        } else {
            // re-evolve this trajectory with the sampled Pauli insertions
            StateVector sv = StateVector::prepare(n, mem_budget);
            std::size_t next_ins = 0;
            for (std::size_t oi = 0; oi < circuit.ops.size(); ++oi) {
                sv.apply(circuit.ops[oi]);
                std::size_t ord = coup_ordinal_of_op[oi];
                if (ord == SIZE_MAX) continue;
                while (next_ins < ins.size() && ins[next_ins].gate == ord) {
                    int code = ins[next_ins].code;
                    int q = circuit.ops[oi].q;
                    static constexpr GateKind pk[4] = {GateKind::HadamardLayer, GateKind::PauliX,
                                                       GateKind::PauliY, GateKind::PauliZ};
                    if (code & 3) sv.apply({pk[code & 3], q, 0.0});
                    if ((code >> 2) & 3) sv.apply({pk[(code >> 2) & 3], q + 1, 0.0});
                    ++next_ins;
                }
            }
            double u = rng.u01() * sv.norm_sq();
            double acc = 0.0;
            outcome = dim - 1;
            for (std::uint64_t i = 0; i < dim; ++i) {
                acc += sv.re()[i] * sv.re()[i] + sv.im()[i] * sv.im()[i];
                if (acc >= u) {
                    outcome = i;
                    break;
                }
            }
        }

        if (any_ro)
            for (int q = 0; q < n; ++q) {
                if (!ro_active[static_cast<std::size_t>(q)]) continue;
                auto [p01, p10] = noise.readout_for(q);
                double pf = ((outcome >> q) & 1) ? p10 : p01;
                if (rng.u01() < pf) outcome ^= std::uint64_t{1} << q;
            }

        outcome ^= flip_mask;
        w[0] = outcome;
        batch.push_shot(w.data(), circuit.twirl_id, flipw.data());
    }
    return batch;
}

} // namespace kz
