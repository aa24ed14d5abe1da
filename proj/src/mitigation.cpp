#include "kz/mitigation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "kz/errors.hpp"
#include "kz/rng.hpp"
#include "kz/statevector.hpp"

namespace kz {

namespace {

bool is_pauli(GateKind k) {
    return k == GateKind::PauliX || k == GateKind::PauliY || k == GateKind::PauliZ;
}

// Shots within one twirl instance share its drawn Paulis and flip mask, so
// they are exchangeable but not independent across instances: a finite
// instance count leaves a residual (zero-mean) asymmetry that shot-level
// errors would miss.  Group shots by twirl_id and use the cluster-robust
// variance of the mean; with a single group it reduces to the iid formula.
std::map<std::int32_t, std::size_t> group_slots(const BitstringBatch& b) {
    std::map<std::int32_t, std::size_t> slots;
    for (std::size_t s = 0; s < b.n_shots(); ++s)
        slots.emplace(b.twirl_id[s], slots.size());
    return slots;
}

// var(mean) from per-group sums T_g of a per-shot statistic y:
//   M/(M-1) * (1/n^2) * sum_g (T_g - n_g * mean)^2
double cluster_var_of_mean(const std::vector<double>& t, const std::vector<double>& ng,
                           double n, double mean, double iid_sumsq) {
    const std::size_t m = t.size();
    if (m < 2) {
        double var = (iid_sumsq - n * mean * mean) / (n - 1.0);
        return std::max(0.0, var) / n;
    }
    double acc = 0.0;
    for (std::size_t g = 0; g < m; ++g) {
        double d = t[g] - ng[g] * mean;
        acc += d * d;
    }
    double md = static_cast<double>(m);
    return std::max(0.0, acc * md / (md - 1.0) / (n * n));
}

} // namespace

void fuse_paulis(std::vector<GateOp>& ops, int n_qubits) {
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<char> dead(ops.size(), 0);
        // index of the still-cancelable Pauli most recently seen per qubit
        std::vector<long> pending(static_cast<std::size_t>(n_qubits), -1);
        for (std::size_t i = 0; i < ops.size(); ++i) {
            const auto& g = ops[i];
            if (is_pauli(g.kind)) {
                long p = pending[static_cast<std::size_t>(g.q)];
                if (p >= 0 && ops[static_cast<std::size_t>(p)].kind == g.kind) {
                    dead[static_cast<std::size_t>(p)] = dead[i] = 1;
                    pending[static_cast<std::size_t>(g.q)] = -1;
                    changed = true;
                } else {
                    pending[static_cast<std::size_t>(g.q)] = static_cast<long>(i);
                }
            } else if (g.kind == GateKind::HadamardLayer) {
                std::fill(pending.begin(), pending.end(), -1);
            } else if (g.kind == GateKind::FieldRotation) {
                pending[static_cast<std::size_t>(g.q)] = -1;
            } else { // CouplingRotation
                pending[static_cast<std::size_t>(g.q)] = -1;
                pending[static_cast<std::size_t>(g.q) + 1] = -1;
            }
        }
        if (changed) {
            std::vector<GateOp> kept;
            kept.reserve(ops.size());
            for (std::size_t i = 0; i < ops.size(); ++i)
                if (!dead[i]) kept.push_back(ops[i]);
            ops = std::move(kept);
        }
    }
}

std::vector<Circuit> twirl_circuit(const Circuit& base, int instances, std::uint64_t seed,
                                   const TwirlOptions& opt) {
    if (instances < 1) throw ConfigError("need at least one twirl instance");
    if (base.twirl_id >= 0 || !base.meas_flip_mask.empty())
        throw ConfigError("circuit is already twirled");
    static constexpr GateKind pauli_of[4] = {GateKind::HadamardLayer, GateKind::PauliX,
                                             GateKind::PauliY, GateKind::PauliZ};
    Rng root(seed);
    std::vector<Circuit> out;
    out.reserve(static_cast<std::size_t>(instances));
    for (int inst = 0; inst < instances; ++inst) {
        Rng rng = root.derive(static_cast<std::uint64_t>(inst));
        Circuit tw = base;
        tw.ops.clear();
        tw.twirl_id = inst;
        for (const auto& g : base.ops) {
            if (g.kind != GateKind::CouplingRotation || !opt.gate_twirl) {
                tw.ops.push_back(g);
                continue;
            }
            const int code = static_cast<int>(rng.below(16));
            const int pl = code & 3, pr = code >> 2; // 0=I 1=X 2=Y 3=Z
            // Y and Z anticommute with X; the sandwiched rotation flips its
            // angle when exactly one leg does
            const double sign = ((pl >= 2) != (pr >= 2)) ? -1.0 : 1.0;
            auto emit = [&](int p, int q) {
                if (p != 0) tw.ops.push_back({pauli_of[p], q, 0.0});
            };
            emit(pl, g.q);
            emit(pr, g.q + 1);
            tw.ops.push_back({GateKind::CouplingRotation, g.q, sign * g.angle});
            emit(pl, g.q);
            emit(pr, g.q + 1);
        }
        // fuse before the flip layer so a cancellation can never desync the
        // appended X gates from meas_flip_mask
        if (opt.fuse) fuse_paulis(tw.ops, base.n_qubits);
        if (opt.measurement_twirl) {
            tw.meas_flip_mask.assign(static_cast<std::size_t>(words_for(base.n_qubits)), 0);
            for (int q = 0; q < base.n_qubits; ++q)
                if (rng.next() & 1) {
                    tw.meas_flip_mask[static_cast<std::size_t>(q) / 64] |= std::uint64_t{1}
                                                                           << (q % 64);
                    tw.ops.push_back({GateKind::PauliX, q, 0.0});
                }
        }
        out.push_back(std::move(tw));
    }
    return out;
}

std::vector<std::uint64_t> split_shots(std::uint64_t total, std::size_t instances) {
    if (instances == 0) throw ConfigError("cannot split shots over zero instances");
    std::vector<std::uint64_t> out(instances, total / instances);
    for (std::size_t i = 0; i < total % instances; ++i) ++out[i];
    return out;
}

double ConfusionMatrix::w0(int q, bool symmetric) const {
    if (symmetric) return 1.0 / (1.0 - 2.0 * flip_rate(q));
    double det = 1.0 - p01(q) - p10(q);
    return (1.0 - p10(q) + p01(q)) / det;
}

double ConfusionMatrix::w1(int q, bool symmetric) const {
    if (symmetric) return -1.0 / (1.0 - 2.0 * flip_rate(q));
    double det = 1.0 - p01(q) - p10(q);
    return -(1.0 + p10(q) - p01(q)) / det;
}

void ConfusionMatrix::validate(double min_det) const {
    if (rates.empty()) throw ConfigError("empty confusion matrix");
    for (int q = 0; q < n_qubits(); ++q) {
        double det = 1.0 - p01(q) - p10(q);
        if (det < min_det)
            throw NumericalError("readout on qubit " + std::to_string(q) +
                                 " too noisy to invert (1-p01-p10 = " + std::to_string(det) + ")");
    }
}

ConfusionMatrix calibrate_readout(int n_qubits, const NoiseModel& noise,
                                  std::uint64_t shots_per_state, std::uint64_t seed) {
    if (n_qubits < 1) throw ConfigError("calibration needs at least one qubit");
    if (shots_per_state < 1) throw ConfigError("calibration needs at least one shot per state");
    noise.validate(n_qubits);

    // Keep only the readout channel: the probes are depth-0, so the gate-
    // and circuit-level depolarizing knobs have nothing to act on.
    NoiseModel ro;
    ro.readout = noise.readout;

    Circuit zero;
    zero.n_qubits = n_qubits;
    zero.measure_basis = 'Z';
    zero.variant = "cal_zero";
    Circuit ones = zero;
    ones.variant = "cal_ones";
    for (int q = 0; q < n_qubits; ++q) ones.ops.push_back({GateKind::PauliX, q, 0.0});

    Rng root(seed);
    auto b0 = run_noisy(zero, ro, shots_per_state, root.next());
    auto b1 = run_noisy(ones, ro, shots_per_state, root.next());

    ConfusionMatrix cm;
    cm.shots_per_state = shots_per_state;
    cm.rates.assign(static_cast<std::size_t>(n_qubits), {0.0, 0.0});
    for (std::size_t s = 0; s < b0.n_shots(); ++s) {
        const std::uint64_t* w0s = b0.shot(s);
        const std::uint64_t* w1s = b1.shot(s);
        for (int q = 0; q < n_qubits; ++q) {
            if ((w0s[q / 64] >> (q % 64)) & 1) cm.rates[static_cast<std::size_t>(q)].first += 1.0;
            if (!((w1s[q / 64] >> (q % 64)) & 1))
                cm.rates[static_cast<std::size_t>(q)].second += 1.0;
        }
    }
    for (auto& [a, b] : cm.rates) {
        a /= static_cast<double>(shots_per_state);
        b /= static_cast<double>(shots_per_state);
    }
    return cm;
}

std::vector<Correlator> estimate_correlators(const BitstringBatch& batch,
                                             const std::vector<std::vector<std::uint32_t>>& supports,
                                             const ConfusionMatrix& cal, bool symmetric) {
    if (batch.n_shots() < 2) throw ConfigError("need at least two shots");
    if (cal.n_qubits() < batch.n_qubits)
        throw ConfigError("confusion matrix covers fewer qubits than the batch");
    const double n = static_cast<double>(batch.n_shots());
    auto slots = group_slots(batch);

    std::vector<Correlator> out;
    out.reserve(supports.size());
    for (const auto& sup : supports) {
        for (auto q : sup)
            if (static_cast<int>(q) >= batch.n_qubits)
                throw ConfigError("correlator support outside the register");
        for (std::size_t i = 0; i + 1 < sup.size(); ++i)
            if (sup[i] >= sup[i + 1])
                throw ConfigError("correlator support must be strictly ascending");
        Correlator c;
        c.support = sup;
        double sum = 0.0, sumsq = 0.0, raw = 0.0;
        std::vector<double> tg(slots.size(), 0.0), ng(slots.size(), 0.0);
        for (std::size_t s = 0; s < batch.n_shots(); ++s) {
            const std::uint64_t* w = batch.shot(s);
            double prod = 1.0;
            int par = 0;
            for (auto q : sup) {
                int bit = static_cast<int>((w[q / 64] >> (q % 64)) & 1);
                par ^= bit;
                prod *= bit ? cal.w1(static_cast<int>(q), symmetric)
                            : cal.w0(static_cast<int>(q), symmetric);
            }
            raw += par ? -1.0 : 1.0;
            sum += prod;
            sumsq += prod * prod;
            std::size_t g = slots.at(batch.twirl_id[s]);
            tg[g] += prod;
            ng[g] += 1.0;
        }
        c.raw = raw / n;
        c.corrected = sum / n;
        c.se = std::sqrt(cluster_var_of_mean(tg, ng, n, c.corrected, sumsq));
        out.push_back(std::move(c));
    }
    return out;
}

RenormFactor estimate_renorm(const BitstringBatch& ref_batch, const ConfusionMatrix& cal,
                             bool symmetric, RenormStat stat, double floor) {
    const int nq = ref_batch.n_qubits;
    if (nq < 2) throw ConfigError("renormalization needs at least one bond");
    if (ref_batch.n_shots() < 2) throw ConfigError("need at least two reference shots");

    std::vector<std::vector<std::uint32_t>> bonds;
    bonds.reserve(static_cast<std::size_t>(nq) - 1);
    for (std::uint32_t b = 0; b + 1 < static_cast<std::uint32_t>(nq); ++b)
        bonds.push_back({b, b + 1});
    auto cors = estimate_correlators(ref_batch, bonds, cal, symmetric);

    RenormFactor rf;
    rf.stat = stat;
    rf.bond_values.reserve(cors.size());
    for (const auto& c : cors) rf.bond_values.push_back(c.corrected);

    if (stat == RenormStat::max_bond) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < cors.size(); ++i)
            if (cors[i].corrected > cors[best].corrected) best = i;
        rf.factor = cors[best].corrected;
        rf.se = cors[best].se;
    } else {
        // per-shot mean over bonds so the s.e. respects cross-bond
        // correlation, grouped by twirl instance like the correlators
        const double n = static_cast<double>(ref_batch.n_shots());
        const double nb = static_cast<double>(bonds.size());
        auto slots = group_slots(ref_batch);
        std::vector<double> tg(slots.size(), 0.0), ng(slots.size(), 0.0);
        double sum = 0.0, sumsq = 0.0;
        for (std::size_t s = 0; s < ref_batch.n_shots(); ++s) {
            const std::uint64_t* w = ref_batch.shot(s);
            double y = 0.0;
            for (std::uint32_t b = 0; b + 1 < static_cast<std::uint32_t>(nq); ++b) {
                int b0 = static_cast<int>((w[b / 64] >> (b % 64)) & 1);
                int b1 = static_cast<int>((w[(b + 1) / 64] >> ((b + 1) % 64)) & 1);
                double p = (b0 ? cal.w1(static_cast<int>(b), symmetric)
                               : cal.w0(static_cast<int>(b), symmetric)) *
                           (b1 ? cal.w1(static_cast<int>(b) + 1, symmetric)
                               : cal.w0(static_cast<int>(b) + 1, symmetric));
                y += p;
            }
            y /= nb;
            sum += y;
            sumsq += y * y;
            std::size_t g = slots.at(ref_batch.twirl_id[s]);
            tg[g] += y;
            ng[g] += 1.0;
        }
        rf.factor = sum / n;
        rf.se = std::sqrt(cluster_var_of_mean(tg, ng, n, rf.factor, sumsq));
    }

    if (rf.factor < floor)
        throw NumericalError("reference correlators too depolarized to renormalize (factor = " +
                             std::to_string(rf.factor) + ", floor = " + std::to_string(floor) +
                             ")");
    return rf;
}

CorrectedMoments::CorrectedMoments(int n_qubits, const ConfusionMatrix& cal,
                                   const RenormFactor& renorm, const MitigationSettings& settings)
    : nq_(n_qubits) {
    if (cal.n_qubits() < n_qubits)
        throw ConfigError("confusion matrix covers fewer qubits than the register");
    if (!(renorm.factor > 0.0)) throw ConfigError("renormalization factor must be positive");
    cal.validate();

    for (int m = 1; m <= 3; ++m) {
        auto e = moment_expansion(m, n_qubits);
        for (const auto& t : e.terms) {
            double c = e.coefficient(t);
            if (t.support.empty()) {
                constant_[static_cast<std::size_t>(m - 1)] += c;
                continue;
            }
            double div = settings.weight_scaled
                             ? std::pow(renorm.factor,
                                        0.5 * static_cast<double>(t.support.size()))
                             : renorm.factor;
            terms_[static_cast<std::size_t>(m - 1)].push_back({c / div, t.support});
        }
    }
    w0_.resize(static_cast<std::size_t>(n_qubits));
    w1_.resize(static_cast<std::size_t>(n_qubits));
    wq_.resize(static_cast<std::size_t>(n_qubits));
    for (int q = 0; q < n_qubits; ++q) {
        w0_[static_cast<std::size_t>(q)] = cal.w0(q, settings.symmetric_readout);
        w1_[static_cast<std::size_t>(q)] = cal.w1(q, settings.symmetric_readout);
    }
}

std::array<double, 3> CorrectedMoments::eval(const std::uint64_t* bits) const {
    for (int q = 0; q < nq_; ++q)
        wq_[static_cast<std::size_t>(q)] =
            ((bits[q / 64] >> (q % 64)) & 1) ? w1_[static_cast<std::size_t>(q)]
                                             : w0_[static_cast<std::size_t>(q)];
    std::array<double, 3> y;
    for (int m = 0; m < 3; ++m) {
        double acc = constant_[static_cast<std::size_t>(m)];
        for (const auto& t : terms_[static_cast<std::size_t>(m)]) {
            double prod = t.scale;
            for (auto q : t.sup) prod *= wq_[q];
            acc += prod;
        }
        y[static_cast<std::size_t>(m)] = acc;
    }
    return y;
}

MitigationResult mitigate_cumulants(const BitstringBatch& batch, const ConfusionMatrix& cal,
                                    const RenormFactor& renorm, const MitigationSettings& settings) {
    if (batch.basis != 'X')
        throw ConfigError("cumulant mitigation expects X-basis batches (got basis '" +
                          std::string(1, batch.basis) + "')");
    if (batch.n_shots() < 2) throw ConfigError("need at least two shots");
    CorrectedMoments cm(batch.n_qubits, cal, renorm, settings);

    const double n = static_cast<double>(batch.n_shots());

    auto slots = group_slots(batch);
    const std::size_t m_groups = slots.size();
    std::array<double, 3> s1{};
    double s2[3][3] = {};
    std::vector<std::array<double, 3>> tg(m_groups, {0.0, 0.0, 0.0});
    std::vector<double> ng(m_groups, 0.0);
    for (std::size_t s = 0; s < batch.n_shots(); ++s) {
        auto y = cm.eval(batch.shot(s));
        std::size_t g = slots.at(batch.twirl_id[s]);
        ng[g] += 1.0;
        for (int i = 0; i < 3; ++i) {
            s1[static_cast<std::size_t>(i)] += y[static_cast<std::size_t>(i)];
            tg[g][static_cast<std::size_t>(i)] += y[static_cast<std::size_t>(i)];
            for (int j = i; j < 3; ++j)
                s2[i][j] += y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)];
        }
    }

    std::array<double, 3> mu;
    for (int i = 0; i < 3; ++i) mu[static_cast<std::size_t>(i)] = s1[static_cast<std::size_t>(i)] / n;
    // covariance of the *means*, cluster-robust over twirl instances
    double cov[3][3];
    if (m_groups >= 2) {
        const double md = static_cast<double>(m_groups);
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) cov[i][j] = 0.0;
        for (std::size_t g = 0; g < m_groups; ++g)
            for (int i = 0; i < 3; ++i)
                for (int j = i; j < 3; ++j)
                    cov[i][j] += (tg[g][static_cast<std::size_t>(i)] -
                                  ng[g] * mu[static_cast<std::size_t>(i)]) *
                                 (tg[g][static_cast<std::size_t>(j)] -
                                  ng[g] * mu[static_cast<std::size_t>(j)]);
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j)
                cov[j][i] = cov[i][j] = cov[i][j] * md / (md - 1.0) / (n * n);
    } else {
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) {
                double c = (s2[i][j] - n * mu[static_cast<std::size_t>(i)] *
                                           mu[static_cast<std::size_t>(j)]) /
                           (n - 1.0);
                cov[i][j] = cov[j][i] = c / n;
            }
    }

    auto quad = [&](const double g[3]) {
        double v = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) v += g[i] * cov[i][j] * g[j];
        return std::sqrt(std::max(0.0, v));
    };
    const double m1 = mu[0], m2 = mu[1];
    const double g1[3] = {1.0, 0.0, 0.0};
    const double g2[3] = {-2.0 * m1, 1.0, 0.0};
    const double g3[3] = {6.0 * m1 * m1 - 3.0 * m2, -3.0 * m1, 1.0};

    MitigationResult res;
    res.moments = mu;
    for (int i = 0; i < 3; ++i)
        res.moment_se[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, cov[i][i]));
    double se2 = quad(g2);
    // tolerate kappa2 slightly negative (within noise); reject beyond that
    res.cumulants = cumulants_from_moments(mu[0], mu[1], mu[2], std::max(1e-12, 3.0 * se2));
    res.cumulants.stderr1 = quad(g1);
    res.cumulants.stderr2 = se2;
    res.cumulants.stderr3 = quad(g3);
    return res;
}

} // namespace kz
