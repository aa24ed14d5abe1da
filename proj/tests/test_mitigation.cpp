#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "kz/errors.hpp"
#include "kz/mitigation.hpp"
#include "kz/ode.hpp"
#include "kz/rng.hpp"
#include "kz/statevector.hpp"
#include "oracle_utils.hpp"

using namespace kz;

namespace {

oracle::Vec random_state(int n_qubits, std::uint64_t seed) {
    Rng rng(seed);
    oracle::Vec v(std::int64_t{1} << n_qubits);
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = {rng.normal(), rng.normal()};
    return v / v.norm();
}

int count_kind(const Circuit& c, GateKind k) {
    int n = 0;
    for (const auto& g : c.ops) n += g.kind == k;
    return n;
}

} // namespace

TEST_CASE("all 16 pauli sandwiches reproduce the bare coupling gate") {
    const double th = 0.37;
    auto base = oracle::gate_unitary(2, {GateKind::CouplingRotation, 0, th});
    const GateKind pk[4] = {GateKind::HadamardLayer, GateKind::PauliX, GateKind::PauliY,
                            GateKind::PauliZ};
    for (int code = 0; code < 16; ++code) {
        int pl = code & 3, pr = code >> 2;
        double sign = ((pl >= 2) != (pr >= 2)) ? -1.0 : 1.0;
        oracle::Mat u = oracle::Mat::Identity(4, 4);
        auto mul = [&](const GateOp& g) { u = oracle::gate_unitary(2, g) * u; };
        if (pl) mul({pk[pl], 0, 0.0});
        if (pr) mul({pk[pr], 1, 0.0});
        mul({GateKind::CouplingRotation, 0, sign * th});
        if (pl) mul({pk[pl], 0, 0.0});
        if (pr) mul({pk[pr], 1, 0.0});
        CHECK((u - base).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("gate-twirled circuits implement the base unitary exactly") {
    auto base = build_quench_circuit({1.2, 1.0, 1.0}, {6, 1.2}, 5);
    TwirlOptions opt;
    opt.measurement_twirl = false;
    auto tws = twirl_circuit(base, 4, 11, opt);
    REQUIRE(tws.size() == 4);

    auto v0 = random_state(5, 3);
    auto ref = oracle::apply_circuit(base, v0);
    auto sv_ref = StateVector::prepare(5);
    sv_ref.apply_circuit(base);

    for (const auto& tw : tws) {
        CHECK(tw.twirl_id >= 0);
        CHECK(tw.meas_flip_mask.empty());
        // oracle path, arbitrary input state
        auto got = oracle::apply_circuit(tw, v0);
        CHECK((got - ref).cwiseAbs().maxCoeff() < 1e-12);
        // production kernels from |0...0>
        auto sv = StateVector::prepare(5);
        sv.apply_circuit(tw);
        for (std::uint64_t i = 0; i < 32; ++i)
            CHECK(std::abs(sv.amplitude(i) - sv_ref.amplitude(i)) < 1e-12);
    }
}

TEST_CASE("fusion shrinks the op list without touching the unitary") {
    auto base = build_quench_circuit({1.2, 1.0, 1.0}, {6, 1.2}, 5);
    TwirlOptions raw;
    raw.measurement_twirl = false;
    raw.fuse = false;
    TwirlOptions fused = raw;
    fused.fuse = true;
    auto a = twirl_circuit(base, 3, 17, raw);
    auto b = twirl_circuit(base, 3, 17, fused);
    auto v0 = random_state(5, 5);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(b[i].ops.size() <= a[i].ops.size());
        auto va = oracle::apply_circuit(a[i], v0);
        auto vb = oracle::apply_circuit(b[i], v0);
        CHECK((va - vb).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("fuse_paulis cancels identical neighbours only") {
    std::vector<GateOp> ops{{GateKind::PauliX, 0, 0.0}, {GateKind::PauliX, 0, 0.0}};
    fuse_paulis(ops, 2);
    CHECK(ops.empty());

    ops = {{GateKind::PauliX, 0, 0.0}, {GateKind::PauliY, 0, 0.0}};
    fuse_paulis(ops, 2);
    CHECK(ops.size() == 2);

    // an op on the qubit in between blocks cancellation
    ops = {{GateKind::PauliX, 0, 0.0},
           {GateKind::FieldRotation, 0, 0.4},
           {GateKind::PauliX, 0, 0.0}};
    fuse_paulis(ops, 2);
    CHECK(ops.size() == 3);

    ops = {{GateKind::PauliX, 0, 0.0}, {GateKind::HadamardLayer, -1, 0.0},
           {GateKind::PauliX, 0, 0.0}};
    fuse_paulis(ops, 2);
    CHECK(ops.size() == 3);

    // an op on a *different* qubit does not block it
    ops = {{GateKind::PauliX, 0, 0.0},
           {GateKind::FieldRotation, 1, 0.4},
           {GateKind::PauliX, 0, 0.0}};
    fuse_paulis(ops, 2);
    CHECK(ops.size() == 1);

    // nested pairs need the fixpoint pass
    ops = {{GateKind::PauliX, 0, 0.0},
           {GateKind::PauliY, 0, 0.0},
           {GateKind::PauliY, 0, 0.0},
           {GateKind::PauliX, 0, 0.0}};
    fuse_paulis(ops, 2);
    CHECK(ops.empty());
}

TEST_CASE("measurement twirl appends the recorded flip layer") {
    auto base = build_quench_circuit({1.0, 1.0, 1.0}, {4, 1.0}, 6);
    TwirlOptions opt;
    opt.gate_twirl = false;
    auto tws = twirl_circuit(base, 8, 23, opt);

    bool saw_nonzero = false;
    for (const auto& tw : tws) {
        REQUIRE(tw.meas_flip_mask.size() == 1);
        std::uint64_t mask = tw.meas_flip_mask[0];
        saw_nonzero = saw_nonzero || mask != 0;
        CHECK(count_kind(tw, GateKind::PauliX) == std::popcount(mask));

        auto sv_base = StateVector::prepare(6);
        sv_base.apply_circuit(base);
        auto sv_tw = StateVector::prepare(6);
        sv_tw.apply_circuit(tw);
        for (std::uint64_t i = 0; i < 64; ++i)
            CHECK(std::abs(sv_tw.amplitude(i ^ mask) - sv_base.amplitude(i)) < 1e-12);
    }
    CHECK(saw_nonzero);
}

TEST_CASE("twirling is deterministic in the seed and refuses double twirl") {
    auto base = build_quench_circuit({1.0, 1.0, 1.0}, {3, 1.0}, 4);
    auto a = twirl_circuit(base, 2, 31);
    auto b = twirl_circuit(base, 2, 31);
    CHECK(serialize(a[0]) == serialize(b[0]));
    CHECK(serialize(a[1]) == serialize(b[1]));
    CHECK(serialize(a[0]) != serialize(a[1]));
    CHECK_THROWS_AS(twirl_circuit(a[0], 2, 1), ConfigError);
}

TEST_CASE("split_shots spreads the remainder") {
    auto s = split_shots(10, 4);
    CHECK(s == std::vector<std::uint64_t>{3, 3, 2, 2});
    CHECK(std::accumulate(s.begin(), s.end(), std::uint64_t{0}) == 10);
    CHECK_THROWS_AS(split_shots(5, 0), ConfigError);
}

TEST_CASE("calibration recovers injected readout rates") {
    NoiseModel nm;
    nm.readout = {{0.02, 0.05}, {0.10, 0.01}, {0.0, 0.0}, {0.07, 0.07}};
    const std::uint64_t shots = 60000;
    auto cm = calibrate_readout(4, nm, shots, 2024);
    REQUIRE(cm.n_qubits() == 4);
    for (int q = 0; q < 4; ++q) {
        auto [p01, p10] = nm.readout[static_cast<std::size_t>(q)];
        double s01 = std::sqrt(p01 * (1 - p01) / shots) + 1e-12;
        double s10 = std::sqrt(p10 * (1 - p10) / shots) + 1e-12;
        CHECK(std::abs(cm.p01(q) - p01) < 5 * s01);
        CHECK(std::abs(cm.p10(q) - p10) < 5 * s10);
    }
    CHECK(cm.flip_rate(0) == doctest::Approx(0.5 * (cm.p01(0) + cm.p10(0))));
}

TEST_CASE("depolarizing noise cannot leak into the calibration") {
    NoiseModel clean;
    clean.readout = {{0.03, 0.08}};
    NoiseModel dirty = clean;
    dirty.global_depol = 0.4;
    dirty.two_qubit_depol = 0.1;
    auto a = calibrate_readout(3, clean, 5000, 7);
    auto b = calibrate_readout(3, dirty, 5000, 7);
    // identical streams, identical estimates: the probes see readout only
    CHECK(a.rates == b.rates);
}

TEST_CASE("confusion matrix validation rejects non-invertible readout") {
    ConfusionMatrix cm;
    cm.rates = {{0.5, 0.48}};
    CHECK_THROWS_AS(cm.validate(), NumericalError);
    cm.rates = {{0.05, 0.05}};
    CHECK_NOTHROW(cm.validate());
}

TEST_CASE("asymmetric weights invert raw readout, symmetric invert twirled") {
    // |000> prepared perfectly; <1-2b_0> = 1 exactly
    Circuit zero;
    zero.n_qubits = 3;
    zero.measure_basis = 'Z';
    NoiseModel nm;
    nm.readout = {{0.2, 0.05}};
    ConfusionMatrix cm;
    cm.rates = {{0.2, 0.05}, {0.2, 0.05}, {0.2, 0.05}};

    const std::uint64_t shots = 40000;
    std::vector<std::vector<std::uint32_t>> sup{{0}};

    auto raw_batch = run_noisy(zero, nm, shots, 91);
    auto raw_cor = estimate_correlators(raw_batch, sup, cm, false);
    CHECK(std::abs(raw_cor[0].raw - (1 - 2 * 0.2)) < 0.02);
    CHECK(std::abs(raw_cor[0].corrected - 1.0) < 5 * raw_cor[0].se);

    // symmetric weights on untwirled data leave the asymmetry in: biased
    auto raw_sym = estimate_correlators(raw_batch, sup, cm, true);
    CHECK(raw_sym[0].corrected < 0.9);

    // measurement-twirled batches: effective flip rate (p01+p10)/2 per qubit
    TwirlOptions opt;
    opt.gate_twirl = false;
    auto tws = twirl_circuit(zero, 16, 5, opt);
    BitstringBatch pooled;
    pooled.n_qubits = 3;
    pooled.basis = 'Z';
    pooled.words_per_shot = 1;
    for (std::size_t i = 0; i < tws.size(); ++i)
        pooled.append(run_noisy(tws[i], nm, shots / 16, 1000 + i));
    auto tw_cor = estimate_correlators(pooled, sup, cm, true);
    CHECK(std::abs(tw_cor[0].corrected - 1.0) < 5 * tw_cor[0].se);
}

TEST_CASE("correlator supports are validated") {
    Circuit zero;
    zero.n_qubits = 3;
    zero.measure_basis = 'Z';
    auto batch = run_noisy(zero, {}, 10, 1);
    ConfusionMatrix cm;
    cm.rates = {{0, 0}, {0, 0}, {0, 0}};
    CHECK_THROWS_AS(estimate_correlators(batch, {{0, 3}}, cm, true), ConfigError);
    CHECK_THROWS_AS(estimate_correlators(batch, {{1, 1}}, cm, true), ConfigError);
    CHECK_THROWS_AS(estimate_correlators(batch, {{2, 1}}, cm, true), ConfigError);
}

TEST_CASE("renormalization reads the depolarizing attenuation off the reference") {
    auto base = build_quench_circuit({1.5, 1.0, 1.0}, {10, 1.5}, 6);
    auto ref = build_reference_circuit(base, ReferenceVariant::zero_field);

    NoiseModel nm;
    nm.global_depol = 0.3;
    nm.readout = {{0.03, 0.06}};
    auto cm = calibrate_readout(6, nm, 60000, 13);

    auto tws = twirl_circuit(ref, 8, 77);
    BitstringBatch pooled;
    pooled.n_qubits = 6;
    pooled.basis = 'X';
    pooled.words_per_shot = 1;
    auto split = split_shots(80000, tws.size());
    for (std::size_t i = 0; i < tws.size(); ++i)
        pooled.append(run_noisy(tws[i], nm, split[i], 400 + i));

    auto rf = estimate_renorm(pooled, cm, true);
    REQUIRE(rf.bond_values.size() == 5);
    CHECK(std::abs(rf.factor - 0.7) < 5 * rf.se);
    CHECK(rf.se < 0.01);

    auto rmax = estimate_renorm(pooled, cm, true, RenormStat::max_bond);
    CHECK(rmax.factor >= rf.factor - 1e-12);

    CHECK_THROWS_AS(estimate_renorm(pooled, cm, true, RenormStat::mean_bond, 0.9),
                    NumericalError);
}

TEST_CASE("mitigation recovers noiseless cumulants under global depolarizing noise") {
    const int n = 6;
    auto base = build_quench_circuit({1.5, 1.0, 1.0}, {12, 1.5}, n);

    // exact targets from the dense backend
    auto sv = StateVector::prepare(n);
    sv.apply_circuit(base);
    auto mu_exact = moments_from_kink_pmf(sv.kink_pmf(), n);
    auto kappa_exact = cumulants_from_moments(mu_exact[0], mu_exact[1], mu_exact[2]);

    NoiseModel nm;
    nm.global_depol = 0.3;
    nm.readout = {{0.02, 0.05}};

    auto cm = calibrate_readout(n, nm, 60000, 29);

    auto make_batch = [&](const Circuit& c, std::uint64_t total, std::uint64_t seed) {
        auto tws = twirl_circuit(c, 8, seed);
        auto split = split_shots(total, tws.size());
        BitstringBatch pooled;
        pooled.n_qubits = n;
        pooled.basis = 'X';
        pooled.words_per_shot = 1;
        for (std::size_t i = 0; i < tws.size(); ++i)
            pooled.append(run_noisy(tws[i], nm, split[i], seed * 100 + i));
        return pooled;
    };

    auto main_batch = make_batch(base, 120000, 3);
    auto ref_batch = make_batch(build_reference_circuit(base, ReferenceVariant::zero_field),
                                80000, 4);
    auto rf = estimate_renorm(ref_batch, cm, true);

    auto res = mitigate_cumulants(main_batch, cm, rf);
    for (int m = 0; m < 3; ++m)
        CHECK(std::abs(res.moments[static_cast<std::size_t>(m)] -
                       mu_exact[static_cast<std::size_t>(m)]) <
              5 * res.moment_se[static_cast<std::size_t>(m)] + 1e-9);
    CHECK(std::abs(res.cumulants.kappa1 - kappa_exact.kappa1) < 5 * res.cumulants.stderr1);
    CHECK(std::abs(res.cumulants.kappa2 - kappa_exact.kappa2) < 5 * res.cumulants.stderr2);
    CHECK(std::abs(res.cumulants.kappa3 - kappa_exact.kappa3) < 5 * res.cumulants.stderr3);
    CHECK(res.cumulants.estimator == "plugin");
    CHECK(res.cumulants.stderr1 > 0.0);

    // the uncorrected estimate is visibly biased; mitigation earns its keep
    ConfusionMatrix ident;
    ident.rates.assign(n, {0.0, 0.0});
    RenormFactor unity;
    auto raw = mitigate_cumulants(main_batch, ident, unity);
    CHECK(std::abs(raw.cumulants.kappa1 - kappa_exact.kappa1) > 10 * res.cumulants.stderr1);
}

TEST_CASE("weight-scaled renormalization agrees on kappa1 and differs on kappa2") {
    const int n = 5;
    auto base = build_quench_circuit({1.0, 1.0, 1.0}, {8, 1.0}, n);
    NoiseModel nm;
    nm.global_depol = 0.2;
    auto tws = twirl_circuit(base, 4, 55);
    BitstringBatch pooled;
    pooled.n_qubits = n;
    pooled.basis = 'X';
    pooled.words_per_shot = 1;
    for (std::size_t i = 0; i < tws.size(); ++i)
        pooled.append(run_noisy(tws[i], nm, 5000, 70 + i));

    ConfusionMatrix ident;
    ident.rates.assign(n, {0.0, 0.0});
    RenormFactor rf;
    rf.factor = 0.8;

    MitigationSettings global;
    MitigationSettings weighted;
    weighted.weight_scaled = true;
    auto a = mitigate_cumulants(pooled, ident, rf, global);
    auto b = mitigate_cumulants(pooled, ident, rf, weighted);
    // every term of the first moment has weight 2, so kappa1 cannot differ
    CHECK(a.cumulants.kappa1 == doctest::Approx(b.cumulants.kappa1).epsilon(1e-13));
    CHECK(a.cumulants.kappa2 != doctest::Approx(b.cumulants.kappa2).epsilon(1e-6));
}

TEST_CASE("mitigation rejects mismatched inputs") {
    Circuit zero;
    zero.n_qubits = 3;
    zero.measure_basis = 'Z';
    auto zbatch = run_noisy(zero, {}, 10, 1);
    ConfusionMatrix cm;
    cm.rates.assign(3, {0.0, 0.0});
    RenormFactor rf;
    CHECK_THROWS_AS(mitigate_cumulants(zbatch, cm, rf), ConfigError);

    auto base = build_quench_circuit({1.0, 1.0, 1.0}, {3, 1.0}, 4);
    auto xbatch = run_noisy(base, {}, 10, 1);
    ConfusionMatrix small;
    small.rates.assign(2, {0.0, 0.0});
    CHECK_THROWS_AS(mitigate_cumulants(xbatch, small, rf), ConfigError);
    ConfusionMatrix cm4;
    cm4.rates.assign(4, {0.0, 0.0});
    RenormFactor bad;
    bad.factor = 0.0;
    CHECK_THROWS_AS(mitigate_cumulants(xbatch, cm4, bad), ConfigError);
}
