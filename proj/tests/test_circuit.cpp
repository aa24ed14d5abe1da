#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kz/circuit.hpp"
#include "kz/errors.hpp"
#include "oracle_utils.hpp"

using namespace kz;

TEST_CASE("midpoint times sit at (k+1/2) dt") {
    TrotterPlan plan{4, 2.0};
    auto ts = midpoint_times(plan);
    REQUIRE(ts.size() == 4);
    CHECK(ts[0] == doctest::Approx(0.25));
    CHECK(ts[3] == doctest::Approx(1.75));
    CHECK_THROWS_AS(midpoint_times({0, 1.0}), ConfigError);
}

TEST_CASE("gate counts: r(N-1) couplings, 2rN field gates, one trailing H layer") {
    const int n = 7, r = 5;
    auto c = build_quench_circuit({2.0, 1.0, 1.0}, {r, 2.0}, n);
    CHECK(c.coupling_count() == static_cast<std::size_t>(r * (n - 1)));
    int fields = 0, hlayers = 0;
    for (const auto& g : c.ops) {
        fields += g.kind == GateKind::FieldRotation;
        hlayers += g.kind == GateKind::HadamardLayer;
    }
    CHECK(fields == 2 * r * n);
    CHECK(hlayers == 1);
    CHECK(c.ops.back().kind == GateKind::HadamardLayer);
    CHECK(c.measure_basis == 'X');
}

TEST_CASE("coupling layer order: even ascending then odd descending") {
    auto c = build_quench_circuit({1.0, 1.0, 1.0}, {1, 1.0}, 6);
    std::vector<int> bonds;
    for (const auto& g : c.ops)
        if (g.kind == GateKind::CouplingRotation) bonds.push_back(g.q);
    CHECK(bonds == std::vector<int>{0, 2, 4, 3, 1});
}

TEST_CASE("angles follow the midpoint schedule") {
    QuenchSchedule s{2.0, 1.0, 1.0};
    TrotterPlan plan{4, 2.0};
    auto c = build_quench_circuit(s, plan, 3);
    auto ts = midpoint_times(plan);
    double dt = plan.dt();
    // first field gate of step 0 carries h(t0') dt / 2
    auto [j0, h0] = couplings_at(s, ts[0]);
    CHECK(c.ops[0].kind == GateKind::FieldRotation);
    CHECK(c.ops[0].angle == doctest::Approx(h0 * dt / 2).epsilon(1e-15));
    // first coupling gate carries J(t0') dt
    for (const auto& g : c.ops)
        if (g.kind == GateKind::CouplingRotation) {
            CHECK(g.angle == doctest::Approx(j0 * dt).epsilon(1e-15));
            break;
        }
}

TEST_CASE("merged field layers leave the circuit unitary unchanged") {
    QuenchSchedule s{1.5, 1.0, 1.0};
    TrotterPlan plan{3, 1.5};
    auto plain = build_quench_circuit(s, plan, 3);
    TrotterOptions opt;
    opt.merge_field_layers = true;
    auto merged = build_quench_circuit(s, plan, 3, opt);

    int fields_merged = 0;
    for (const auto& g : merged.ops) fields_merged += g.kind == GateKind::FieldRotation;
    CHECK(fields_merged == (plan.r + 1) * 3);

    auto va = oracle::apply_circuit(plain, oracle::zero_state(3));
    auto vb = oracle::apply_circuit(merged, oracle::zero_state(3));
    CHECK((va - vb).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("both second-order splits converge to the same evolution") {
    QuenchSchedule s{1.0, 1.0, 1.0};
    const int n = 3, r = 200;
    TrotterOptions swapped;
    swapped.field_outside = false;
    auto a = build_quench_circuit(s, {r, 1.0}, n);
    auto b = build_quench_circuit(s, {r, 1.0}, n, swapped);
    auto exact = oracle::exact_evolution(s, n, 1.0, 4000);
    // strip the measurement rotation for the comparison
    a.ops.pop_back();
    b.ops.pop_back();
    auto va = oracle::apply_circuit(a, oracle::zero_state(n));
    auto vb = oracle::apply_circuit(b, oracle::zero_state(n));
    CHECK((va - exact).norm() < 1e-3);
    CHECK((vb - exact).norm() < 1e-3);
}

TEST_CASE("serialize/parse round-trips bit-exactly") {
    auto c = build_quench_circuit({3.7, 1.0, 1.0}, {6, 3.7}, 5);
    auto text = serialize(c);
    auto back = parse_circuit(text);
    REQUIRE(back.ops.size() == c.ops.size());
    for (std::size_t i = 0; i < c.ops.size(); ++i) {
        CHECK(back.ops[i].kind == c.ops[i].kind);
        CHECK(back.ops[i].q == c.ops[i].q);
        CHECK(back.ops[i].angle == c.ops[i].angle); // exact: 17 significant digits
    }
    CHECK(back.n_qubits == c.n_qubits);
    CHECK(back.r == c.r);
    CHECK(back.schedule.tau_q == c.schedule.tau_q);
    CHECK(back.variant == c.variant);
    CHECK(circuit_hash_hex(back) == circuit_hash_hex(c));
}

TEST_CASE("parse rejects malformed input") {
    CHECK_THROWS_AS(parse_circuit(""), ConfigError);
    CHECK_THROWS_AS(parse_circuit("3 1 1.0 quench\nBOGUS 0 0.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_circuit("3 1 1.0 quench\nCOUP 2 0.5\n"), ConfigError); // bond 2 needs qubit 3
    CHECK_THROWS_AS(parse_circuit("3 1 1.0 quench\nFIELD 3 0.5\n"), ConfigError);
}

TEST_CASE("hash distinguishes circuits") {
    auto a = build_quench_circuit({2.0, 1.0, 1.0}, {5, 2.0}, 6);
    auto b = build_quench_circuit({2.0, 1.0, 1.0}, {6, 2.0}, 6);
    CHECK(circuit_hash_hex(a) != circuit_hash_hex(b));
    CHECK(circuit_hash_hex(a) == circuit_hash_hex(build_quench_circuit({2.0, 1.0, 1.0}, {5, 2.0}, 6)));
}

TEST_CASE("zero-field reference: same couplings, zero fields, exact unit correlators") {
    auto base = build_quench_circuit({2.0, 1.0, 1.0}, {4, 2.0}, 4);
    auto ref = build_reference_circuit(base, ReferenceVariant::zero_field);
    CHECK(ref.variant == "ref_zero_field");
    CHECK(ref.ops.front().kind == GateKind::HadamardLayer);
    CHECK(ref.coupling_count() == base.coupling_count());
    for (const auto& g : ref.ops)
        if (g.kind == GateKind::FieldRotation) CHECK(g.angle == 0.0);

    // |+...+> is an eigenstate of every coupling rotation: before the final
    // measurement rotation all bond correlators are exactly +1
    auto pre = ref;
    pre.ops.pop_back();
    auto v = oracle::apply_circuit(pre, oracle::zero_state(4));
    for (int b = 0; b + 1 < 4; ++b) {
        std::vector<std::uint32_t> sup{static_cast<std::uint32_t>(b),
                                       static_cast<std::uint32_t>(b + 1)};
        double corr = (v.adjoint() * oracle::x_product(4, sup) * v)(0, 0).real();
        CHECK(corr == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("pi-field reference: per-qubit field angles sum to pi") {
    auto base = build_quench_circuit({2.0, 1.0, 1.0}, {4, 2.0}, 4);
    auto ref = build_reference_circuit(base, ReferenceVariant::pi_field);
    std::vector<double> tot(4, 0.0);
    for (const auto& g : ref.ops)
        if (g.kind == GateKind::FieldRotation) tot[g.q] += g.angle;
    for (double t : tot) CHECK(t == doctest::Approx(3.14159265358979324).epsilon(1e-12));
    // coupling angles untouched
    std::size_t i = 0;
    std::vector<double> base_coup, ref_coup;
    for (const auto& g : base.ops)
        if (g.kind == GateKind::CouplingRotation) base_coup.push_back(g.angle);
    for (const auto& g : ref.ops)
        if (g.kind == GateKind::CouplingRotation) ref_coup.push_back(g.angle);
    REQUIRE(base_coup.size() == ref_coup.size());
    for (i = 0; i < base_coup.size(); ++i) CHECK(base_coup[i] == ref_coup[i]);
}
