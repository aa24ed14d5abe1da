#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "kz/errors.hpp"
#include "kz/mps.hpp"
#include "kz/statevector.hpp"
#include "oracle_utils.hpp"

using namespace kz;

namespace {

double max_amp_diff(const MPSState& mps, const StateVector& sv) {
    auto dense = mps.to_dense();
    double diff = 0.0;
    for (std::uint64_t i = 0; i < dense.size(); ++i)
        diff = std::max(diff, std::abs(dense[i] - sv.amplitude(i)));
    return diff;
}

// tight enough that no genuine Schmidt weight is ever discarded; dense
// comparisons then see only fp roundoff
MPSState::Options exact_opts() {
    MPSState::Options o;
    o.trunc_tol = 1e-24;
    return o;
}

} // namespace

TEST_CASE("product state contracts to |00...0>") {
    auto mps = MPSState::product_zero(4);
    auto dense = mps.to_dense();
    CHECK(dense.size() == 16);
    CHECK(std::abs(dense[0] - 1.0) < 1e-15);
    for (std::uint64_t i = 1; i < 16; ++i) CHECK(std::abs(dense[i]) == 0.0);
    CHECK(mps.max_bond_dimension() == 1);
    CHECK(mps.norm() == doctest::Approx(1.0));
}

TEST_CASE("single coupling gate reproduces cos|00> + i sin|11>") {
    auto mps = MPSState::product_zero(2);
    double th = 0.61;
    mps.apply({GateKind::CouplingRotation, 0, th});
    auto dense = mps.to_dense();
    CHECK(dense[0].real() == doctest::Approx(std::cos(th)).epsilon(1e-14));
    CHECK(dense[3].imag() == doctest::Approx(std::sin(th)).epsilon(1e-14));
    CHECK(std::abs(dense[1]) < 1e-15);
    CHECK(std::abs(dense[2]) < 1e-15);
    CHECK(mps.max_bond_dimension() == 2);
}

TEST_CASE("full quench circuit agrees with the statevector backend at N=8") {
    QuenchSchedule s{3.0, 1.0, 1.0};
    auto c = build_quench_circuit(s, {25, 3.0}, 8);
    auto sv = StateVector::prepare(8);
    sv.apply_circuit(c);
    auto mps = MPSState::product_zero(8, exact_opts());
    mps.evolve_circuit(c);
    CHECK(max_amp_diff(mps, sv) < 1e-10);
    CHECK(mps.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mps.canonical_residual() < 1e-12);
    CHECK(mps.discarded_weight() < 1e-9);
}

TEST_CASE("reference circuits agree with the statevector backend") {
    auto base = build_quench_circuit({2.0, 1.0, 1.0}, {12, 2.0}, 6);
    for (auto v : {ReferenceVariant::zero_field, ReferenceVariant::pi_field}) {
        auto ref = build_reference_circuit(base, v);
        auto sv = StateVector::prepare(6);
        sv.apply_circuit(ref);
        auto mps = MPSState::product_zero(6, exact_opts());
        mps.evolve_circuit(ref);
        CHECK(max_amp_diff(mps, sv) < 1e-10);
    }
}

TEST_CASE("site products and moments match the dense backend") {
    auto c = build_quench_circuit({1.3, 1.0, 1.0}, {18, 1.3}, 7);
    auto sv = StateVector::prepare(7);
    sv.apply_circuit(c);
    auto mps = MPSState::product_zero(7, exact_opts());
    mps.evolve_circuit(c);

    for (int m = 1; m <= 3; ++m) {
        auto e = moment_expansion(m, 7);
        CHECK(mps.expect_moment(e, true) == doctest::Approx(sv.expect_moment(e, true)).epsilon(1e-10));
    }
    // single diagonal parity vs the dense backend
    std::vector<std::uint32_t> sup{1, 2, 5};
    MomentExpansion single;
    single.order = 1;
    single.n_qubits = 7;
    single.denom = 1.0;
    BondTerm term;
    term.coeff_num = 1;
    term.support = sup;
    single.terms.push_back(term);
    CHECK(mps.site_product_expectation(sup, 'Z') ==
          doctest::Approx(sv.expect_moment(single, true)).epsilon(1e-10));
}

TEST_CASE("site product demands sorted support and known operators") {
    auto mps = MPSState::product_zero(4);
    std::vector<std::uint32_t> bad{2, 1};
    CHECK_THROWS_AS(mps.site_product_expectation(bad, 'Z'), ConfigError);
    std::vector<std::uint32_t> ok{1, 2};
    CHECK_THROWS_AS(mps.site_product_expectation(ok, 'Y'), ConfigError);
    CHECK(mps.site_product_expectation({}, 'Z') == 1.0);
}

TEST_CASE("sampling matches the exact bitstring distribution (chi^2)") {
    const int n = 5;
    auto c = build_quench_circuit({0.8, 1.0, 1.0}, {14, 0.8}, n);
    auto sv = StateVector::prepare(n);
    sv.apply_circuit(c);
    auto mps = MPSState::product_zero(n);
    mps.evolve_circuit(c);

    const std::uint64_t shots = 40000;
    auto batch = mps.sample(shots, 99);
    CHECK(batch.basis == 'X');
    CHECK(batch.n_shots() == shots);

    std::vector<double> expected(1u << n);
    for (std::uint64_t i = 0; i < expected.size(); ++i)
        expected[i] = std::norm(sv.amplitude(i)) * static_cast<double>(shots);
    std::vector<double> observed(1u << n, 0.0);
    for (std::size_t s = 0; s < batch.n_shots(); ++s) observed[batch.shot(s)[0]] += 1.0;

    double chi2 = 0.0;
    int dof = -1;
    for (std::uint64_t i = 0; i < expected.size(); ++i) {
        if (expected[i] < 1e-9) {
            CHECK(observed[i] == 0.0);
            continue;
        }
        chi2 += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
        ++dof;
    }
    CHECK(oracle::chi2_sf(chi2, dof) > 1e-4);
}

TEST_CASE("sample basis override rotates or labels without touching the state") {
    const int n = 4;
    auto c = build_quench_circuit({1.0, 1.0, 1.0}, {10, 1.0}, n);
    c.ops.pop_back(); // drop the trailing Hadamard layer; state stays in Z form
    c.measure_basis = 'Z';
    auto mps = MPSState::product_zero(n);
    mps.evolve_circuit(c);

    auto sv = StateVector::prepare(n);
    sv.apply_circuit(c);
    StateVector svx = sv;
    svx.apply({GateKind::HadamardLayer, -1, 0.0});

    auto before = mps.to_dense();
    auto bz = mps.sample(30000, 7, 'Z');
    auto bx = mps.sample(30000, 7, 'X');
    CHECK(bz.basis == 'Z');
    CHECK(bx.basis == 'X');

    auto gof = [&](const BitstringBatch& b, const StateVector& ref) {
        std::vector<double> obs(1u << n, 0.0);
        for (std::size_t s = 0; s < b.n_shots(); ++s) obs[b.shot(s)[0]] += 1.0;
        double chi2 = 0.0;
        int dof = -1;
        for (std::uint64_t i = 0; i < obs.size(); ++i) {
            double e = std::norm(ref.amplitude(i)) * static_cast<double>(b.n_shots());
            if (e < 1e-9) continue;
            chi2 += (obs[i] - e) * (obs[i] - e) / e;
            ++dof;
        }
        return oracle::chi2_sf(chi2, dof);
    };
    CHECK(gof(bz, sv) > 1e-4);
    CHECK(gof(bx, svx) > 1e-4);
    // the override did not mutate the state
    auto after = mps.to_dense();
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("sampling is reproducible and seed-sensitive") {
    auto c = build_quench_circuit({1.0, 1.0, 1.0}, {8, 1.0}, 6);
    auto mps = MPSState::product_zero(6);
    mps.evolve_circuit(c);
    auto a = mps.sample(200, 42);
    auto b = mps.sample(200, 42);
    auto d = mps.sample(200, 43);
    CHECK(a.bits == b.bits);
    CHECK(a.bits != d.bits);
}

TEST_CASE("max_bond cap truncates and reports discarded weight") {
    auto c = build_quench_circuit({4.0, 1.0, 1.0}, {40, 4.0}, 10);
    MPSState::Options capped;
    capped.max_bond = 4;
    capped.discard_fail = 0.5;
    auto mps = MPSState::product_zero(10, capped);
    mps.evolve_circuit(c);
    CHECK(mps.max_bond_dimension() <= 4);
    CHECK(mps.max_bond_reached() <= 4);
    CHECK(mps.discarded_weight() > 0.0);
    // still a normalized state
    CHECK(mps.norm() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(mps.canonical_residual() < 1e-12);
}

TEST_CASE("discard_fail rejects truncation that destroys the state") {
    auto c = build_quench_circuit({4.0, 1.0, 1.0}, {40, 4.0}, 10);
    MPSState::Options strict;
    strict.max_bond = 2;
    strict.discard_fail = 1e-8;
    auto mps = MPSState::product_zero(10, strict);
    CHECK_THROWS_AS(mps.evolve_circuit(c), NumericalError);
}

TEST_CASE("memory budget is enforced") {
    MPSState::Options tiny;
    tiny.mem_budget = 1024; // bytes; blows up once bonds grow
    auto c = build_quench_circuit({2.0, 1.0, 1.0}, {10, 2.0}, 12);
    auto mps = MPSState::product_zero(12, tiny);
    CHECK_THROWS_AS(mps.evolve_circuit(c), ResourceError);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    auto c = build_quench_circuit({1.7, 1.0, 1.0}, {15, 1.7}, 6);
    auto mps = MPSState::product_zero(6);
    mps.evolve_circuit(c);

    const std::string path = "mps_roundtrip.ckpt";
    mps.save(path);
    auto back = MPSState::load(path);
    std::remove(path.c_str());

    CHECK(back.n_qubits() == 6);
    CHECK(back.orthogonality_center() == mps.orthogonality_center());
    auto a = mps.to_dense();
    auto b = back.to_dense();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    // sampling machinery picks up the stored basis label
    auto batch = back.sample(10, 1);
    CHECK(batch.basis == 'X');
}

TEST_CASE("load rejects mangled checkpoints") {
    CHECK_THROWS_AS(MPSState::load("no_such_file.ckpt"), ConfigError);

    const std::string path = "mps_bad.ckpt";
    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("KZMPS001garbage", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(MPSState::load(path), ConfigError);
    std::remove(path.c_str());
}

TEST_CASE("long evolution stays canonical with bounded residual") {
    auto c = build_quench_circuit({6.0, 1.0, 1.0}, {60, 6.0}, 12);
    auto mps = MPSState::product_zero(12);
    mps.evolve_circuit(c);
    CHECK(mps.canonical_residual() < 1e-11);
    CHECK(mps.norm() == doctest::Approx(1.0).epsilon(1e-11));
    // OBC quench at this size is comfortably low-entanglement
    CHECK(mps.max_bond_reached() <= 64);
}
