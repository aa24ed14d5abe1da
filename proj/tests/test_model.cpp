#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kz/bits.hpp"
#include "kz/errors.hpp"
#include "kz/model.hpp"
#include "kz/ode.hpp"
#include "kz/rng.hpp"
#include "oracle_utils.hpp"

using namespace kz;

TEST_CASE("linear schedule hits its endpoints and crossing") {
    QuenchSchedule s{4.0, 1.0, 1.0};
    auto c0 = couplings_at(s, 0.0);
    CHECK(c0.j == 0.0);
    CHECK(c0.h == 1.0);
    auto c1 = couplings_at(s, 4.0);
    CHECK(c1.j == 1.0);
    CHECK(c1.h == 0.0);
    auto cm = couplings_at(s, 2.0);
    CHECK(cm.j == doctest::Approx(cm.h));
    CHECK_THROWS_AS(couplings_at({-1.0, 1.0, 1.0}, 0.5), ConfigError);
}

static int naive_kinks(const std::vector<int>& bits) {
    int k = 0;
    for (std::size_t i = 0; i + 1 < bits.size(); ++i) k += bits[i] != bits[i + 1];
    return k;
}

TEST_CASE("kink_count agrees with a naive bit walk, across word boundaries") {
    Rng r(5);
    for (int n_bits : {2, 5, 63, 64, 65, 100, 130}) {
        for (int rep = 0; rep < 200; ++rep) {
            std::vector<std::uint64_t> w(words_for(n_bits));
            std::vector<int> bits(n_bits);
            for (auto& x : w) x = r.next();
            for (int i = 0; i < n_bits; ++i) bits[i] = (w[i / 64] >> (i % 64)) & 1;
            CHECK(kink_count(w.data(), n_bits) == naive_kinks(bits));
        }
    }
}

TEST_CASE("masked_parity and hex round-trip") {
    Rng r(6);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<std::uint64_t> w{r.next(), r.next()};
        std::vector<std::uint64_t> m{r.next(), r.next()};
        int naive = 0;
        for (int i = 0; i < 128; ++i)
            naive ^= static_cast<int>(((w[i / 64] >> (i % 64)) & (m[i / 64] >> (i % 64))) & 1);
        CHECK(masked_parity(w.data(), m.data(), 2) == naive);

        auto s = to_hex(w.data(), 2);
        std::vector<std::uint64_t> back(2);
        from_hex(s, back.data(), 2);
        CHECK(back == w);
    }
}

TEST_CASE("moment expansion: exact coefficients at N=3") {
    auto e = moment_expansion(2, 3);
    CHECK(e.denom == 36.0);
    double ident = 0.0, single = 0.0, pair = 0.0;
    for (const auto& t : e.terms) {
        if (t.bonds.empty()) ident += e.coefficient(t);
        else if (t.bonds.size() == 1) single += e.coefficient(t);
        else pair += e.coefficient(t);
    }
    CHECK(ident == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    CHECK(single == doctest::Approx(-8.0 / 36.0).epsilon(1e-12)); // two bonds, -4/36 each
    CHECK(pair == doctest::Approx(2.0 / 36.0).epsilon(1e-15));
}

TEST_CASE("bond-product support keeps only odd-degree qubits") {
    auto e = moment_expansion(2, 4);
    for (const auto& t : e.terms) {
        if (t.bonds == std::vector<std::uint32_t>{0, 1})
            CHECK(t.support == std::vector<std::uint32_t>{0, 2}); // qubit 1 appears twice
        if (t.bonds == std::vector<std::uint32_t>{0, 2})
            CHECK(t.support == std::vector<std::uint32_t>{0, 1, 2, 3});
    }
}

TEST_CASE("moment expansion reproduces dense <n^m> on random states") {
    const int n = 5;
    Rng r(7);
    oracle::Vec psi(1 << n);
    for (int i = 0; i < (1 << n); ++i) psi(i) = {r.normal(), r.normal()};
    psi.normalize();

    oracle::Mat nop = oracle::kink_density_op(n);
    oracle::Mat pow = oracle::Mat::Identity(1 << n, 1 << n);
    for (int m = 1; m <= 3; ++m) {
        pow = pow * nop;
        double dense = (psi.adjoint() * pow * psi)(0, 0).real();

        auto e = moment_expansion(m, n);
        double viaterms = 0.0;
        for (const auto& t : e.terms) {
            double corr = 1.0;
            if (!t.support.empty()) {
                std::vector<std::uint32_t> sup(t.support.begin(), t.support.end());
                corr = (psi.adjoint() * oracle::x_product(n, sup) * psi)(0, 0).real();
            }
            viaterms += e.coefficient(t) * corr;
        }
        CHECK(viaterms == doctest::Approx(dense).epsilon(1e-12));
    }
}

TEST_CASE("cumulants of a binomial kink count match closed forms") {
    // k ~ Binomial(N-1, theta), n = k/N:
    //   kappa1 = (N-1) theta / N
    //   kappa2 = (N-1) theta (1-theta) / N^2
    //   kappa3 = (N-1) theta (1-theta) (1-2 theta) / N^3
    const int n = 9;
    const double theta = 0.37;
    std::vector<double> pmf(n, 0.0);
    for (int k = 0; k <= n - 1; ++k) {
        double logp = std::lgamma(n) - std::lgamma(k + 1) - std::lgamma(n - k) +
                      k * std::log(theta) + (n - 1 - k) * std::log(1 - theta);
        pmf[k] = std::exp(logp);
    }
    auto mu = moments_from_kink_pmf(pmf, n);
    auto c = cumulants_from_moments(mu[0], mu[1], mu[2]);
    double k1 = (n - 1) * theta / n;
    double k2 = (n - 1) * theta * (1 - theta) / (n * n);
    double k3 = (n - 1) * theta * (1 - theta) * (1 - 2 * theta) / (n * n * n);
    CHECK(c.kappa1 == doctest::Approx(k1).epsilon(1e-12));
    CHECK(c.kappa2 == doctest::Approx(k2).epsilon(1e-12));
    CHECK(c.kappa3 == doctest::Approx(k3).epsilon(1e-10));
}

TEST_CASE("inconsistent moments are rejected, tiny negatives clamp") {
    CHECK_THROWS_AS(cumulants_from_moments(0.5, 0.2, 0.1), NumericalError);
    auto c = cumulants_from_moments(0.5, 0.25 - 1e-14, 0.125);
    CHECK(c.kappa2 == 0.0);
}

TEST_CASE("moment expansion input validation") {
    CHECK_THROWS_AS(moment_expansion(0, 5), ConfigError);
    CHECK_THROWS_AS(moment_expansion(4, 5), ConfigError);
    CHECK_THROWS_AS(moment_expansion(1, 1), ConfigError);
}
