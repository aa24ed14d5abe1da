#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace kz {

// Counter-mode generator built on the splitmix64 finalizer.  Output i of
// stream (seed, id) is finalize(key + i*GAMMA), so any draw is a pure
// function of (seed, id, i): identical sequences on every platform, cheap
// stream splitting (one derive() per shot/replica/twirl), no long-lived
// state to thread through the samplers.  std::mt19937 + std::*_distribution
// would tie outputs to the standard library's distribution internals, which
// differ across implementations; all transforms here are hand-rolled.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : key_(finalize(seed + 0x632be59bd9b4e019ull)) {}

    // Independent stream; safe for any id (distinct ids give unrelated keys).
    Rng derive(std::uint64_t id) const {
        Rng r(0);
        r.key_ = finalize(key_ ^ finalize(id + 0x9e3779b97f4a7c15ull));
        r.ctr_ = 0;
        return r;
    }

    std::uint64_t next() { return finalize(key_ + (++ctr_) * 0x9e3779b97f4a7c15ull); }

    // Uniform on [0,1), 53-bit resolution.
    double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform on (0,1); never returns 0, safe under log().
    double u01_open() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

    // Unbiased integer in [0, bound) via Lemire's multiply-shift rejection.
    std::uint64_t below(std::uint64_t bound) {
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            std::uint64_t t = (-bound) % bound;
            while (lo < t) {
                m = static_cast<unsigned __int128>(next()) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Standard normal, Box-Muller (no spare caching: fixed two draws).
    double normal() {
        double u = u01_open();
        double v = u01();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925287 * v);
    }

    // Gamma(shape, 1), Marsaglia-Tsang squeeze; shape < 1 boosted through
    // Gamma(shape+1) * U^(1/shape).
    double gamma(double shape) {
        if (shape < 1.0) {
            double u = u01_open();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / (3.0 * std::sqrt(d));
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            double u = u01_open();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Dirichlet(alpha) into out (same length).  Degenerate all-underflow
    // case falls back to the uniform vector.
    void dirichlet(std::span<const double> alpha, std::span<double> out) {
        double sum = 0.0;
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            out[i] = gamma(alpha[i]);
            sum += out[i];
        }
        if (sum <= 0.0) {
            double w = 1.0 / static_cast<double>(alpha.size());
            for (auto& x : out) x = w;
            return;
        }
        for (auto& x : out) x /= sum;
    }

  private:
    static std::uint64_t finalize(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

} // namespace kz
