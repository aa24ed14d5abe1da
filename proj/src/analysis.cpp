#include "kz/analysis.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "kz/bits.hpp"
#include "kz/errors.hpp"
#include "kz/rng.hpp"

namespace kz {

namespace {

struct MomentStats {
    std::array<double, 3> mu{};
    double cov[3][3] = {}; // covariance of the means
    double n = 0.0;
};

// kappa and delta-method stderrs from raw-moment means.  `kstat` applies
// the unbiased k-statistic factors to kappa2/kappa3.
CumulantSet cumulants_with_delta(const MomentStats& st, bool kstat) {
    const double m1 = st.mu[0], m2c = st.mu[1] - m1 * m1;
    const double m3c = st.mu[2] - 3.0 * m1 * st.mu[1] + 2.0 * m1 * m1 * m1;

    CumulantSet out;
    out.kappa1 = m1;
    if (kstat) {
        const double n = st.n;
        out.kappa2 = m2c * n / (n - 1.0);
        out.kappa3 = m3c * n * n / ((n - 1.0) * (n - 2.0));
        out.estimator = "unbiased";
    } else {
        out.kappa2 = m2c;
        out.kappa3 = m3c;
        out.estimator = "plugin";
    }

    auto quad = [&](const double g[3]) {
        double v = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) v += g[i] * st.cov[i][j] * g[j];
        return std::sqrt(std::max(0.0, v));
    };
    const double g1[3] = {1.0, 0.0, 0.0};
    const double g2[3] = {-2.0 * m1, 1.0, 0.0};
    const double g3[3] = {6.0 * m1 * m1 - 3.0 * st.mu[1], -3.0 * m1, 1.0};
    out.stderr1 = quad(g1);
    out.stderr2 = quad(g2);
    out.stderr3 = quad(g3);
    return out;
}

MomentStats batch_moment_stats(const BitstringBatch& batch) {
    const double n = static_cast<double>(batch.n_shots());
    const double nd = static_cast<double>(batch.n_qubits);

    std::map<std::int32_t, std::size_t> slots;
    for (std::size_t s = 0; s < batch.n_shots(); ++s) slots.emplace(batch.twirl_id[s], slots.size());
    const std::size_t m_groups = slots.size();

    std::array<double, 3> s1{};
    double s2[3][3] = {};
    std::vector<std::array<double, 3>> tg(m_groups, {0.0, 0.0, 0.0});
    std::vector<double> ng(m_groups, 0.0);
    for (std::size_t s = 0; s < batch.n_shots(); ++s) {
        double x = static_cast<double>(kink_count(batch.shot(s), batch.n_qubits)) / nd;
        double y[3] = {x, x * x, x * x * x};
        std::size_t g = slots.at(batch.twirl_id[s]);
        ng[g] += 1.0;
        for (int i = 0; i < 3; ++i) {
            s1[static_cast<std::size_t>(i)] += y[i];
            tg[g][static_cast<std::size_t>(i)] += y[i];
            for (int j = i; j < 3; ++j) s2[i][j] += y[i] * y[j];
        }
    }

    MomentStats st;
    st.n = n;
    for (int i = 0; i < 3; ++i) st.mu[static_cast<std::size_t>(i)] = s1[static_cast<std::size_t>(i)] / n;
    if (m_groups >= 2) {
        const double md = static_cast<double>(m_groups);
        for (std::size_t g = 0; g < m_groups; ++g)
            for (int i = 0; i < 3; ++i)
                for (int j = i; j < 3; ++j)
                    st.cov[i][j] += (tg[g][static_cast<std::size_t>(i)] -
                                     ng[g] * st.mu[static_cast<std::size_t>(i)]) *
                                    (tg[g][static_cast<std::size_t>(j)] -
                                     ng[g] * st.mu[static_cast<std::size_t>(j)]);
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j)
                st.cov[j][i] = st.cov[i][j] = st.cov[i][j] * md / (md - 1.0) / (n * n);
    } else {
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) {
                double c = (s2[i][j] - n * st.mu[static_cast<std::size_t>(i)] *
                                           st.mu[static_cast<std::size_t>(j)]) /
                           (n - 1.0);
                st.cov[i][j] = st.cov[j][i] = c / n;
            }
    }
    return st;
}

// equal-tailed percentile with linear interpolation between order statistics
Interval percentile_interval(std::vector<double>& v, double level) {
    std::sort(v.begin(), v.end());
    auto at = [&](double p) {
        double idx = p * static_cast<double>(v.size() - 1);
        std::size_t lo = static_cast<std::size_t>(idx);
        double frac = idx - static_cast<double>(lo);
        if (lo + 1 >= v.size()) return v.back();
        return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
    };
    double a = (1.0 - level) / 2.0;
    return {at(a), at(1.0 - a)};
}

void validate_posterior_config(const PosteriorConfig& cfg) {
    if (cfg.n_replicas < 10) throw ConfigError("need at least 10 posterior replicas");
    if (!(cfg.pseudocount >= 0.0)) throw ConfigError("pseudocount must be non-negative");
    if (!(cfg.ci_level > 0.0 && cfg.ci_level < 1.0))
        throw ConfigError("ci_level must lie in (0, 1)");
}

// one multinomial draw via binary search in the weight CDF
void multinomial_counts(Rng& rng, const std::vector<double>& cdf, std::uint64_t draws,
                        std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    const double total = cdf.back();
    for (std::uint64_t d = 0; d < draws; ++d) {
        double u = rng.u01() * total;
        std::size_t j = static_cast<std::size_t>(
            std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        if (j >= out.size()) j = out.size() - 1;
        out[j] += 1.0;
    }
}

// Shared replica engine: categories with base counts and a per-category
// moment triple; returns the three replica series.
struct ReplicaSeries {
    std::vector<double> k1, k2, k3;
};

ReplicaSeries run_replicas(const std::vector<std::array<double, 3>>& values,
                           const std::vector<double>& counts, const PosteriorConfig& cfg,
                           bool kstat_on_resample) {
    const std::size_t K = values.size();
    std::vector<double> alpha(K), w(K), synth(K), cdf(K);
    for (std::size_t j = 0; j < K; ++j) alpha[j] = counts[j] + cfg.pseudocount;

    ReplicaSeries out;
    out.k1.reserve(static_cast<std::size_t>(cfg.n_replicas));
    out.k2.reserve(static_cast<std::size_t>(cfg.n_replicas));
    out.k3.reserve(static_cast<std::size_t>(cfg.n_replicas));

    Rng root(cfg.seed);
    for (int r = 0; r < cfg.n_replicas; ++r) {
        Rng rng = root.derive(static_cast<std::uint64_t>(r));
        rng.dirichlet(alpha, w);

        const std::vector<double>* weights = &w;
        double n_eff = 0.0;
        if (cfg.resample_size > 0) {
            double acc = 0.0;
            for (std::size_t j = 0; j < K; ++j) cdf[j] = (acc += w[j]);
            multinomial_counts(rng, cdf, cfg.resample_size, synth);
            weights = &synth;
            n_eff = static_cast<double>(cfg.resample_size);
        }

        double tot = 0.0;
        std::array<double, 3> mu{};
        for (std::size_t j = 0; j < K; ++j) {
            double wj = (*weights)[j];
            tot += wj;
            for (int m = 0; m < 3; ++m)
                mu[static_cast<std::size_t>(m)] += wj * values[j][static_cast<std::size_t>(m)];
        }
        for (auto& m : mu) m /= tot;

        const double m1 = mu[0];
        double c2 = mu[1] - m1 * m1;
        double c3 = mu[2] - 3.0 * m1 * mu[1] + 2.0 * m1 * m1 * m1;
        if (cfg.resample_size > 0 && kstat_on_resample && n_eff > 2.0) {
            c2 *= n_eff / (n_eff - 1.0);
            c3 *= n_eff * n_eff / ((n_eff - 1.0) * (n_eff - 2.0));
        }
        out.k1.push_back(m1);
        out.k2.push_back(c2);
        out.k3.push_back(c3);
    }
    return out;
}

std::array<double, 3> kink_triple(const std::uint64_t* bits, int n_qubits) {
    double x = static_cast<double>(kink_count(bits, n_qubits)) / static_cast<double>(n_qubits);
    return {x, x * x, x * x * x};
}

} // namespace

CumulantSet estimate_cumulants(const BitstringBatch& batch) {
    if (batch.basis != 'X')
        throw ConfigError("kink cumulants need X-basis batches (got basis '" +
                          std::string(1, batch.basis) + "')");
    if (batch.n_shots() < 3) throw ConfigError("need at least three shots");
    return cumulants_with_delta(batch_moment_stats(batch), true);
}

CumulantSet estimate_cumulants_from_counts(const CountsMap& counts, int n_qubits) {
    if (n_qubits < 2) throw ConfigError("need at least two qubits");
    MomentStats st;
    double s2[3][3] = {};
    for (const auto& [bits, c] : counts) {
        if (static_cast<int>(bits.size()) != words_for(n_qubits))
            throw ConfigError("counts key width does not match the qubit count");
        auto y = kink_triple(bits.data(), n_qubits);
        double w = static_cast<double>(c);
        st.n += w;
        for (int i = 0; i < 3; ++i) {
            st.mu[static_cast<std::size_t>(i)] += w * y[static_cast<std::size_t>(i)];
            for (int j = i; j < 3; ++j)
                s2[i][j] += w * y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)];
        }
    }
    if (st.n < 3.0) throw ConfigError("need at least three counted shots");
    for (auto& m : st.mu) m /= st.n;
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) {
            double c = (s2[i][j] - st.n * st.mu[static_cast<std::size_t>(i)] *
                                       st.mu[static_cast<std::size_t>(j)]) /
                       (st.n - 1.0);
            st.cov[i][j] = st.cov[j][i] = c / st.n;
        }
    return cumulants_with_delta(st, true);
}

CumulantSet bayesian_intervals(const BitstringBatch& batch, const PosteriorConfig& cfg) {
    validate_posterior_config(cfg);
    CumulantSet point = estimate_cumulants(batch);

    auto counts = counts_from_batch(batch);
    std::vector<std::array<double, 3>> values;
    std::vector<double> weights;
    values.reserve(counts.size());
    weights.reserve(counts.size());
    for (const auto& [bits, c] : counts) {
        values.push_back(kink_triple(bits.data(), batch.n_qubits));
        weights.push_back(static_cast<double>(c));
    }

    auto series = run_replicas(values, weights, cfg, true);
    point.ci1 = percentile_interval(series.k1, cfg.ci_level);
    point.ci2 = percentile_interval(series.k2, cfg.ci_level);
    point.ci3 = percentile_interval(series.k3, cfg.ci_level);
    return point;
}

MitigationResult bayesian_intervals(const BitstringBatch& batch, const ConfusionMatrix& cal,
                                    const RenormFactor& renorm,
                                    const MitigationSettings& settings,
                                    const PosteriorConfig& cfg) {
    validate_posterior_config(cfg);
    MitigationResult point = mitigate_cumulants(batch, cal, renorm, settings);

    CorrectedMoments cm(batch.n_qubits, cal, renorm, settings);
    auto counts = counts_from_batch(batch);
    std::vector<std::array<double, 3>> values;
    std::vector<double> weights;
    values.reserve(counts.size());
    weights.reserve(counts.size());
    for (const auto& [bits, c] : counts) {
        values.push_back(cm.eval(bits.data()));
        weights.push_back(static_cast<double>(c));
    }

    auto series = run_replicas(values, weights, cfg, false);
    point.cumulants.ci1 = percentile_interval(series.k1, cfg.ci_level);
    point.cumulants.ci2 = percentile_interval(series.k2, cfg.ci_level);
    point.cumulants.ci3 = percentile_interval(series.k3, cfg.ci_level);
    return point;
}

FitResult fit_decay(const std::vector<SweepPoint>& points, int which, double window_lo,
                    std::optional<double> window_hi) {
    if (which < 1 || which > 3) throw ConfigError("fit target must be cumulant 1, 2, or 3");
    if (points.size() < 2) throw ConfigError("need at least two sweep points");
    std::vector<SweepPoint> pts = points;
    std::sort(pts.begin(), pts.end(),
              [](const SweepPoint& a, const SweepPoint& b) { return a.tau_q < b.tau_q; });
    const int nq = pts.front().n_qubits;
    for (const auto& p : pts) {
        if (!(p.tau_q > 0.0)) throw ConfigError("quench times must be positive");
        if (p.n_qubits != nq) throw ConfigError("sweep points mix different chain lengths");
    }

    FitResult res;

    // freeze-out: first log-log crossing of kappa1 through 1/N
    const double thr = 1.0 / static_cast<double>(nq);
    double tau_f = 0.0;
    bool crossed = false;
    if (pts.front().cumulants.kappa1 < thr)
        throw NumericalError("kappa1 starts below 1/N: freeze-out precedes the sweep");
    for (std::size_t i = 0; i + 1 < pts.size() && !crossed; ++i) {
        double a = pts[i].cumulants.kappa1, b = pts[i + 1].cumulants.kappa1;
        if (a >= thr && b < thr && b > 0.0) {
            double lt = std::log(pts[i].tau_q) + (std::log(thr) - std::log(a)) *
                                                     (std::log(pts[i + 1].tau_q) -
                                                      std::log(pts[i].tau_q)) /
                                                     (std::log(b) - std::log(a));
            tau_f = std::exp(lt);
            crossed = true;
        }
    }
    if (!crossed) tau_f = pts.back().tau_q; // saturation not reached: use everything
    res.tau_f = tau_f;

    const double hi = window_hi ? *window_hi : tau_f;
    res.window = {window_lo, hi};

    std::vector<double> xs, ys;
    for (const auto& p : pts) {
        if (p.tau_q < window_lo - 1e-12 || p.tau_q > hi + 1e-12) continue;
        double kappa = which == 1   ? p.cumulants.kappa1
                       : which == 2 ? p.cumulants.kappa2
                                    : p.cumulants.kappa3;
        if (!(kappa > 0.0)) continue; // clamped or negative: no slope information
        xs.push_back(std::log(p.tau_q));
        ys.push_back(std::log(kappa));
    }
    res.n_points = static_cast<int>(xs.size());
    if (xs.size() < 3) throw ConfigError("fewer than three usable points in the fit window");

    const double n = static_cast<double>(xs.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx <= 0.0) throw ConfigError("fit window collapses to a single tau");
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double r = ys[i] - (intercept + slope * xs[i]);
        rss += r * r;
    }
    const double s2 = rss / (n - 2.0);
    res.exponent = slope;
    res.exponent_se = std::sqrt(s2 / sxx);
    res.amplitude = std::exp(intercept);
    res.amplitude_se = res.amplitude * std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
    res.r2 = syy > 0.0 ? 1.0 - rss / syy : 1.0;
    res.residual_rms = std::sqrt(rss / n);
    return res;
}

MaxEntSolution maxent_pmf(int n_qubits, const std::array<double, 3>& moments, double residual_tol,
                          int max_iter) {
    if (n_qubits < 4) throw ConfigError("maxent reconstruction needs at least 4 qubits");
    if (!(residual_tol > 0.0)) throw ConfigError("residual tolerance must be positive");
    const int K = n_qubits; // kink counts 0 .. N-1
    const double nd = static_cast<double>(n_qubits);
    const double x_max = static_cast<double>(K - 1) / nd;

    for (double m : moments)
        if (!std::isfinite(m)) throw NumericalError("non-finite moment");
    const double mu1 = moments[0];
    const double var = moments[1] - mu1 * mu1;
    if (mu1 < 0.0 || mu1 > x_max)
        throw NumericalError("mean kink density outside the reachable range [0, " +
                             std::to_string(x_max) + "]");
    if (var < -1e-12) throw NumericalError("moment vector has negative variance");

    std::vector<double> x(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) x[static_cast<std::size_t>(k)] = static_cast<double>(k) / nd;

    // boundary deltas: all mass pinned at an endpoint
    auto delta_solution = [&](int k) {
        MaxEntSolution s;
        s.pmf.assign(static_cast<std::size_t>(K), 0.0);
        s.pmf[static_cast<std::size_t>(k)] = 1.0;
        double xv = x[static_cast<std::size_t>(k)];
        s.residuals = {std::abs(xv - moments[0]), std::abs(xv * xv - moments[1]),
                       std::abs(xv * xv * xv - moments[2])};
        s.max_residual = std::max({s.residuals[0], s.residuals[1], s.residuals[2]});
        if (s.max_residual > residual_tol)
            throw NumericalError("moments pin the density to a boundary point but are "
                                 "inconsistent with it");
        return s;
    };
    if (mu1 == 0.0) return delta_solution(0);
    if (mu1 == x_max) return delta_solution(K - 1);

    Eigen::Vector3d lam = Eigen::Vector3d::Zero();
    Eigen::Vector3d muv(moments[0], moments[1], moments[2]);

    std::vector<double> logp(static_cast<std::size_t>(K)), p(static_cast<std::size_t>(K));
    auto dual = [&](const Eigen::Vector3d& l, Eigen::Vector3d* grad,
                    Eigen::Matrix3d* hess) {
        double mx = -1e300;
        for (int k = 0; k < K; ++k) {
            double xv = x[static_cast<std::size_t>(k)];
            double e = l(0) * xv + l(1) * xv * xv + l(2) * xv * xv * xv;
            logp[static_cast<std::size_t>(k)] = e;
            mx = std::max(mx, e);
        }
        double z = 0.0;
        for (int k = 0; k < K; ++k)
            z += (p[static_cast<std::size_t>(k)] = std::exp(logp[static_cast<std::size_t>(k)] - mx));
        double psi = mx + std::log(z) - l.dot(muv);
        if (grad) {
            Eigen::Vector3d e1 = Eigen::Vector3d::Zero();
            Eigen::Matrix3d e2 = Eigen::Matrix3d::Zero();
            for (int k = 0; k < K; ++k) {
                double w = p[static_cast<std::size_t>(k)] / z;
                double xv = x[static_cast<std::size_t>(k)];
                Eigen::Vector3d phi(xv, xv * xv, xv * xv * xv);
                e1 += w * phi;
                if (hess) e2 += w * phi * phi.transpose();
            }
            *grad = e1 - muv;
            if (hess) *hess = e2 - e1 * e1.transpose();
        }
        return psi;
    };

    MaxEntSolution sol;
    Eigen::Vector3d grad;
    Eigen::Matrix3d hess;
    double psi = dual(lam, &grad, &hess);
    int it = 0;
    for (; it < max_iter; ++it) {
        if (grad.cwiseAbs().maxCoeff() <= residual_tol) break;
        Eigen::Matrix3d h = hess;
        Eigen::Vector3d step = -h.ldlt().solve(grad);
        if (!step.allFinite() || grad.dot(step) >= 0.0) {
            h += Eigen::Matrix3d::Identity() * (1e-10 + 1e-6 * hess.trace());
            step = -h.ldlt().solve(grad);
            if (!step.allFinite()) throw NumericalError("maxent Hessian is degenerate");
        }
        // Armijo backtracking on the convex dual
        double t = 1.0;
        const double slope = grad.dot(step);
        while (t > 1e-12) {
            double cand = dual(lam + t * step, nullptr, nullptr);
            if (cand <= psi + 0.25 * t * slope) break;
            t *= 0.5;
        }
        if (t <= 1e-12)
            throw NumericalError("maxent line search stalled: moments at or outside the "
                                 "boundary of the feasible set");
        lam += t * step;
        psi = dual(lam, &grad, &hess);
    }
    if (grad.cwiseAbs().maxCoeff() > residual_tol)
        throw NumericalError("maxent did not reach the residual target (" +
                             std::to_string(grad.cwiseAbs().maxCoeff()) + " after " +
                             std::to_string(it) + " iterations)");

    double z = 0.0;
    for (double v : p) z += v;
    sol.pmf.resize(static_cast<std::size_t>(K));
    sol.entropy = 0.0;
    for (int k = 0; k < K; ++k) {
        double w = p[static_cast<std::size_t>(k)] / z;
        sol.pmf[static_cast<std::size_t>(k)] = w;
        if (w > 0.0) sol.entropy -= w * std::log(w);
    }
    sol.lambda = {lam(0), lam(1), lam(2)};
    sol.iterations = it;
    sol.residuals = {std::abs(grad(0)), std::abs(grad(1)), std::abs(grad(2))};
    sol.max_residual = grad.cwiseAbs().maxCoeff();
    return sol;
}

} // namespace kz
