#include "kz/sweep.hpp"

#include <atomic>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "kz/analysis.hpp"
#include "kz/batch.hpp"
#include "kz/circuit.hpp"
#include "kz/errors.hpp"
#include "kz/mitigation.hpp"
#include "kz/mps.hpp"
#include "kz/rng.hpp"
#include "kz/statevector.hpp"
#include "kz/version.hpp"

namespace kz {

namespace {

using nlohmann::json;

json interval_json(const std::optional<Interval>& iv) {
    if (!iv) return nullptr;
    return json::array({iv->lo, iv->hi});
}

void fill_cumulants(json& rec, const CumulantSet& c) {
    rec["estimator"] = c.estimator;
    rec["kappa"] = {c.kappa1, c.kappa2, c.kappa3};
    rec["stderr"] = {c.stderr1, c.stderr2, c.stderr3};
    if (c.ci1 || c.ci2 || c.ci3)
        rec["ci"] = {interval_json(c.ci1), interval_json(c.ci2), interval_json(c.ci3)};
}

// Pool `total` shots over independently twirled copies of `base`; shot
// batches keep their twirl_id so the estimators can cluster on it.
BitstringBatch run_twirled(const Circuit& base, const ExperimentConfig& cfg, std::uint64_t total,
                           std::uint64_t twirl_seed, std::uint64_t run_seed) {
    TwirlOptions topt;
    topt.gate_twirl = cfg.mitigation.gate_twirl;
    topt.measurement_twirl = cfg.mitigation.measurement_twirl;
    auto tws = twirl_circuit(base, cfg.mitigation.n_twirls, twirl_seed, topt);
    auto split = split_shots(total, tws.size());
    Rng seeds(run_seed);
    BitstringBatch pooled;
    pooled.n_qubits = base.n_qubits;
    pooled.basis = base.measure_basis;
    pooled.words_per_shot = words_for(base.n_qubits);
    pooled.reserve(total);
    for (std::size_t i = 0; i < tws.size(); ++i)
        pooled.append(run_noisy(tws[i], cfg.noise, split[i], seeds.next()));
    return pooled;
}

// One sweep point -> one finished record.  Every random choice derives from
// the per-point stream, so points are order- and thread-independent.
json run_point(const ExperimentConfig& cfg, std::size_t idx, const std::string& cfg_hash) {
    const PlannedPoint& pt = cfg.sweep[idx];
    Rng stream = Rng(cfg.seed).derive(idx);
    const std::uint64_t twirl_seed = stream.next();
    const std::uint64_t main_seed = stream.next();
    const std::uint64_t ref_twirl_seed = stream.next();
    const std::uint64_t ref_seed = stream.next();
    const std::uint64_t cal_seed = stream.next();
    const std::uint64_t posterior_seed = stream.next();

    json rec;
    rec["schema"] = 1;
    rec["point"] = idx;
    rec["tau_q"] = pt.tau_q;
    rec["r"] = pt.r;
    rec["n_qubits"] = cfg.n_qubits;
    rec["backend"] = cfg.backend;
    rec["shots"] = cfg.shots;
    rec["seed"] = cfg.seed;
    rec["config_hash"] = cfg_hash;

    const QuenchSchedule sched{pt.tau_q, cfg.j0, cfg.h0};
    const Circuit base = build_quench_circuit(sched, {pt.r, pt.tau_q}, cfg.n_qubits);
    rec["circuit_hash"] = circuit_hash_hex(base);

    PosteriorConfig pcfg;
    if (cfg.posterior) {
        pcfg = *cfg.posterior;
        pcfg.seed = posterior_seed;
    }

    if (cfg.backend == "mps") {
        MPSState::Options opt;
        opt.trunc_tol = cfg.trunc_tol;
        opt.max_bond = cfg.max_bond;
        MPSState st = MPSState::product_zero(cfg.n_qubits, opt);
        st.evolve_circuit(base);
        BitstringBatch batch = st.sample(cfg.shots, main_seed, 'X');
        fill_cumulants(rec, cfg.posterior ? bayesian_intervals(batch, pcfg)
                                          : estimate_cumulants(batch));
        rec["mps"] = {{"max_bond", st.max_bond_reached()},
                      {"discarded_weight", st.discarded_weight()}};
        return rec;
    }

    if (!cfg.mitigation.enabled) {
        BitstringBatch batch = run_noisy(base, cfg.noise, cfg.shots, main_seed);
        fill_cumulants(rec, cfg.posterior ? bayesian_intervals(batch, pcfg)
                                          : estimate_cumulants(batch));
        return rec;
    }

    BitstringBatch batch = run_twirled(base, cfg, cfg.shots, twirl_seed, main_seed);
    ConfusionMatrix cal =
        calibrate_readout(cfg.n_qubits, cfg.noise, cfg.mitigation.calibration_shots, cal_seed);

    const auto variant = cfg.mitigation.reference == "pi_field" ? ReferenceVariant::pi_field
                                                                : ReferenceVariant::zero_field;
    const Circuit ref = build_reference_circuit(base, variant);
    const std::uint64_t ref_shots =
        cfg.mitigation.reference_shots ? cfg.mitigation.reference_shots : cfg.shots;
    BitstringBatch ref_batch = run_twirled(ref, cfg, ref_shots, ref_twirl_seed, ref_seed);

    const bool symmetric = cfg.mitigation.measurement_twirl;
    const auto stat = cfg.mitigation.renorm_stat == "max_bond" ? RenormStat::max_bond
                                                               : RenormStat::mean_bond;
    RenormFactor rf =
        estimate_renorm(ref_batch, cal, symmetric, stat, cfg.mitigation.renorm_floor);

    MitigationSettings settings;
    settings.symmetric_readout = symmetric;
    settings.weight_scaled = cfg.mitigation.weight_scaled;
    MitigationResult res = cfg.posterior ? bayesian_intervals(batch, cal, rf, settings, pcfg)
                                         : mitigate_cumulants(batch, cal, rf, settings);
    fill_cumulants(rec, res.cumulants);

    json p01 = json::array(), p10 = json::array();
    for (int q = 0; q < cal.n_qubits(); ++q) {
        p01.push_back(cal.p01(q));
        p10.push_back(cal.p10(q));
    }
    rec["mitigation"] = {{"renorm", rf.factor},
                         {"renorm_se", rf.se},
                         {"renorm_stat", cfg.mitigation.renorm_stat},
                         {"n_twirls", cfg.mitigation.n_twirls},
                         {"reference", cfg.mitigation.reference},
                         {"reference_hash", circuit_hash_hex(ref)},
                         {"reference_shots", ref_shots},
                         {"calibration", {{"shots_per_state", cal.shots_per_state},
                                          {"p01", std::move(p01)},
                                          {"p10", std::move(p10)}}}};
    return rec;
}

std::string point_line(const ExperimentConfig& cfg, std::size_t idx, const std::string& cfg_hash,
                       bool* failed) {
    json rec;
    *failed = false;
    try {
        rec = run_point(cfg, idx, cfg_hash);
    } catch (const std::exception& e) {
        *failed = true;
        const char* kind = "internal";
        if (dynamic_cast<const ConfigError*>(&e)) kind = "config";
        else if (dynamic_cast<const ResourceError*>(&e)) kind = "resource";
        else if (dynamic_cast<const NumericalError*>(&e)) kind = "numerical";
        rec = {{"schema", 1},
               {"point", idx},
               {"tau_q", cfg.sweep[idx].tau_q},
               {"r", cfg.sweep[idx].r},
               {"n_qubits", cfg.n_qubits},
               {"backend", cfg.backend},
               {"seed", cfg.seed},
               {"config_hash", cfg_hash},
               {"error", std::string(e.what())},
               {"error_kind", kind}};
    }
    return rec.dump() + "\n";
}

std::string iso8601_utc(std::time_t t) {
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

SweepOutcome run_sweep(const ExperimentConfig& cfg, std::ostream* log) {
    cfg.validate();
    const std::string cfg_hash = config_hash_hex(cfg);
    const std::size_t n = cfg.sweep.size();
    const std::time_t started = std::time(nullptr);

    auto parent = std::filesystem::path(cfg.out).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(cfg.out, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open output file: " + cfg.out);

    std::vector<std::string> lines(n);
    std::vector<char> ready(n, 0), failed(n, 0);
    std::atomic<std::size_t> cursor{0};
    std::mutex mu;
    std::size_t flushed = 0;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= n) return;
            bool bad = false;
            std::string line = point_line(cfg, i, cfg_hash, &bad);
            std::lock_guard<std::mutex> lk(mu);
            lines[i] = std::move(line);
            ready[i] = 1;
            failed[i] = bad ? 1 : 0;
            while (flushed < n && ready[flushed]) {
                out << lines[flushed];
                lines[flushed].clear();
                ++flushed;
            }
            out.flush();
            if (log)
                *log << (bad ? "FAIL  " : "done  ") << "point " << i << "  tau_q "
                     << cfg.sweep[i].tau_q << "  r " << cfg.sweep[i].r << "\n";
        }
    };

    const int nw = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.workers),
                                                          n ? n : 1));
    if (nw <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nw));
        for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    out.close();
    if (!out) throw ConfigError("failed writing results to: " + cfg.out);

    SweepOutcome oc;
    oc.n_points = static_cast<int>(n);
    for (char f : failed) oc.n_failed += f;
    oc.results_path = cfg.out;
    oc.manifest_path = cfg.out + ".manifest.json";

    json manifest;
    manifest["schema"] = 1;
    manifest["kind"] = "kz-sweep-manifest";
    manifest["config_hash"] = cfg_hash;
    manifest["seed"] = cfg.seed;
    manifest["n_points"] = oc.n_points;
    manifest["n_failed"] = oc.n_failed;
    manifest["results"] = cfg.out;
    manifest["versions"] = {
        {"kzsim", version},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                      "." + std::to_string(EIGEN_MINOR_VERSION)},
        {"compiler", __VERSION__}};
    manifest["started"] = iso8601_utc(started);
    manifest["finished"] = iso8601_utc(std::time(nullptr));
    manifest["config"] = json::parse(canonical_json(cfg));
    std::ofstream mf(oc.manifest_path, std::ios::binary | std::ios::trunc);
    if (!mf) throw ConfigError("cannot open manifest file: " + oc.manifest_path);
    mf << manifest.dump(2) << "\n";
    mf.close();
    if (!mf) throw ConfigError("failed writing manifest to: " + oc.manifest_path);
    return oc;
}

} // namespace kz
