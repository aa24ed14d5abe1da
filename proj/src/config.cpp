#include "kz/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kz/bits.hpp"
#include "kz/errors.hpp"

namespace kz {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

// Strict key set: a typo must error out, not silently become a default.
void check_keys(const json& o, const char* where, std::initializer_list<const char*> allowed) {
    for (auto it = o.begin(); it != o.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) fail("unknown key \"" + it.key() + "\" in " + where);
    }
}

const json* find(const json& o, const char* key) {
    auto it = o.find(key);
    return it == o.end() ? nullptr : &*it;
}

double as_num(const json& v, const char* what) {
    if (!v.is_number()) fail(std::string(what) + " must be a number");
    return v.get<double>();
}

std::int64_t as_int(const json& v, const char* what) {
    if (!v.is_number_integer()) fail(std::string(what) + " must be an integer");
    return v.get<std::int64_t>();
}

std::uint64_t as_u64(const json& v, const char* what) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
    fail(std::string(what) + " must be a non-negative integer");
}

bool as_bool(const json& v, const char* what) {
    if (!v.is_boolean()) fail(std::string(what) + " must be true or false");
    return v.get<bool>();
}

std::string as_str(const json& v, const char* what) {
    if (!v.is_string()) fail(std::string(what) + " must be a string");
    return v.get<std::string>();
}

std::vector<PlannedPoint> parse_sweep(const json& s) {
    if (!s.is_object()) fail("\"sweep\" must be an object");
    std::vector<PlannedPoint> pts;

    if (const json* p = find(s, "points")) {
        check_keys(s, "sweep", {"points"});
        if (!p->is_array()) fail("sweep.points must be an array");
        for (const auto& e : *p) {
            if (!e.is_object()) fail("sweep.points entries must be objects");
            check_keys(e, "sweep.points[]", {"tau_q", "r"});
            const json* t = find(e, "tau_q");
            const json* r = find(e, "r");
            if (!t || !r) fail("each sweep point needs \"tau_q\" and \"r\"");
            pts.push_back({as_num(*t, "sweep tau_q"),
                           static_cast<int>(as_int(*r, "sweep r"))});
        }
        return pts;
    }

    const json* taus = find(s, "tau_q");
    if (!taus) fail("sweep needs either \"points\" or a \"tau_q\" grid");
    if (!taus->is_array()) fail("sweep.tau_q must be an array");

    std::string rule = "step";
    if (const json* r = find(s, "r_rule")) rule = as_str(*r, "sweep.r_rule");

    if (rule == "step") {
        // one additional Trotter step per data point
        check_keys(s, "sweep", {"tau_q", "r_rule", "r_start"});
        std::int64_t r0 = 1;
        if (const json* v = find(s, "r_start")) r0 = as_int(*v, "sweep.r_start");
        std::int64_t i = 0;
        for (const auto& t : *taus)
            pts.push_back({as_num(t, "sweep.tau_q entry"), static_cast<int>(r0 + i++)});
    } else if (rule == "scaled") {
        // r = max(min_r, ceil(steps_per_time * tau_q)): constant dt across the sweep
        check_keys(s, "sweep", {"tau_q", "r_rule", "steps_per_time", "min_r"});
        const json* c = find(s, "steps_per_time");
        if (!c) fail("sweep rule \"scaled\" needs \"steps_per_time\"");
        double rate = as_num(*c, "sweep.steps_per_time");
        if (!(rate > 0.0)) fail("sweep.steps_per_time must be positive");
        std::int64_t rmin = 1;
        if (const json* v = find(s, "min_r")) rmin = as_int(*v, "sweep.min_r");
        for (const auto& t : *taus) {
            double tq = as_num(t, "sweep.tau_q entry");
            auto r = static_cast<std::int64_t>(std::ceil(rate * tq));
            pts.push_back({tq, static_cast<int>(std::max(rmin, r))});
        }
    } else {
        fail("unknown sweep r_rule \"" + rule + "\": expected \"step\" or \"scaled\"");
    }
    return pts;
}

NoiseModel parse_noise(const json& o) {
    if (!o.is_object()) fail("\"noise\" must be an object");
    check_keys(o, "noise", {"two_qubit_depol", "global_depol", "readout"});
    NoiseModel nm;
    if (const json* v = find(o, "two_qubit_depol")) nm.two_qubit_depol = as_num(*v, "two_qubit_depol");
    if (const json* v = find(o, "global_depol")) nm.global_depol = as_num(*v, "global_depol");
    if (const json* v = find(o, "readout")) {
        if (v->is_object()) {
            check_keys(*v, "noise.readout", {"p01", "p10"});
            const json* a = find(*v, "p01");
            const json* b = find(*v, "p10");
            if (!a || !b) fail("noise.readout needs both \"p01\" and \"p10\"");
            nm.readout.emplace_back(as_num(*a, "readout p01"), as_num(*b, "readout p10"));
        } else if (v->is_array()) {
            for (const auto& e : *v) {
                if (!e.is_array() || e.size() != 2)
                    fail("noise.readout entries must be [p01, p10] pairs");
                nm.readout.emplace_back(as_num(e[0], "readout p01"), as_num(e[1], "readout p10"));
            }
        } else {
            fail("noise.readout must be a {p01, p10} object or an array of pairs");
        }
    }
    return nm;
}

MitigationConfig parse_mitigation(const json& o) {
    if (!o.is_object()) fail("\"mitigation\" must be an object");
    check_keys(o, "mitigation",
               {"enabled", "n_twirls", "gate_twirl", "measurement_twirl", "calibration_shots",
                "reference_shots", "reference", "renorm_stat", "renorm_floor", "weight_scaled"});
    MitigationConfig m;
    if (const json* v = find(o, "enabled")) m.enabled = as_bool(*v, "mitigation.enabled");
    if (const json* v = find(o, "n_twirls"))
        m.n_twirls = static_cast<int>(as_int(*v, "mitigation.n_twirls"));
    if (const json* v = find(o, "gate_twirl")) m.gate_twirl = as_bool(*v, "mitigation.gate_twirl");
    if (const json* v = find(o, "measurement_twirl"))
        m.measurement_twirl = as_bool(*v, "mitigation.measurement_twirl");
    if (const json* v = find(o, "calibration_shots"))
        m.calibration_shots = as_u64(*v, "mitigation.calibration_shots");
    if (const json* v = find(o, "reference_shots"))
        m.reference_shots = as_u64(*v, "mitigation.reference_shots");
    if (const json* v = find(o, "reference")) m.reference = as_str(*v, "mitigation.reference");
    if (const json* v = find(o, "renorm_stat"))
        m.renorm_stat = as_str(*v, "mitigation.renorm_stat");
    if (const json* v = find(o, "renorm_floor"))
        m.renorm_floor = as_num(*v, "mitigation.renorm_floor");
    if (const json* v = find(o, "weight_scaled"))
        m.weight_scaled = as_bool(*v, "mitigation.weight_scaled");
    return m;
}

// default_resample: the posterior-predictive resample defaults to the
// experiment's own shot count; 0 switches to pure reweighting.
PosteriorConfig parse_posterior(const json& o, std::uint64_t default_resample) {
    if (!o.is_object()) fail("\"posterior\" must be an object");
    check_keys(o, "posterior", {"pseudocount", "n_replicas", "resample_size", "ci_level"});
    PosteriorConfig p;
    p.resample_size = default_resample;
    if (const json* v = find(o, "pseudocount")) p.pseudocount = as_num(*v, "posterior.pseudocount");
    if (const json* v = find(o, "n_replicas"))
        p.n_replicas = static_cast<int>(as_int(*v, "posterior.n_replicas"));
    if (const json* v = find(o, "resample_size"))
        p.resample_size = as_u64(*v, "posterior.resample_size");
    if (const json* v = find(o, "ci_level")) p.ci_level = as_num(*v, "posterior.ci_level");
    return p;
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json root = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
    if (root.is_discarded()) fail("config is not valid JSON");
    if (!root.is_object()) fail("config root must be an object");
    check_keys(root, "config",
               {"n_qubits", "backend", "j0", "h0", "sweep", "shots", "noise", "mitigation",
                "posterior", "trunc_tol", "max_bond", "seed", "out", "workers"});

    ExperimentConfig cfg;
    const json* v = find(root, "n_qubits");
    if (!v) fail("config needs \"n_qubits\"");
    cfg.n_qubits = static_cast<int>(as_int(*v, "n_qubits"));

    if ((v = find(root, "backend"))) cfg.backend = as_str(*v, "backend");
    if ((v = find(root, "j0"))) cfg.j0 = as_num(*v, "j0");
    if ((v = find(root, "h0"))) cfg.h0 = as_num(*v, "h0");

    v = find(root, "sweep");
    if (!v) fail("config needs \"sweep\" (use {\"points\": []} for a manifest-only run)");
    cfg.sweep = parse_sweep(*v);

    if ((v = find(root, "shots"))) cfg.shots = as_u64(*v, "shots");
    if ((v = find(root, "noise"))) cfg.noise = parse_noise(*v);
    if ((v = find(root, "mitigation"))) cfg.mitigation = parse_mitigation(*v);
    if ((v = find(root, "posterior"))) cfg.posterior = parse_posterior(*v, cfg.shots);
    if ((v = find(root, "trunc_tol"))) cfg.trunc_tol = as_num(*v, "trunc_tol");
    if ((v = find(root, "max_bond"))) cfg.max_bond = static_cast<long>(as_int(*v, "max_bond"));
    if ((v = find(root, "seed"))) cfg.seed = as_u64(*v, "seed");
    if ((v = find(root, "out"))) cfg.out = as_str(*v, "out");
    if ((v = find(root, "workers"))) cfg.workers = static_cast<int>(as_int(*v, "workers"));

    cfg.validate();
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot read config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void ExperimentConfig::validate() const {
    if (n_qubits < 2) fail("n_qubits must be at least 2 (kinks live on bonds)");
    if (backend != "statevector" && backend != "mps")
        fail("backend must be \"statevector\" or \"mps\", got \"" + backend + "\"");
    if (backend == "statevector" && n_qubits > 24)
        fail("statevector backend supports at most 24 qubits; use backend \"mps\"");
    if (!(j0 > 0.0) || !(h0 > 0.0)) fail("j0 and h0 must be positive");
    for (const auto& p : sweep) {
        if (!(p.tau_q > 0.0)) fail("sweep tau_q values must be positive");
        if (p.r < 1) fail("sweep r values must be at least 1");
    }
    if (shots < 3) fail("shots must be at least 3 (the third cumulant needs three samples)");
    noise.validate(n_qubits);
    if (backend == "mps") {
        if (noise.any_noise())
            fail("the mps backend samples noiselessly; noise channels need \"statevector\"");
        if (mitigation.enabled)
            fail("mitigation runs noisy circuits and needs the \"statevector\" backend");
    }
    if (mitigation.enabled) {
        if (mitigation.n_twirls < 1) fail("mitigation.n_twirls must be at least 1");
        if (mitigation.calibration_shots < 1)
            fail("mitigation.calibration_shots must be at least 1");
        if (mitigation.reference != "zero_field" && mitigation.reference != "pi_field")
            fail("mitigation.reference must be \"zero_field\" or \"pi_field\"");
        if (mitigation.renorm_stat != "mean_bond" && mitigation.renorm_stat != "max_bond")
            fail("mitigation.renorm_stat must be \"mean_bond\" or \"max_bond\"");
        if (!(mitigation.renorm_floor > 0.0 && mitigation.renorm_floor < 1.0))
            fail("mitigation.renorm_floor must lie in (0, 1)");
    }
    if (posterior) {
        if (posterior->n_replicas < 10) fail("posterior.n_replicas must be at least 10");
        if (posterior->pseudocount < 0.0) fail("posterior.pseudocount must be non-negative");
        if (!(posterior->ci_level > 0.0 && posterior->ci_level < 1.0))
            fail("posterior.ci_level must lie in (0, 1)");
    }
    if (!(trunc_tol > 0.0) || trunc_tol > 1e-2) fail("trunc_tol must lie in (0, 1e-2]");
    if (max_bond < 0) fail("max_bond must be non-negative (0 disables the cap)");
    if (out.empty()) fail("output path must not be empty");
    if (workers < 1) fail("workers must be at least 1");
}

std::string canonical_json(const ExperimentConfig& cfg) {
    json j;
    j["n_qubits"] = cfg.n_qubits;
    j["backend"] = cfg.backend;
    j["j0"] = cfg.j0;
    j["h0"] = cfg.h0;
    json sweep = json::array();
    for (const auto& p : cfg.sweep) sweep.push_back({{"tau_q", p.tau_q}, {"r", p.r}});
    j["sweep"] = std::move(sweep);
    j["shots"] = cfg.shots;
    json readout = json::array();
    for (auto [a, b] : cfg.noise.readout) readout.push_back({a, b});
    j["noise"] = {{"two_qubit_depol", cfg.noise.two_qubit_depol},
                  {"global_depol", cfg.noise.global_depol},
                  {"readout", std::move(readout)}};
    j["mitigation"] = {{"enabled", cfg.mitigation.enabled},
                       {"n_twirls", cfg.mitigation.n_twirls},
                       {"gate_twirl", cfg.mitigation.gate_twirl},
                       {"measurement_twirl", cfg.mitigation.measurement_twirl},
                       {"calibration_shots", cfg.mitigation.calibration_shots},
                       {"reference_shots", cfg.mitigation.reference_shots},
                       {"reference", cfg.mitigation.reference},
                       {"renorm_stat", cfg.mitigation.renorm_stat},
                       {"renorm_floor", cfg.mitigation.renorm_floor},
                       {"weight_scaled", cfg.mitigation.weight_scaled}};
    if (cfg.posterior) {
        j["posterior"] = {{"pseudocount", cfg.posterior->pseudocount},
                          {"n_replicas", cfg.posterior->n_replicas},
                          {"resample_size", cfg.posterior->resample_size},
                          {"ci_level", cfg.posterior->ci_level}};
    } else {
        j["posterior"] = nullptr;
    }
    j["trunc_tol"] = cfg.trunc_tol;
    j["max_bond"] = cfg.max_bond;
    j["seed"] = cfg.seed;
    return j.dump(); // nlohmann objects iterate sorted by key
}

std::string config_hash_hex(const ExperimentConfig& cfg) { return fnv1a_hex(canonical_json(cfg)); }

} // namespace kz
