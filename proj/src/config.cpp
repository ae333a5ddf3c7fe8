#include "opencap/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace opencap::cli {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& ctx) {
    if (!obj.is_object()) throw config_error("config: " + ctx + " must be an object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw config_error("config: unknown key '" + key + "' in " + ctx);
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw config_error(std::string("config: bad value for '") + key + "'");
    }
}

sim::SuiteParams parse_suite(const json& obj, sim::SuiteParams base, const std::string& ctx) {
    check_keys(obj,
               {"gpu_sensitive", "cpu_sensitive", "both_sensitive", "insensitive", "noise_sigma",
                "cpu_phase_fraction"},
               ctx);
    read_field(obj, "gpu_sensitive", base.counts.gpu_sensitive);
    read_field(obj, "cpu_sensitive", base.counts.cpu_sensitive);
    read_field(obj, "both_sensitive", base.counts.both_sensitive);
    read_field(obj, "insensitive", base.counts.insensitive);
    read_field(obj, "noise_sigma", base.noise_sigma);
    read_field(obj, "cpu_phase_fraction", base.cpu_phase_fraction);
    return base;
}

} // namespace

RunConfig RunConfig::defaults() {
    RunConfig cfg;
    cfg.training_suite = sim::default_training_params(cfg.seed);
    cfg.eval_suite = sim::default_evaluation_params(cfg.seed);
    return cfg;
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw config_error(std::string("config: bad json: ") + e.what());
    }
    check_keys(doc,
               {"seed", "out_dir", "gamma", "grid", "training_suite", "eval_suite", "predictor",
                "ncf", "probe", "detector", "max_monitor_s", "repetitions"},
               "top level");
    RunConfig cfg = defaults();
    read_field(doc, "seed", cfg.seed);
    read_field(doc, "out_dir", cfg.out_dir);
    read_field(doc, "gamma", cfg.gamma);
    if (cfg.gamma <= 0 || cfg.gamma >= 1) throw config_error("config: gamma must lie in (0, 1)");

    if (doc.contains("grid")) {
        const auto& g = doc["grid"];
        check_keys(g, {"cpu_caps", "gpu_caps"}, "grid");
        std::vector<int> cpu = cfg.grid.cpu_caps(), gpu = cfg.grid.gpu_caps();
        read_field(g, "cpu_caps", cpu);
        read_field(g, "gpu_caps", gpu);
        try {
            cfg.grid = PowerGrid(cpu, gpu);
        } catch (const std::invalid_argument& e) {
            throw config_error(std::string("config: grid: ") + e.what());
        }
    }

    cfg.training_suite = sim::default_training_params(cfg.seed);
    cfg.eval_suite = sim::default_evaluation_params(cfg.seed);
    if (doc.contains("training_suite"))
        cfg.training_suite = parse_suite(doc["training_suite"], cfg.training_suite, "training_suite");
    if (doc.contains("eval_suite"))
        cfg.eval_suite = parse_suite(doc["eval_suite"], cfg.eval_suite, "eval_suite");

    if (doc.contains("predictor")) {
        const auto& p = doc["predictor"];
        check_keys(p, {"hidden", "lr", "max_epochs", "patience", "val_fraction", "batch_size"},
                   "predictor");
        read_field(p, "hidden", cfg.predictor.hidden);
        read_field(p, "lr", cfg.predictor.lr);
        read_field(p, "max_epochs", cfg.predictor.max_epochs);
        read_field(p, "patience", cfg.predictor.patience);
        read_field(p, "val_fraction", cfg.predictor.val_fraction);
        read_field(p, "batch_size", cfg.predictor.batch_size);
    }
    if (doc.contains("ncf")) {
        const auto& p = doc["ncf"];
        check_keys(p,
                   {"app_dim", "setting_dim", "hidden", "lr", "max_epochs", "patience",
                    "val_fraction", "batch_size"},
                   "ncf");
        read_field(p, "app_dim", cfg.ncf.app_dim);
        read_field(p, "setting_dim", cfg.ncf.setting_dim);
        read_field(p, "hidden", cfg.ncf.hidden);
        read_field(p, "lr", cfg.ncf.lr);
        read_field(p, "max_epochs", cfg.ncf.max_epochs);
        read_field(p, "patience", cfg.ncf.patience);
        read_field(p, "val_fraction", cfg.ncf.val_fraction);
        read_field(p, "batch_size", cfg.ncf.batch_size);
    }
    if (doc.contains("probe")) {
        const auto& p = doc["probe"];
        check_keys(p, {"settings", "probe_duration_s", "reprobe_duration_s"}, "probe");
        read_field(p, "probe_duration_s", cfg.plan.probe_duration_s);
        read_field(p, "reprobe_duration_s", cfg.plan.reprobe_duration_s);
        if (p.contains("settings")) {
            for (const auto& label : p["settings"]) {
                const auto s = parse_setting_label(label.get<std::string>());
                if (!s) throw config_error("config: bad probe setting label");
                cfg.plan.settings.push_back(*s);
            }
        }
    }
    if (doc.contains("detector")) {
        const auto& d = doc["detector"];
        check_keys(d, {"delta_s", "window_s", "threshold_w"}, "detector");
        read_field(d, "delta_s", cfg.detector.delta_s);
        read_field(d, "window_s", cfg.detector.window_s);
        read_field(d, "threshold_w", cfg.detector.p_th_w);
        try {
            cfg.detector.validate();
        } catch (const std::invalid_argument& e) {
            throw config_error(std::string("config: ") + e.what());
        }
    }
    read_field(doc, "max_monitor_s", cfg.max_monitor_s);
    read_field(doc, "repetitions", cfg.repetitions);
    if (cfg.repetitions < 1) throw config_error("config: repetitions must be >= 1");
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw missing_artifact_error("missing config file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return from_json_text(buf.str());
}

policy::ProbePlan RunConfig::effective_plan() const {
    if (plan.settings.empty()) {
        auto p = policy::ProbePlan::default_plan(grid);
        p.probe_duration_s = plan.probe_duration_s;
        p.reprobe_duration_s = plan.reprobe_duration_s;
        return p;
    }
    return plan;
}

policy::OnlineConfig RunConfig::online_config() const {
    policy::OnlineConfig cfg{{grid, gamma}, effective_plan(), detector, ncf, max_monitor_s};
    return cfg;
}

policy::EvalConfig RunConfig::eval_config() const { return {online_config(), repetitions}; }

std::string workload_to_json(const sim::WorkloadSpec& spec) {
    json doc{{"app_id", spec.app_id},
             {"archetype", sim::archetype_name(spec.archetype)},
             {"kappa_c", spec.kappa_c},
             {"alpha_c", spec.alpha_c},
             {"kappa_g", spec.kappa_g},
             {"alpha_g", spec.alpha_g},
             {"base_runtime_s", spec.base_runtime_s},
             {"cpu_phase_s", spec.cpu_phase_s},
             {"noise_sigma", spec.noise_sigma},
             {"counter_scales",
              {{"ips_max", spec.counter_scales.ips_max},
               {"mem_tput_max", spec.counter_scales.mem_tput_max},
               {"sm_clock_max", spec.counter_scales.sm_clock_max}}}};
    return doc.dump(2);
}

sim::WorkloadSpec workload_from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw config_error(std::string("workload spec: bad json: ") + e.what());
    }
    check_keys(doc,
               {"app_id", "archetype", "kappa_c", "alpha_c", "kappa_g", "alpha_g", "base_runtime_s",
                "cpu_phase_s", "noise_sigma", "counter_scales"},
               "workload spec");
    sim::WorkloadSpec spec;
    read_field(doc, "app_id", spec.app_id);
    if (doc.contains("archetype")) spec.archetype = sim::parse_archetype(doc["archetype"].get<std::string>());
    read_field(doc, "kappa_c", spec.kappa_c);
    read_field(doc, "alpha_c", spec.alpha_c);
    read_field(doc, "kappa_g", spec.kappa_g);
    read_field(doc, "alpha_g", spec.alpha_g);
    read_field(doc, "base_runtime_s", spec.base_runtime_s);
    read_field(doc, "cpu_phase_s", spec.cpu_phase_s);
    read_field(doc, "noise_sigma", spec.noise_sigma);
    if (doc.contains("counter_scales")) {
        const auto& cs = doc["counter_scales"];
        check_keys(cs, {"ips_max", "mem_tput_max", "sm_clock_max"}, "counter_scales");
        read_field(cs, "ips_max", spec.counter_scales.ips_max);
        read_field(cs, "mem_tput_max", spec.counter_scales.mem_tput_max);
        read_field(cs, "sm_clock_max", spec.counter_scales.sm_clock_max);
    }
    if (spec.app_id.empty()) throw config_error("workload spec: app_id is required");
    return spec;
}

sim::WorkloadSpec workload_from_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw missing_artifact_error("missing workload spec: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return workload_from_json_text(buf.str());
}

} // namespace opencap::cli
