#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "opencap/config.hpp"
#include "opencap/rng.hpp"

namespace fs = std::filesystem;
using namespace opencap;

namespace {

struct GlobalFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<double> gamma;
};

cli::RunConfig load_config(const GlobalFlags& g) {
    auto cfg = g.config_path.empty() ? cli::RunConfig::defaults() : cli::RunConfig::from_file(g.config_path);
    if (g.seed) {
        cfg.seed = *g.seed;
        cfg.training_suite.seed = *g.seed;
        cfg.eval_suite.seed = *g.seed;
    }
    if (g.out_dir) cfg.out_dir = *g.out_dir;
    if (g.gamma) {
        if (*g.gamma <= 0 || *g.gamma >= 1) throw config_error("gamma must lie in (0, 1)");
        cfg.gamma = *g.gamma;
    }
    return cfg;
}

void ensure_out_dir(const cli::RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw config_error("cannot create output directory: " + cfg.out_dir);
}

int cmd_offline(const GlobalFlags& g) {
    const auto cfg = load_config(g);
    ensure_out_dir(cfg);
    const auto suite = sim::make_suite(cfg.training_suite, cfg.grid);
    const auto profiled = pred::profile_suite(suite, cfg.grid, derive_seed(cfg.seed, "offline.profile"));
    auto hyper = cfg.predictor;
    hyper.seed = derive_seed(cfg.seed, "offline.predictor");
    const auto model = pred::train_predictor(profiled.dataset, hyper);
    const auto scores = pred::feature_report(profiled.dataset, 16);

    pred::write_dataset_csv(profiled.dataset, cfg.dataset_path());
    write_matrix_csv(profiled.matrix, cfg.matrix_path());
    pred::save_predictor(model, cfg.predictor_path());
    pred::write_feature_report_csv(scores, cfg.mi_report_path());

    std::cout << "wrote " << cfg.dataset_path() << '\n'
              << "wrote " << cfg.matrix_path() << '\n'
              << "wrote " << cfg.predictor_path() << '\n'
              << "wrote " << cfg.mi_report_path() << '\n';
    return 0;
}

sim::WorkloadSpec pick_app(const cli::RunConfig& cfg, const std::string& app_file, int eval_index) {
    if (!app_file.empty()) {
        auto spec = cli::workload_from_file(app_file);
        sim::validate_spec(spec, cfg.grid);
        return spec;
    }
    const auto suite = sim::make_suite(cfg.eval_suite, cfg.grid);
    if (eval_index < 0 || static_cast<std::size_t>(eval_index) >= suite.size())
        throw config_error("eval index out of range (suite has " + std::to_string(suite.size()) +
                           " workloads)");
    return suite[static_cast<std::size_t>(eval_index)];
}

int cmd_online(const GlobalFlags& g, const std::string& app_file, int eval_index) {
    const auto cfg = load_config(g);
    ensure_out_dir(cfg);
    const auto spec = pick_app(cfg, app_file, eval_index);
    const auto dense = read_matrix_csv_file(cfg.matrix_path());
    const auto predictor = pred::load_predictor(cfg.predictor_path());

    const auto outcome = policy::run_open_online(spec, dense, predictor, cfg.online_config(),
                                                 derive_seed(cfg.seed, "open." + spec.app_id));
    const auto s = outcome.decision.setting;
    std::printf("app %s: selected (%d,%d) pred_saving=%.4f pred_loss=%.4f candidates=%zu\n",
                spec.app_id.c_str(), s.cpu_cap_w, s.gpu_cap_w, outcome.decision.pred_saving,
                outcome.decision.pred_loss, outcome.decision.candidates_considered);
    if (outcome.transition_detected)
        std::printf("phase transition detected at %.1f s; probes re-collected\n",
                    outcome.transition_time_s);

    // completed row as a one-app matrix csv
    PerformanceMatrix row_matrix({spec.app_id}, cfg.grid);
    const auto settings = cfg.grid.settings();
    for (std::size_t j = 0; j < settings.size(); ++j)
        row_matrix.set(spec.app_id, settings[j], outcome.completed_row[j]);
    write_matrix_csv(row_matrix, cfg.out_dir + "/completed_row.csv");

    const auto truth = policy::measure_truth(spec, s, cfg.grid.baseline(), cfg.repetitions,
                                             derive_seed(cfg.seed, "eval." + spec.app_id));
    policy::EvalReport report;
    policy::EvalRow row;
    row.app = spec.app_id;
    row.policy = "open";
    row.gamma = cfg.gamma;
    row.setting = s;
    row.true_perf = truth.norm_perf;
    row.true_loss = 1.0 - truth.norm_perf;
    row.energy_j = truth.energy_j;
    row.avg_power_w = truth.avg_power_w;
    row.efficiency = truth.efficiency;
    row.pred_saving = outcome.decision.pred_saving;
    report.rows.push_back(row);
    policy::write_eval_csv(report, cfg.out_dir + "/online_report.csv");
    std::cout << "wrote " << cfg.out_dir << "/completed_row.csv\n"
              << "wrote " << cfg.out_dir << "/online_report.csv\n";
    return 0;
}

int cmd_evaluate(const GlobalFlags& g) {
    const auto cfg = load_config(g);
    ensure_out_dir(cfg);
    const auto dense = read_matrix_csv_file(cfg.matrix_path());
    const auto predictor = pred::load_predictor(cfg.predictor_path());
    const auto suite = sim::make_suite(cfg.eval_suite, cfg.grid);

    const std::vector<policy::PolicyKind> policies{
        policy::PolicyKind::no_cap, policy::PolicyKind::gpu_cap_only, policy::PolicyKind::cpu_cap_only,
        policy::PolicyKind::oracle, policy::PolicyKind::open};
    const auto report = policy::evaluate_suite(suite, policies, dense, predictor, cfg.eval_config(),
                                               derive_seed(cfg.seed, "evaluate"));

    policy::write_eval_csv(report, cfg.out_dir + "/eval_report.csv");
    {
        std::ofstream f(cfg.out_dir + "/summary.json", std::ios::binary);
        if (!f) throw std::runtime_error("cannot open for writing: " + cfg.out_dir + "/summary.json");
        f << policy::aggregates_json(report);
    }
    {
        std::ofstream f(cfg.out_dir + "/policy_bars.csv", std::ios::binary);
        if (!f) throw std::runtime_error("cannot open for writing: " + cfg.out_dir + "/policy_bars.csv");
        f << "policy,mean_efficiency,mean_true_perf\n";
        for (const auto& a : report.aggregates)
            f << a.policy << ',' << format_double(a.mean_efficiency) << ','
              << format_double(a.mean_true_perf) << '\n';
    }
    for (const auto& a : report.aggregates)
        std::printf("%-13s mean_efficiency=%.4f gain=%+.4f mean_true_loss=%.4f\n", a.policy.c_str(),
                    a.mean_efficiency, a.mean_gain_vs_no_cap, a.mean_true_loss);
    std::cout << "wrote " << cfg.out_dir << "/eval_report.csv\n"
              << "wrote " << cfg.out_dir << "/summary.json\n"
              << "wrote " << cfg.out_dir << "/policy_bars.csv\n";
    return 0;
}

int cmd_detect(const GlobalFlags& g, const std::string& trace_path, std::optional<double> threshold,
               std::optional<double> window, std::optional<double> delta) {
    auto cfg = load_config(g);
    if (threshold) cfg.detector.p_th_w = *threshold;
    if (window) cfg.detector.window_s = *window;
    if (delta) cfg.detector.delta_s = *delta;
    try {
        cfg.detector.validate();
    } catch (const std::invalid_argument& e) {
        throw config_error(e.what());
    }
    const auto trace = sim::read_trace_csv_file(trace_path);
    std::optional<double> t;
    try {
        t = phase::detect_offline(trace, cfg.detector);
    } catch (const std::invalid_argument& e) {
        throw config_error(e.what());
    }
    if (t)
        std::printf("%.1f\n", *t);
    else
        std::printf("none\n");
    return 0;
}

int cmd_mi_report(const GlobalFlags& g, const std::string& dataset_path, int bins) {
    const auto cfg = load_config(g);
    const auto path = dataset_path.empty() ? cfg.dataset_path() : dataset_path;
    const auto data = pred::read_dataset_csv_file(path);
    std::vector<pred::FeatureScore> scores;
    try {
        scores = pred::feature_report(data, bins);
    } catch (const std::invalid_argument& e) {
        throw config_error(e.what());
    }
    ensure_out_dir(cfg);
    pred::write_feature_report_csv(scores, cfg.mi_report_path());
    for (const auto& s : scores) std::printf("%-12s %.4f\n", s.feature_name.c_str(), s.mi);
    std::cout << "wrote " << cfg.mi_report_path() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"coordinated CPU-GPU power cap selection on a simulated node"};
    app.require_subcommand(1);

    GlobalFlags g;
    app.add_option("--config", g.config_path, "JSON config file (defaults apply when absent)");
    std::uint64_t seed_val = 0;
    auto* seed_opt = app.add_option("--seed", seed_val, "override the config seed");
    std::string out_val;
    auto* out_opt = app.add_option("--out", out_val, "override the output directory");
    double gamma_val = 0.0;
    auto* gamma_opt = app.add_option("--gamma", gamma_val, "override the performance loss threshold");

    auto* offline = app.add_subcommand("offline", "profile the training suite and train the predictor");
    std::string app_file;
    int eval_index = 0;
    auto* online = app.add_subcommand("online", "probe one unseen workload and select caps");
    online->add_option("--app", app_file, "workload spec JSON file");
    online->add_option("--eval-index", eval_index, "pick a workload from the evaluation suite");
    auto* evaluate = app.add_subcommand("evaluate", "compare all five policies on the evaluation suite");
    std::string trace_path;
    std::optional<double> det_threshold, det_window, det_delta;
    auto* detect = app.add_subcommand("detect", "run phase-transition detection over a trace CSV");
    detect->add_option("--trace", trace_path, "trace CSV file")->required();
    detect->add_option("--threshold", det_threshold, "GPU power threshold in watts");
    detect->add_option("--window", det_window, "window length in seconds");
    detect->add_option("--delta", det_delta, "sampling interval in seconds");
    std::string dataset_path;
    int mi_bins = 16;
    auto* mi = app.add_subcommand("mi-report", "mutual information of counters vs performance");
    mi->add_option("--dataset", dataset_path, "dataset CSV (defaults to the offline artifact)");
    mi->add_option("--bins", mi_bins, "histogram bins per axis");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (*seed_opt) g.seed = seed_val;
    if (*out_opt) g.out_dir = out_val;
    if (*gamma_opt) g.gamma = gamma_val;

    try {
        if (offline->parsed()) return cmd_offline(g);
        if (online->parsed()) return cmd_online(g, app_file, eval_index);
        if (evaluate->parsed()) return cmd_evaluate(g);
        if (detect->parsed()) return cmd_detect(g, trace_path, det_threshold, det_window, det_delta);
        if (mi->parsed()) return cmd_mi_report(g, dataset_path, mi_bins);
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const missing_artifact_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
    return 1;
}
