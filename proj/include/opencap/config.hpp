#pragma once

#include <cstdint>
#include <string>

#include "opencap/cfcomplete.hpp"
#include "opencap/core.hpp"
#include "opencap/phasedet.hpp"
#include "opencap/policy.hpp"
#include "opencap/predictor.hpp"
#include "opencap/simnode.hpp"

namespace opencap::cli {

// Single JSON config driving every subcommand. Every field has a default;
// unknown keys are rejected.
struct RunConfig {
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    double gamma = 0.05;
    PowerGrid grid = PowerGrid::default_grid();
    sim::SuiteParams training_suite;
    sim::SuiteParams eval_suite;
    pred::PredictorHyper predictor;
    cf::NcfHyper ncf;
    policy::ProbePlan plan; // empty settings list means the default grid plan
    phase::DetectorConfig detector;
    double max_monitor_s = 120.0;
    int repetitions = 5;

    static RunConfig defaults();
    static RunConfig from_json_text(const std::string& text);
    static RunConfig from_file(const std::string& path);

    policy::ProbePlan effective_plan() const;
    policy::OnlineConfig online_config() const;
    policy::EvalConfig eval_config() const;

    // offline artifact locations under out_dir
    std::string dataset_path() const { return out_dir + "/dataset.csv"; }
    std::string predictor_path() const { return out_dir + "/predictor.json"; }
    std::string matrix_path() const { return out_dir + "/dense_matrix.csv"; }
    std::string mi_report_path() const { return out_dir + "/mi_report.csv"; }
};

std::string workload_to_json(const sim::WorkloadSpec& spec);
sim::WorkloadSpec workload_from_json_text(const std::string& text);
sim::WorkloadSpec workload_from_file(const std::string& path);

} // namespace opencap::cli
