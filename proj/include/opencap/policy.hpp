#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "opencap/cfcomplete.hpp"
#include "opencap/core.hpp"
#include "opencap/phasedet.hpp"
#include "opencap/predictor.hpp"
#include "opencap/simnode.hpp"

namespace opencap::policy {

struct SelectionConfig {
    PowerGrid grid;
    double gamma = 0.05; // tolerated predicted performance loss
};

struct CapDecision {
    PowerSetting setting;
    double pred_saving = 0.0;
    double pred_loss = 0.0;
    std::size_t candidates_considered = 0; // size of the valid set
};

// Cap-pair selection over one predicted-performance row aligned with
// grid.settings(): keep pairs whose predicted loss stays within gamma, rank
// them by the predicted share of the baseline cap-sum energy bound they save,
// and break ties toward higher performance, then lower cap sum, then
// lexicographic order.
CapDecision select_caps(std::span<const double> row, const SelectionConfig& cfg);

struct ProbePlan {
    std::vector<PowerSetting> settings; // distinct, baseline included
    double probe_duration_s = 5.0;
    double reprobe_duration_s = 1.0; // per setting after a phase transition

    // baseline + remaining grid corners + grid median + lower-quartile point
    static ProbePlan default_plan(const PowerGrid& grid);
    void validate(const PowerGrid& grid) const;
};

// Estimate performance at each plan setting from steady-state counters fed
// through the offline predictor.
std::vector<std::pair<PowerSetting, double>> probe_app(const sim::WorkloadSpec& spec,
                                                       const ProbePlan& plan,
                                                       const pred::PredictorModel& predictor);

struct OnlineConfig {
    SelectionConfig selection;
    ProbePlan plan;
    phase::DetectorConfig detector;
    cf::NcfHyper ncf;
    double max_monitor_s = 120.0; // cap on post-probe monitoring for late transitions

    static OnlineConfig defaults(const PowerGrid& grid);
};

struct OnlineOutcome {
    CapDecision decision;
    bool transition_detected = false;
    double transition_time_s = 0.0;
    std::vector<std::pair<PowerSetting, double>> probes; // estimates the row was built from
    std::vector<double> completed_row;                   // aligned with grid.settings()
};

// Full online pipeline for one unseen application: probe while the phase
// detector watches GPU power, re-probe after a CPU->GPU transition, append the
// sparse row to the dense matrix, impute it, then select caps.
OnlineOutcome run_open_online(const sim::WorkloadSpec& spec, const PerformanceMatrix& dense,
                              const pred::PredictorModel& predictor, const OnlineConfig& cfg,
                              std::uint64_t seed);

enum class PolicyKind { open, no_cap, gpu_cap_only, cpu_cap_only, oracle };

const char* policy_name(PolicyKind p);
PolicyKind parse_policy(const std::string& name);

// Trimmed-mean ground truth for one (app, setting): repeated paired runs
// against the baseline, min/max-runtime repetitions dropped.
struct TruthEntry {
    double norm_perf = 1.0;
    double norm_power = 1.0;
    double efficiency = 1.0; // norm_perf / norm_power
    double energy_j = 0.0;
    double avg_power_w = 0.0;
};

TruthEntry measure_truth(const sim::WorkloadSpec& spec, PowerSetting setting, PowerSetting baseline,
                         int repetitions, std::uint64_t seed);

struct EvalRow {
    std::string app;
    std::string policy;
    double gamma = 0.0;
    PowerSetting setting;
    double true_perf = 0.0;
    double true_loss = 0.0;
    double energy_j = 0.0;
    double avg_power_w = 0.0;
    double efficiency = 0.0;
    double pred_saving = 0.0;
};

struct PolicyAggregate {
    std::string policy;
    double mean_efficiency = 0.0;
    double mean_gain_vs_no_cap = 0.0;
    double mean_true_loss = 0.0;
    double mean_true_perf = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::vector<PolicyAggregate> aggregates;
};

struct EvalConfig {
    OnlineConfig online;
    int repetitions = 5;

    static EvalConfig defaults(const PowerGrid& grid);
};

// Exhaustive-truth baseline policies; candidate sets per policy kind, the
// feasibility constraint gamma applied to measured loss.
EvalRow run_baseline(const sim::WorkloadSpec& spec, PolicyKind kind, const EvalConfig& cfg,
                     std::uint64_t seed);

// One row per (app, policy) plus per-policy aggregates.
EvalReport evaluate_suite(const std::vector<sim::WorkloadSpec>& suite,
                          const std::vector<PolicyKind>& policies, const PerformanceMatrix& dense,
                          const pred::PredictorModel& predictor, const EvalConfig& cfg,
                          std::uint64_t seed);

// CSV: app,policy,gamma,cpu_cap_w,gpu_cap_w,true_perf,true_loss,energy_j,avg_power_w,efficiency,pred_saving
void write_eval_csv(const EvalReport& report, std::ostream& out);
void write_eval_csv(const EvalReport& report, const std::string& path);
std::string aggregates_json(const EvalReport& report);

} // namespace opencap::policy
