#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "opencap/core.hpp"
#include "opencap/nnkit.hpp"
#include "opencap/simnode.hpp"

namespace opencap::pred {

struct FeatureStats {
    std::array<double, kFeatureCount> mean{};
    std::array<double, kFeatureCount> std{};
};

struct DatasetRow {
    CounterSample features;
    double target = 0.0; // normalized performance
    std::string app_id;
    PowerSetting setting;
};

// Profiling rows plus the per-feature standardization statistics computed
// over them. Targets stay unstandardized; they are already near 1.
struct TrainingDataset {
    std::vector<DatasetRow> rows;
    FeatureStats stats;
};

FeatureStats compute_stats(std::span<const DatasetRow> rows);
TrainingDataset make_dataset(std::vector<DatasetRow> rows);

struct ProfileResult {
    TrainingDataset dataset;
    PerformanceMatrix matrix; // fully observed: the initial dense matrix
};

// One run per (workload, setting): counters + measured normalized performance.
ProfileResult profile_suite(const std::vector<sim::WorkloadSpec>& suite, const PowerGrid& grid,
                            std::uint64_t seed);

struct PredictorHyper {
    std::vector<std::size_t> hidden{64, 64};
    double lr = 1e-3;
    int max_epochs = 2000;
    int patience = 50;          // early-stop epochs without validation improvement
    double val_fraction = 0.2;
    int batch_size = 32;
    std::uint64_t seed = 0;
};

struct PredictorModel {
    nn::MlpModel mlp;
    FeatureStats stats;
    bool has_stats = false;
};

// 7 -> hidden -> 1 regressor on standardized features; returns the epoch
// snapshot with the best validation MSE. Deterministic given hyper.seed.
PredictorModel train_predictor(const TrainingDataset& data, const PredictorHyper& hyper);

inline constexpr double kPredictMin = 0.01;

// forward pass on standardized features, clamped to [0.01, 1.25]
double predict_perf(const PredictorModel& model, const CounterSample& x);

// Plug-in mutual information (nats) over an equal-width bins x bins
// 2-D histogram. Symmetric in its arguments bit-for-bit.
double mutual_information(std::span<const double> xs, std::span<const double> ys, int bins);

struct FeatureScore {
    std::string feature_name;
    double mi = 0.0; // nats
};

// MI of each of the five counters against the target, sorted descending
std::vector<FeatureScore> feature_report(const TrainingDataset& data, int bins);

// Dataset CSV: app,cpu_cap_w,gpu_cap_w,ips,mem_tput,sm_clock,fp_active,dram_active,perf
void write_dataset_csv(const TrainingDataset& data, std::ostream& out);
void write_dataset_csv(const TrainingDataset& data, const std::string& path);
TrainingDataset read_dataset_csv(std::istream& in);
TrainingDataset read_dataset_csv_file(const std::string& path);

// feature report CSV: feature,mi_nats
void write_feature_report_csv(std::span<const FeatureScore> scores, std::ostream& out);
void write_feature_report_csv(std::span<const FeatureScore> scores, const std::string& path);

// nnkit model file with an extra feature_stats block
std::string predictor_to_json(const PredictorModel& model);
PredictorModel predictor_from_json(const std::string& text);
void save_predictor(const PredictorModel& model, const std::string& path);
PredictorModel load_predictor(const std::string& path);

} // namespace opencap::pred
