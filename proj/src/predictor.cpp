#include "opencap/predictor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "opencap/rng.hpp"

namespace opencap::pred {

FeatureStats compute_stats(std::span<const DatasetRow> rows) {
    if (rows.empty()) throw std::invalid_argument("dataset is empty");
    FeatureStats st;
    for (const auto& row : rows) {
        const auto f = feature_vector(row.features);
        for (std::size_t k = 0; k < kFeatureCount; ++k) st.mean[k] += f[k];
    }
    for (auto& m : st.mean) m /= static_cast<double>(rows.size());
    for (const auto& row : rows) {
        const auto f = feature_vector(row.features);
        for (std::size_t k = 0; k < kFeatureCount; ++k) {
            const double d = f[k] - st.mean[k];
            st.std[k] += d * d;
        }
    }
    for (auto& s : st.std) {
        s = std::sqrt(s / static_cast<double>(rows.size()));
        if (s < 1e-12) s = 1.0; // constant feature: pass through centered
    }
    return st;
}

TrainingDataset make_dataset(std::vector<DatasetRow> rows) {
    TrainingDataset d;
    d.stats = compute_stats(rows);
    d.rows = std::move(rows);
    return d;
}

ProfileResult profile_suite(const std::vector<sim::WorkloadSpec>& suite, const PowerGrid& grid,
                            std::uint64_t seed) {
    if (suite.empty()) throw std::invalid_argument("profile_suite: empty suite");
    std::vector<std::string> ids;
    for (const auto& spec : suite) ids.push_back(spec.app_id);
    PerformanceMatrix matrix(ids, grid);
    std::vector<DatasetRow> rows;
    const auto settings = grid.settings();
    for (const auto& spec : suite) {
        const double base_runtime = sim::noise_free_runtime(spec, grid.baseline());
        for (std::size_t j = 0; j < settings.size(); ++j) {
            const auto s = settings[j];
            const auto rr = sim::run(spec, s, derive_seed(seed, "profile." + spec.app_id, j));
            // clamp guard absorbs noise that lands slightly above baseline
            const double target = std::min(base_runtime / rr.runtime_s, kPerfMax);
            DatasetRow row;
            row.features = rr.counters;
            row.target = target;
            row.app_id = spec.app_id;
            row.setting = s;
            matrix.set(spec.app_id, s, target);
            rows.push_back(std::move(row));
        }
    }
    return {make_dataset(std::move(rows)), std::move(matrix)};
}

namespace {

std::vector<double> standardize(const FeatureStats& st, const CounterSample& c) {
    const auto f = feature_vector(c);
    std::vector<double> z(kFeatureCount);
    for (std::size_t k = 0; k < kFeatureCount; ++k) z[k] = (f[k] - st.mean[k]) / st.std[k];
    return z;
}

} // namespace

PredictorModel train_predictor(const TrainingDataset& data, const PredictorHyper& hyper) {
    if (data.rows.size() < 50)
        throw std::invalid_argument("train_predictor: need at least 50 rows, have " +
                                    std::to_string(data.rows.size()));
    if (hyper.max_epochs <= 0 || hyper.lr <= 0 || hyper.batch_size <= 0 ||
        hyper.val_fraction <= 0 || hyper.val_fraction >= 1)
        throw std::invalid_argument("train_predictor: bad hyperparameters");

    std::vector<nn::TrainPair> all;
    all.reserve(data.rows.size());
    for (const auto& row : data.rows) all.push_back({standardize(data.stats, row.features), {row.target}});

    Rng rng(derive_seed(hyper.seed, "predictor.train"));
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

    const auto val_count = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                        hyper.val_fraction * static_cast<double>(all.size())));
    std::vector<nn::TrainPair> val, train;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < val_count ? val : train).push_back(all[order[i]]);

    std::vector<std::size_t> dims{kFeatureCount};
    std::vector<nn::Activation> acts;
    for (const auto h : hyper.hidden) {
        dims.push_back(h);
        acts.push_back(nn::Activation::selu);
    }
    dims.push_back(1);
    acts.push_back(nn::Activation::identity);

    PredictorModel model{nn::MlpModel(dims, acts, rng), data.stats, true};
    auto params = model.mlp.param_blocks();
    nn::AdamState adam(params, hyper.lr);

    auto best = model.mlp;
    double best_val = nn::mse_loss(model.mlp, val);
    int stale = 0;
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<nn::TrainPair> batch;
    for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        for (std::size_t start = 0; start < idx.size(); start += hyper.batch_size) {
            batch.clear();
            const auto end = std::min(idx.size(), start + hyper.batch_size);
            for (std::size_t i = start; i < end; ++i) batch.push_back(train[idx[i]]);
            const auto [loss, grads] = nn::grad(model.mlp, batch);
            adam.step(params, grads);
        }
        const double val_loss = nn::mse_loss(model.mlp, val);
        if (!std::isfinite(val_loss)) throw std::runtime_error("train_predictor: divergence");
        if (val_loss < best_val) {
            best_val = val_loss;
            best = model.mlp;
            stale = 0;
        } else if (++stale > hyper.patience) {
            break;
        }
    }
    model.mlp = std::move(best);
    model.mlp.check_finite();
    return model;
}

double predict_perf(const PredictorModel& model, const CounterSample& x) {
    if (!model.has_stats)
        throw missing_artifact_error("predictor model lacks feature standardization stats");
    validate_counters(x);
    const auto out = model.mlp.forward(standardize(model.stats, x));
    return std::clamp(out.at(0), kPredictMin, kPerfMax);
}

double mutual_information(std::span<const double> xs, std::span<const double> ys, int bins) {
    if (xs.size() != ys.size()) throw std::invalid_argument("mutual_information: length mismatch");
    if (xs.size() < 100) throw std::invalid_argument("mutual_information: need at least 100 samples");
    if (bins < 2) throw std::invalid_argument("mutual_information: bins must be >= 2");
    const auto [xmin_it, xmax_it] = std::minmax_element(xs.begin(), xs.end());
    const auto [ymin_it, ymax_it] = std::minmax_element(ys.begin(), ys.end());
    const double xmin = *xmin_it, xspan = *xmax_it - *xmin_it;
    const double ymin = *ymin_it, yspan = *ymax_it - *ymin_it;
    if (xspan <= 0.0 || yspan <= 0.0) return 0.0; // a constant margin carries no information

    const auto b = static_cast<std::size_t>(bins);
    const auto bin_of = [&](double v, double lo, double span) {
        const auto k = static_cast<std::size_t>((v - lo) / span * static_cast<double>(b));
        return std::min(k, b - 1);
    };
    std::vector<std::size_t> joint(b * b, 0), mx(b, 0), my(b, 0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto bx = bin_of(xs[i], xmin, xspan);
        const auto by = bin_of(ys[i], ymin, yspan);
        ++joint[bx * b + by];
        ++mx[bx];
        ++my[by];
    }
    const double n = static_cast<double>(xs.size());
    // summing the sorted terms makes the estimate invariant under transposing
    // the histogram, so mi(x, y) == mi(y, x) exactly
    std::vector<double> terms;
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) {
            const auto nij = joint[i * b + j];
            if (nij == 0) continue;
            const double pij = static_cast<double>(nij) / n;
            terms.push_back(pij * std::log(pij * n * n / (static_cast<double>(mx[i]) * static_cast<double>(my[j]))));
        }
    std::sort(terms.begin(), terms.end());
    double mi = 0.0;
    for (const double t : terms) mi += t;
    return std::max(mi, 0.0);
}

std::vector<FeatureScore> feature_report(const TrainingDataset& data, int bins) {
    std::vector<double> targets;
    targets.reserve(data.rows.size());
    for (const auto& row : data.rows) targets.push_back(row.target);
    std::vector<FeatureScore> scores;
    // the five counters; the two cap features are the knobs, not measurements
    for (std::size_t k = 2; k < kFeatureCount; ++k) {
        std::vector<double> xs;
        xs.reserve(data.rows.size());
        for (const auto& row : data.rows) xs.push_back(feature_vector(row.features)[k]);
        scores.push_back({kFeatureNames[k], mutual_information(xs, targets, bins)});
    }
    std::sort(scores.begin(), scores.end(), [](const FeatureScore& a, const FeatureScore& b) {
        if (a.mi != b.mi) return a.mi > b.mi;
        return a.feature_name < b.feature_name;
    });
    return scores;
}

void write_dataset_csv(const TrainingDataset& data, std::ostream& out) {
    out << "app";
    for (const auto* name : kFeatureNames) out << ',' << name;
    out << ",perf\n";
    for (const auto& row : data.rows) {
        out << row.app_id;
        for (const double v : feature_vector(row.features)) out << ',' << format_double(v);
        out << ',' << format_double(row.target) << '\n';
    }
}

void write_dataset_csv(const TrainingDataset& data, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    write_dataset_csv(data, f);
}

TrainingDataset read_dataset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw config_error("dataset csv: empty file");
    std::string expect = "app";
    for (const auto* name : kFeatureNames) expect += std::string(",") + name;
    expect += ",perf";
    {
        auto cells = split_csv_line(line);
        std::string got;
        for (std::size_t i = 0; i < cells.size(); ++i) got += (i ? "," : "") + cells[i];
        if (got != expect) throw config_error("dataset csv: bad header");
    }
    const auto parse = [](const std::string& cell) {
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
            throw config_error("dataset csv: non-numeric cell '" + cell + "'");
        return v;
    };
    std::vector<DatasetRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != kFeatureCount + 2) throw config_error("dataset csv: ragged row");
        DatasetRow row;
        row.app_id = cells[0];
        row.features.cpu_cap_w = parse(cells[1]);
        row.features.gpu_cap_w = parse(cells[2]);
        row.features.ips = parse(cells[3]);
        row.features.mem_tput = parse(cells[4]);
        row.features.sm_clock = parse(cells[5]);
        row.features.fp_active = parse(cells[6]);
        row.features.dram_active = parse(cells[7]);
        row.target = parse(cells[8]);
        row.setting = {static_cast<int>(row.features.cpu_cap_w), static_cast<int>(row.features.gpu_cap_w)};
        rows.push_back(std::move(row));
    }
    return make_dataset(std::move(rows));
}

TrainingDataset read_dataset_csv_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw missing_artifact_error("missing dataset csv: " + path);
    return read_dataset_csv(f);
}

void write_feature_report_csv(std::span<const FeatureScore> scores, std::ostream& out) {
    out << "feature,mi_nats\n";
    for (const auto& s : scores) out << s.feature_name << ',' << format_double(s.mi) << '\n';
}

void write_feature_report_csv(std::span<const FeatureScore> scores, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    write_feature_report_csv(scores, f);
}

std::string predictor_to_json(const PredictorModel& model) {
    auto doc = nlohmann::json::parse(nn::model_to_json(model.mlp));
    if (model.has_stats) {
        doc["feature_stats"] = {
            {"mean", std::vector<double>(model.stats.mean.begin(), model.stats.mean.end())},
            {"std", std::vector<double>(model.stats.std.begin(), model.stats.std.end())}};
    }
    return doc.dump(2);
}

PredictorModel predictor_from_json(const std::string& text) {
    PredictorModel model;
    model.mlp = nn::model_from_json(text);
    const auto doc = nlohmann::json::parse(text);
    if (doc.contains("feature_stats")) {
        const auto mean = doc["feature_stats"].at("mean").get<std::vector<double>>();
        const auto sd = doc["feature_stats"].at("std").get<std::vector<double>>();
        if (mean.size() != kFeatureCount || sd.size() != kFeatureCount)
            throw std::runtime_error("predictor model: feature_stats shape mismatch");
        std::copy(mean.begin(), mean.end(), model.stats.mean.begin());
        std::copy(sd.begin(), sd.end(), model.stats.std.begin());
        model.has_stats = true;
    }
    return model;
}

void save_predictor(const PredictorModel& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << predictor_to_json(model);
}

PredictorModel load_predictor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw missing_artifact_error("missing predictor model: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return predictor_from_json(buf.str());
}

} // namespace opencap::pred
