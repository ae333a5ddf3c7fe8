#include "opencap/cfcomplete.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "opencap/predictor.hpp"
#include "opencap/rng.hpp"

namespace opencap::cf {

namespace {

struct Cell {
    std::size_t app;
    std::size_t setting;
    double value;
};

std::vector<double> concat_embed(const nn::EmbeddingTable& a, std::size_t i,
                                 const nn::EmbeddingTable& b, std::size_t j) {
    std::vector<double> x;
    x.reserve(a.dim + b.dim);
    const auto ra = a.row(i);
    const auto rb = b.row(j);
    x.insert(x.end(), ra.begin(), ra.end());
    x.insert(x.end(), rb.begin(), rb.end());
    return x;
}

double cells_mse(const std::vector<Cell>& cells,
                 const std::function<double(std::size_t, std::size_t)>& raw) {
    if (cells.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& c : cells) {
        const double err = raw(c.app, c.setting) - c.value;
        acc += err * err;
    }
    return acc / static_cast<double>(cells.size());
}

} // namespace

double NcfModel::predict(std::size_t app_index, std::size_t setting_index) const {
    if (app_index >= app_emb_.rows) throw std::out_of_range("ncf: app index out of range");
    if (setting_index >= setting_emb_.rows) throw std::out_of_range("ncf: setting index out of range");
    if (app_cold(app_index))
        throw std::runtime_error("ncf: cold app row " + std::to_string(app_index) +
                                 " (no observed entries at fit time)");
    if (setting_cold(setting_index))
        throw std::runtime_error("ncf: cold setting column " + std::to_string(setting_index) +
                                 " (no observed entries at fit time)");
    const auto x = concat_embed(app_emb_, app_index, setting_emb_, setting_index);
    return std::clamp(mlp_.forward(x).at(0), pred::kPredictMin, kPerfMax);
}

bool NcfModel::app_cold(std::size_t i) const { return app_seen_.at(i) == 0; }
bool NcfModel::setting_cold(std::size_t j) const { return setting_seen_.at(j) == 0; }

NcfModel fit(const PerformanceMatrix& matrix, const NcfHyper& hyper, std::uint64_t seed) {
    if (hyper.app_dim == 0 || hyper.setting_dim == 0 || hyper.lr <= 0 || hyper.max_epochs <= 0 ||
        hyper.batch_size <= 0 || hyper.val_fraction < 0 || hyper.val_fraction >= 1)
        throw std::invalid_argument("ncf: bad hyperparameters");

    std::vector<Cell> cells;
    for (std::size_t i = 0; i < matrix.rows(); ++i)
        for (std::size_t j = 0; j < matrix.cols(); ++j)
            if (matrix.observed(i, j)) cells.push_back({i, j, matrix.value(i, j)});
    if (cells.empty()) throw std::invalid_argument("ncf: matrix has no observed entries");

    Rng rng(derive_seed(seed, "ncf.fit"));
    NcfModel model;
    model.app_emb_ = nn::EmbeddingTable::random(matrix.rows(), hyper.app_dim, rng);
    model.setting_emb_ = nn::EmbeddingTable::random(matrix.cols(), hyper.setting_dim, rng);
    std::vector<std::size_t> dims{hyper.app_dim + hyper.setting_dim};
    std::vector<nn::Activation> acts;
    for (const auto h : hyper.hidden) {
        dims.push_back(h);
        acts.push_back(nn::Activation::selu);
    }
    dims.push_back(1);
    acts.push_back(nn::Activation::identity);
    model.mlp_ = nn::MlpModel(dims, acts, rng);

    model.app_seen_.assign(matrix.rows(), 0);
    model.setting_seen_.assign(matrix.cols(), 0);
    for (const auto& c : cells) {
        model.app_seen_[c.app] = 1;
        model.setting_seen_[c.setting] = 1;
    }

    // held-out split over observed entries
    std::vector<std::size_t> order(cells.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    const auto val_count = static_cast<std::size_t>(hyper.val_fraction * static_cast<double>(cells.size()));
    std::vector<Cell> val, train;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < val_count ? val : train).push_back(cells[order[i]]);
    if (train.empty()) std::swap(train, val);
    const auto& monitor = val.empty() ? train : val;

    const auto raw_forward = [&](std::size_t i, std::size_t j) {
        return model.mlp_.forward(concat_embed(model.app_emb_, i, model.setting_emb_, j)).at(0);
    };

    // parameter blocks: both embedding tables, then the mlp
    std::vector<nn::ParamView> params{{model.app_emb_.values.data(), model.app_emb_.values.size()},
                                      {model.setting_emb_.values.data(), model.setting_emb_.values.size()}};
    for (const auto& block : model.mlp_.param_blocks()) params.push_back(block);
    nn::AdamState adam(params, hyper.lr);

    struct Snapshot {
        std::vector<double> app, setting;
        std::vector<std::vector<double>> mlp;
    };
    const auto snapshot = [&] {
        Snapshot s;
        s.app = model.app_emb_.values;
        s.setting = model.setting_emb_.values;
        for (const auto& layer : model.mlp_.layers()) {
            s.mlp.push_back(layer.weights);
            s.mlp.push_back(layer.biases);
        }
        return s;
    };
    const auto restore = [&](const Snapshot& s) {
        model.app_emb_.values = s.app;
        model.setting_emb_.values = s.setting;
        std::size_t k = 0;
        for (auto& layer : model.mlp_.layers()) {
            layer.weights = s.mlp[k++];
            layer.biases = s.mlp[k++];
        }
    };

    model.meta_.seed = seed;
    model.meta_.initial_train_mse = cells_mse(train, raw_forward);
    auto best = snapshot();
    double best_val = cells_mse(monitor, raw_forward);
    int stale = 0;

    nn::GradBlocks grads;
    std::vector<double> input_grad;
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), 0);
    int epoch = 0;
    for (; epoch < hyper.max_epochs; ++epoch) {
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
        for (std::size_t start = 0; start < idx.size(); start += hyper.batch_size) {
            const auto end = std::min(idx.size(), start + static_cast<std::size_t>(hyper.batch_size));
            const double scale = 1.0 / static_cast<double>(end - start);
            grads.assign(params.size(), {});
            grads[0].assign(model.app_emb_.values.size(), 0.0);
            grads[1].assign(model.setting_emb_.values.size(), 0.0);
            nn::GradBlocks mlp_grads;
            for (const auto& layer : model.mlp_.layers()) {
                mlp_grads.emplace_back(layer.weights.size(), 0.0);
                mlp_grads.emplace_back(layer.biases.size(), 0.0);
            }
            for (std::size_t i = start; i < end; ++i) {
                const auto& c = train[idx[i]];
                const auto x = concat_embed(model.app_emb_, c.app, model.setting_emb_, c.setting);
                const double y[] = {c.value};
                nn::backprop_sample(model.mlp_, x, y, scale, mlp_grads, input_grad);
                for (std::size_t k = 0; k < hyper.app_dim; ++k)
                    grads[0][c.app * hyper.app_dim + k] += input_grad[k];
                for (std::size_t k = 0; k < hyper.setting_dim; ++k)
                    grads[1][c.setting * hyper.setting_dim + k] += input_grad[hyper.app_dim + k];
            }
            for (std::size_t b = 0; b < mlp_grads.size(); ++b) grads[2 + b] = std::move(mlp_grads[b]);
            adam.step(params, grads);
        }
        const double val_loss = cells_mse(monitor, raw_forward);
        if (!std::isfinite(val_loss)) throw std::runtime_error("ncf: divergence");
        if (val_loss < best_val) {
            best_val = val_loss;
            best = snapshot();
            stale = 0;
        } else if (++stale > hyper.patience) {
            ++epoch;
            break;
        }
    }
    restore(best);
    model.meta_.epochs_run = epoch;
    model.meta_.best_val_mse = best_val;
    model.meta_.final_train_mse = cells_mse(train, raw_forward);
    model.mlp_.check_finite();
    return model;
}

PerformanceMatrix complete(const PerformanceMatrix& matrix, const NcfHyper& hyper, std::uint64_t seed) {
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        bool any = false;
        for (std::size_t j = 0; j < matrix.cols() && !any; ++j) any = matrix.observed(i, j);
        if (!any)
            throw std::invalid_argument("complete: app row '" + matrix.app_ids()[i] +
                                        "' has no observed entries (probe it first)");
    }
    if (matrix.observed_count() == matrix.rows() * matrix.cols()) return matrix;
    const auto model = fit(matrix, hyper, seed);
    PerformanceMatrix out = matrix;
    for (std::size_t i = 0; i < matrix.rows(); ++i)
        for (std::size_t j = 0; j < matrix.cols(); ++j)
            if (!matrix.observed(i, j)) out.set(i, j, model.predict(i, j));
    return out;
}

std::string NcfModel::to_json() const {
    auto doc = nlohmann::json::parse(nn::model_to_json(mlp_));
    const auto table_json = [](const nn::EmbeddingTable& t) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < t.rows; ++i) {
            const auto r = t.row(i);
            rows.push_back(std::vector<double>(r.begin(), r.end()));
        }
        return nlohmann::json{{"rows", t.rows}, {"dim", t.dim}, {"values", std::move(rows)}};
    };
    doc["embeddings"] = {{"app", table_json(app_emb_)}, {"setting", table_json(setting_emb_)}};
    doc["observed"] = {{"app_seen", app_seen_}, {"setting_seen", setting_seen_}};
    doc["training"] = {{"seed", meta_.seed},
                       {"epochs_run", meta_.epochs_run},
                       {"initial_train_mse", meta_.initial_train_mse},
                       {"final_train_mse", meta_.final_train_mse},
                       {"best_val_mse", meta_.best_val_mse}};
    return doc.dump(2);
}

NcfModel NcfModel::from_json(const std::string& text) {
    NcfModel model;
    model.mlp_ = nn::model_from_json(text);
    const auto doc = nlohmann::json::parse(text);
    const auto table_from = [](const nlohmann::json& j) {
        nn::EmbeddingTable t;
        t.rows = j.at("rows").get<std::size_t>();
        t.dim = j.at("dim").get<std::size_t>();
        for (const auto& row : j.at("values")) {
            const auto vals = row.get<std::vector<double>>();
            if (vals.size() != t.dim) throw std::runtime_error("ncf model: embedding shape");
            t.values.insert(t.values.end(), vals.begin(), vals.end());
        }
        if (t.values.size() != t.rows * t.dim) throw std::runtime_error("ncf model: embedding shape");
        return t;
    };
    model.app_emb_ = table_from(doc.at("embeddings").at("app"));
    model.setting_emb_ = table_from(doc.at("embeddings").at("setting"));
    model.app_seen_ = doc.at("observed").at("app_seen").get<std::vector<std::uint8_t>>();
    model.setting_seen_ = doc.at("observed").at("setting_seen").get<std::vector<std::uint8_t>>();
    if (model.app_seen_.size() != model.app_emb_.rows ||
        model.setting_seen_.size() != model.setting_emb_.rows)
        throw std::runtime_error("ncf model: observed mask shape");
    const auto& tr = doc.at("training");
    model.meta_.seed = tr.at("seed").get<std::uint64_t>();
    model.meta_.epochs_run = tr.at("epochs_run").get<int>();
    model.meta_.initial_train_mse = tr.at("initial_train_mse").get<double>();
    model.meta_.final_train_mse = tr.at("final_train_mse").get<double>();
    model.meta_.best_val_mse = tr.at("best_val_mse").get<double>();
    return model;
}

} // namespace opencap::cf
