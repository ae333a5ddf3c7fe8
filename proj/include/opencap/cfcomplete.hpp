#pragma once

#include <cstdint>
#include <vector>

#include "opencap/core.hpp"
#include "opencap/nnkit.hpp"

namespace opencap::cf {

struct NcfHyper {
    std::size_t app_dim = 8;
    std::size_t setting_dim = 8;
    std::vector<std::size_t> hidden{32, 16};
    double lr = 1e-3;
    int max_epochs = 2000;
    int patience = 100;
    double val_fraction = 0.1; // share of observed entries held out during fit
    int batch_size = 32;
};

// Embedding pair + interaction MLP. Indices are positions in the matrix the
// model was fitted on; rows/columns that contributed no observed entry are
// cold and refuse prediction.
class NcfModel {
  public:
    double predict(std::size_t app_index, std::size_t setting_index) const; // clamped [0.01, 1.25]

    std::size_t app_count() const { return app_emb_.rows; }
    std::size_t setting_count() const { return setting_emb_.rows; }
    bool app_cold(std::size_t i) const;
    bool setting_cold(std::size_t j) const;

    struct Meta {
        std::uint64_t seed = 0;
        int epochs_run = 0;
        double initial_train_mse = 0.0;
        double final_train_mse = 0.0;
        double best_val_mse = 0.0;
    };
    const Meta& meta() const { return meta_; }

    // nnkit model file including both embedding tables
    std::string to_json() const;
    static NcfModel from_json(const std::string& text);

  private:
    friend NcfModel fit(const PerformanceMatrix&, const NcfHyper&, std::uint64_t);
    nn::EmbeddingTable app_emb_;
    nn::EmbeddingTable setting_emb_;
    nn::MlpModel mlp_;
    std::vector<std::uint8_t> app_seen_;
    std::vector<std::uint8_t> setting_seen_;
    Meta meta_;
};

// Minimize MSE over the observed entries with Adam; keeps the snapshot with
// the best held-out MSE. Deterministic given (matrix, hyper, seed).
NcfModel fit(const PerformanceMatrix& matrix, const NcfHyper& hyper, std::uint64_t seed);

// Fully observed copy: measured cells verbatim, missing cells imputed.
// Every row must carry at least one observed entry.
PerformanceMatrix complete(const PerformanceMatrix& matrix, const NcfHyper& hyper, std::uint64_t seed);

} // namespace opencap::cf
