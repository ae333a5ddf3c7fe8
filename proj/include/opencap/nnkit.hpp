#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "opencap/rng.hpp"

namespace opencap::nn {

enum class Activation { selu, relu, identity };

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

// lambda/alpha of the self-normalizing formulation
inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

double activate(Activation a, double z);
double activate_grad(Activation a, double z);

struct Layer {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<double> weights; // out_dim x in_dim, row-major
    std::vector<double> biases;  // out_dim
    Activation activation = Activation::identity;
};

// mutable view of one parameter block (a weight matrix, bias vector or
// embedding table) for the optimizer and the finite-difference checker
struct ParamView {
    double* data = nullptr;
    std::size_t size = 0;
};

class MlpModel {
  public:
    MlpModel() = default;
    // dims = [in, hidden..., out]; one activation per layer;
    // Glorot-uniform weights, zero biases
    MlpModel(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations,
             Rng& rng);

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    std::vector<double> forward(std::span<const double> x) const;

    // per layer: weights block then bias block
    std::vector<ParamView> param_blocks();
    std::size_t param_count() const;
    void check_finite() const;

  private:
    std::vector<Layer> layers_;
};

// gradient blocks in param_blocks() order
using GradBlocks = std::vector<std::vector<double>>;

struct TrainPair {
    std::vector<double> x;
    std::vector<double> y;
};

// mean-squared-error loss over the batch and exact reverse-mode gradients
std::pair<double, GradBlocks> grad(const MlpModel& model, std::span<const TrainPair> batch);
double mse_loss(const MlpModel& model, std::span<const TrainPair> batch);

// Reverse-mode pass for one sample with loss scale * ||f(x)-y||^2. Parameter
// gradients accumulate into grads; the gradient w.r.t. x lands in input_grad.
// Returns the unscaled squared error. Lets callers backpropagate into inputs
// that are themselves parameters (embedding rows).
double backprop_sample(const MlpModel& model, std::span<const double> x, std::span<const double> y,
                       double scale, GradBlocks& grads, std::vector<double>& input_grad);

class AdamState {
  public:
    AdamState() = default;
    AdamState(const std::vector<ParamView>& params, double lr = 1e-3, double beta1 = 0.9,
              double beta2 = 0.999, double eps = 1e-8);

    void step(const std::vector<ParamView>& params, const GradBlocks& grads);
    std::uint64_t step_count() const { return step_count_; }
    double lr() const { return lr_; }

  private:
    double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    double beta1_pow_ = 1.0, beta2_pow_ = 1.0;
    std::uint64_t step_count_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

struct EmbeddingTable {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<double> values; // rows x dim

    static EmbeddingTable random(std::size_t rows, std::size_t dim, Rng& rng);
    std::span<const double> row(std::size_t i) const;
    std::span<double> row(std::size_t i);
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t params_checked = 0;
    bool pass = false;
};

// Central-difference check of an arbitrary loss/gradient pair. loss_fn must
// re-evaluate the loss at the current parameter values; grad_fn returns
// analytic gradients in param-block order.
GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           const std::function<GradBlocks()>& grad_fn,
                           const std::vector<ParamView>& params, double h, double tol);

// convenience wrapper over a model + batch
GradCheckReport grad_check(MlpModel& model, std::span<const TrainPair> batch, double h, double tol);

// Model file: JSON with format_version, architecture, weights/biases, optional
// embedding tables and extra blocks. Values round-trip at full precision.
std::string model_to_json(const MlpModel& model);
MlpModel model_from_json(const std::string& text);

} // namespace opencap::nn
