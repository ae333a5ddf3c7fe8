#include "opencap/nnkit.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "opencap/kernels.hpp"

namespace opencap::nn {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::selu: return "selu";
        case Activation::relu: return "relu";
        case Activation::identity: return "identity";
    }
    throw std::logic_error("bad activation");
}

Activation parse_activation(const std::string& name) {
    if (name == "selu") return Activation::selu;
    if (name == "relu") return Activation::relu;
    if (name == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation: " + name);
}

double activate(Activation a, double z) {
    switch (a) {
        case Activation::selu:
            return z > 0 ? kSeluLambda * z : kSeluLambda * kSeluAlpha * (std::exp(z) - 1.0);
        case Activation::relu: return z > 0 ? z : 0.0;
        case Activation::identity: return z;
    }
    throw std::logic_error("bad activation");
}

double activate_grad(Activation a, double z) {
    switch (a) {
        case Activation::selu:
            return z > 0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(z);
        case Activation::relu: return z > 0 ? 1.0 : 0.0;
        case Activation::identity: return 1.0;
    }
    throw std::logic_error("bad activation");
}

MlpModel::MlpModel(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations,
                   Rng& rng) {
    if (dims.size() < 2) throw std::invalid_argument("mlp needs at least input and output dims");
    if (activations.size() != dims.size() - 1)
        throw std::invalid_argument("one activation per layer required");
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        if (dims[l] == 0 || dims[l + 1] == 0) throw std::invalid_argument("zero layer width");
        Layer layer;
        layer.in_dim = dims[l];
        layer.out_dim = dims[l + 1];
        layer.activation = activations[l];
        const double bound = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
        layer.weights.resize(layer.in_dim * layer.out_dim);
        for (auto& w : layer.weights) w = rng.uniform(-bound, bound);
        layer.biases.assign(layer.out_dim, 0.0);
        layers_.push_back(std::move(layer));
    }
}

std::size_t MlpModel::input_dim() const {
    return layers_.empty() ? 0 : layers_.front().in_dim;
}

std::size_t MlpModel::output_dim() const {
    return layers_.empty() ? 0 : layers_.back().out_dim;
}

std::vector<double> MlpModel::forward(std::span<const double> x) const {
    if (!layers_.empty() && x.size() != input_dim())
        throw std::invalid_argument("forward: input dimension mismatch");
    for (const double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input");
    std::vector<double> a(x.begin(), x.end());
    std::vector<double> z;
    for (const auto& layer : layers_) {
        z.resize(layer.out_dim);
        kern::ops().matvec(layer.weights.data(), a.data(), z.data(), layer.out_dim, layer.in_dim);
        for (std::size_t o = 0; o < layer.out_dim; ++o)
            z[o] = activate(layer.activation, z[o] + layer.biases[o]);
        a = z;
    }
    return a;
}

std::vector<ParamView> MlpModel::param_blocks() {
    std::vector<ParamView> blocks;
    for (auto& layer : layers_) {
        blocks.push_back({layer.weights.data(), layer.weights.size()});
        blocks.push_back({layer.biases.data(), layer.biases.size()});
    }
    return blocks;
}

std::size_t MlpModel::param_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer.weights.size() + layer.biases.size();
    return n;
}

void MlpModel::check_finite() const {
    for (const auto& layer : layers_) {
        for (const double w : layer.weights)
            if (!std::isfinite(w)) throw std::runtime_error("non-finite weight");
        for (const double b : layer.biases)
            if (!std::isfinite(b)) throw std::runtime_error("non-finite bias");
    }
}

namespace {

struct ForwardTape {
    // per layer: input activations and pre-activations
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> preacts;
    std::vector<double> output;
};

ForwardTape forward_tape(const MlpModel& model, std::span<const double> x) {
    ForwardTape tape;
    std::vector<double> a(x.begin(), x.end());
    for (const auto& layer : model.layers()) {
        tape.inputs.push_back(a);
        std::vector<double> z(layer.out_dim);
        kern::ops().matvec(layer.weights.data(), a.data(), z.data(), layer.out_dim, layer.in_dim);
        for (std::size_t o = 0; o < layer.out_dim; ++o) z[o] += layer.biases[o];
        tape.preacts.push_back(z);
        a.resize(layer.out_dim);
        for (std::size_t o = 0; o < layer.out_dim; ++o) a[o] = activate(layer.activation, z[o]);
    }
    tape.output = a;
    return tape;
}

} // namespace

std::pair<double, GradBlocks> grad(const MlpModel& model, std::span<const TrainPair> batch) {
    if (batch.empty()) throw std::invalid_argument("grad: empty batch");
    const auto& layers = model.layers();
    GradBlocks grads;
    for (const auto& layer : layers) {
        grads.emplace_back(layer.weights.size(), 0.0);
        grads.emplace_back(layer.biases.size(), 0.0);
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    std::vector<double> delta, next_delta;
    for (const auto& pair : batch) {
        if (!layers.empty() && pair.x.size() != model.input_dim())
            throw std::invalid_argument("grad: input dimension mismatch");
        if (pair.y.size() != (layers.empty() ? pair.x.size() : model.output_dim()))
            throw std::invalid_argument("grad: target dimension mismatch");
        const ForwardTape tape = forward_tape(model, pair.x);
        delta.assign(tape.output.size(), 0.0);
        for (std::size_t k = 0; k < tape.output.size(); ++k) {
            const double err = tape.output[k] - pair.y[k];
            loss += err * err * inv_b;
            delta[k] = 2.0 * err * inv_b; // dL/da at the output
        }
        for (std::size_t li = layers.size(); li-- > 0;) {
            const auto& layer = layers[li];
            for (std::size_t o = 0; o < layer.out_dim; ++o)
                delta[o] *= activate_grad(layer.activation, tape.preacts[li][o]);
            kern::ops().outer_acc(delta.data(), tape.inputs[li].data(), grads[2 * li].data(),
                                  layer.out_dim, layer.in_dim);
            for (std::size_t o = 0; o < layer.out_dim; ++o) grads[2 * li + 1][o] += delta[o];
            if (li > 0) {
                next_delta.resize(layer.in_dim);
                kern::ops().matvec_t(layer.weights.data(), delta.data(), next_delta.data(),
                                     layer.out_dim, layer.in_dim);
                delta = next_delta;
            }
        }
    }
    if (!std::isfinite(loss)) throw std::runtime_error("grad: non-finite loss (divergence)");
    return {loss, std::move(grads)};
}

double backprop_sample(const MlpModel& model, std::span<const double> x, std::span<const double> y,
                       double scale, GradBlocks& grads, std::vector<double>& input_grad) {
    const auto& layers = model.layers();
    if (grads.size() != 2 * layers.size()) throw std::invalid_argument("backprop: grad block count");
    const ForwardTape tape = forward_tape(model, x);
    if (tape.output.size() != y.size()) throw std::invalid_argument("backprop: target mismatch");
    double sq_err = 0.0;
    std::vector<double> delta(tape.output.size());
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double err = tape.output[k] - y[k];
        sq_err += err * err;
        delta[k] = 2.0 * err * scale;
    }
    std::vector<double> next_delta;
    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& layer = layers[li];
        for (std::size_t o = 0; o < layer.out_dim; ++o)
            delta[o] *= activate_grad(layer.activation, tape.preacts[li][o]);
        kern::ops().outer_acc(delta.data(), tape.inputs[li].data(), grads[2 * li].data(),
                              layer.out_dim, layer.in_dim);
        for (std::size_t o = 0; o < layer.out_dim; ++o) grads[2 * li + 1][o] += delta[o];
        next_delta.resize(layer.in_dim);
        kern::ops().matvec_t(layer.weights.data(), delta.data(), next_delta.data(), layer.out_dim,
                             layer.in_dim);
        delta = next_delta;
    }
    input_grad = delta;
    return sq_err;
}

double mse_loss(const MlpModel& model, std::span<const TrainPair> batch) {
    if (batch.empty()) throw std::invalid_argument("mse_loss: empty batch");
    double loss = 0.0;
    for (const auto& pair : batch) {
        const auto out = model.forward(pair.x);
        if (out.size() != pair.y.size()) throw std::invalid_argument("mse_loss: target mismatch");
        for (std::size_t k = 0; k < out.size(); ++k) {
            const double err = out[k] - pair.y[k];
            loss += err * err;
        }
    }
    return loss / static_cast<double>(batch.size());
}

AdamState::AdamState(const std::vector<ParamView>& params, double lr, double beta1, double beta2,
                     double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (lr <= 0 || beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1 || eps <= 0)
        throw std::invalid_argument("adam: bad hyperparameters");
    for (const auto& p : params) {
        m_.emplace_back(p.size, 0.0);
        v_.emplace_back(p.size, 0.0);
    }
}

void AdamState::step(const std::vector<ParamView>& params, const GradBlocks& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw std::invalid_argument("adam: block count mismatch");
    ++step_count_;
    beta1_pow_ *= beta1_;
    beta2_pow_ *= beta2_;
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].size != m_[b].size() || grads[b].size() != m_[b].size())
            throw std::invalid_argument("adam: block shape mismatch");
        kern::ops().adam_update(params[b].data, grads[b].data(), m_[b].data(), v_[b].data(),
                                params[b].size, lr_, beta1_, beta2_, eps_, beta1_pow_, beta2_pow_);
    }
}

EmbeddingTable EmbeddingTable::random(std::size_t rows, std::size_t dim, Rng& rng) {
    if (rows == 0 || dim == 0) throw std::invalid_argument("embedding: zero shape");
    EmbeddingTable t;
    t.rows = rows;
    t.dim = dim;
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + dim));
    t.values.resize(rows * dim);
    for (auto& v : t.values) v = rng.uniform(-bound, bound);
    return t;
}

std::span<const double> EmbeddingTable::row(std::size_t i) const {
    if (i >= rows) throw std::out_of_range("embedding row out of range");
    return {values.data() + i * dim, dim};
}

std::span<double> EmbeddingTable::row(std::size_t i) {
    if (i >= rows) throw std::out_of_range("embedding row out of range");
    return {values.data() + i * dim, dim};
}

GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           const std::function<GradBlocks()>& grad_fn,
                           const std::vector<ParamView>& params, double h, double tol) {
    if (h <= 0 || tol <= 0) throw std::invalid_argument("grad_check: h and tol must be positive");
    const GradBlocks analytic = grad_fn();
    GradCheckReport report;
    for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t i = 0; i < params[b].size; ++i) {
            double& p = params[b].data[i];
            const double saved = p;
            p = saved + h;
            const double lp = loss_fn();
            p = saved - h;
            const double lm = loss_fn();
            p = saved;
            const double fd = (lp - lm) / (2.0 * h);
            const double a = analytic[b][i];
            const double denom = std::max({std::abs(a), std::abs(fd), 1e-8});
            report.max_rel_err = std::max(report.max_rel_err, std::abs(a - fd) / denom);
            ++report.params_checked;
        }
    }
    report.pass = report.max_rel_err <= tol;
    return report;
}

GradCheckReport grad_check(MlpModel& model, std::span<const TrainPair> batch, double h, double tol) {
    const auto params = model.param_blocks();
    return grad_check([&] { return mse_loss(model, batch); },
                      [&] { return grad(model, batch).second; }, params, h, tol);
}

std::string model_to_json(const MlpModel& model) {
    nlohmann::json doc;
    doc["format_version"] = 1;
    std::vector<std::size_t> dims;
    std::vector<std::string> acts;
    for (const auto& layer : model.layers()) {
        if (dims.empty()) dims.push_back(layer.in_dim);
        dims.push_back(layer.out_dim);
        acts.emplace_back(activation_name(layer.activation));
    }
    doc["architecture"] = {{"dims", dims}, {"activations", acts}};
    nlohmann::json jl = nlohmann::json::array();
    for (const auto& layer : model.layers()) {
        nlohmann::json weights = nlohmann::json::array();
        for (std::size_t o = 0; o < layer.out_dim; ++o) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t i = 0; i < layer.in_dim; ++i) row.push_back(layer.weights[o * layer.in_dim + i]);
            weights.push_back(std::move(row));
        }
        jl.push_back({{"weights", std::move(weights)}, {"biases", layer.biases}});
    }
    doc["layers"] = std::move(jl);
    return doc.dump(2);
}

MlpModel model_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("model file: bad json: ") + e.what());
    }
    if (!doc.contains("format_version") || doc["format_version"].get<int>() != 1)
        throw std::runtime_error("model file: unsupported format_version");
    const auto dims = doc.at("architecture").at("dims").get<std::vector<std::size_t>>();
    const auto acts = doc.at("architecture").at("activations").get<std::vector<std::string>>();
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
        throw std::runtime_error("model file: inconsistent architecture");
    MlpModel model;
    const auto& jl = doc.at("layers");
    if (jl.size() != acts.size()) throw std::runtime_error("model file: layer count mismatch");
    for (std::size_t l = 0; l < jl.size(); ++l) {
        Layer layer;
        layer.in_dim = dims[l];
        layer.out_dim = dims[l + 1];
        layer.activation = parse_activation(acts[l]);
        const auto& weights = jl[l].at("weights");
        if (weights.size() != layer.out_dim) throw std::runtime_error("model file: weight shape");
        layer.weights.reserve(layer.in_dim * layer.out_dim);
        for (const auto& row : weights) {
            if (row.size() != layer.in_dim) throw std::runtime_error("model file: weight shape");
            for (const auto& v : row) layer.weights.push_back(v.get<double>());
        }
        layer.biases = jl[l].at("biases").get<std::vector<double>>();
        if (layer.biases.size() != layer.out_dim) throw std::runtime_error("model file: bias shape");
        model.layers().push_back(std::move(layer));
    }
    model.check_finite();
    return model;
}

} // namespace opencap::nn
