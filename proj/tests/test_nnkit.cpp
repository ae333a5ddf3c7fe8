#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "opencap/nnkit.hpp"

using namespace opencap;
using namespace opencap::nn;

namespace {

MlpModel identity_layer_model() {
    Rng rng(1);
    MlpModel m({2, 2}, {Activation::identity}, rng);
    auto& layer = m.layers()[0];
    layer.weights = {1.0, 0.0, 0.0, 1.0};
    layer.biases = {0.0, 0.0};
    return m;
}

} // namespace

TEST_CASE("selu values at reference points") {
    CHECK(activate(Activation::selu, 0.0) == 0.0);
    CHECK(activate(Activation::selu, 1.0) == doctest::Approx(1.0507009873554805).epsilon(1e-12));
    CHECK(activate(Activation::selu, -10.0) == doctest::Approx(-1.7580195232607867).epsilon(1e-9));
}

TEST_CASE("selu is continuous at zero and monotone") {
    const double eps = 1e-9;
    CHECK(std::abs(activate(Activation::selu, eps) - activate(Activation::selu, -eps)) < 1e-8);
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        const double a = rng.uniform(-6.0, 6.0);
        const double b = a + rng.uniform(0.0, 2.0);
        CHECK(activate(Activation::selu, a) <= activate(Activation::selu, b));
    }
}

TEST_CASE("forward basics") {
    const auto ident = identity_layer_model();
    const std::vector<double> x{1.0, 2.0};
    const auto y = ident.forward(x);
    CHECK(y == std::vector<double>{1.0, 2.0});

    Rng rng(2);
    MlpModel relu({2, 2}, {Activation::relu}, rng);
    relu.layers()[0].weights = {1.0, 0.0, 0.0, 1.0};
    relu.layers()[0].biases = {0.0, 0.0};
    CHECK(relu.forward(std::vector<double>{-1.0, 3.0}) == std::vector<double>{0.0, 3.0});

    CHECK_THROWS_AS(ident.forward(std::vector<double>{1.0}), std::invalid_argument);
    const std::vector<double> nan_in{std::nan(""), 0.0};
    CHECK_THROWS_AS(ident.forward(nan_in), std::invalid_argument);
}

TEST_CASE("hand-differentiated single-weight case") {
    Rng rng(4);
    MlpModel m({1, 1}, {Activation::identity}, rng);
    m.layers()[0].weights = {2.0};
    m.layers()[0].biases = {0.0};
    const std::vector<TrainPair> batch{{{1.0}, {0.0}}};
    const auto [loss, grads] = grad(m, batch);
    CHECK(loss == doctest::Approx(4.0));
    CHECK(grads[0][0] == doctest::Approx(4.0)); // d(wx-y)^2/dw = 2*(2)*1
    CHECK(grads[1][0] == doctest::Approx(4.0)); // bias sees the same delta

    const std::vector<TrainPair> perfect{{{1.0}, {2.0}}};
    const auto [l0, g0] = grad(m, perfect);
    CHECK(l0 == 0.0);
    CHECK(g0[0][0] == 0.0);
    CHECK(g0[1][0] == 0.0);

    CHECK_THROWS_AS(grad(m, std::span<const TrainPair>{}), std::invalid_argument);
}

TEST_CASE("gradients match central finite differences on a 7-16-8-1 net") {
    Rng rng(77);
    MlpModel m({7, 16, 8, 1}, {Activation::selu, Activation::selu, Activation::identity}, rng);
    std::vector<TrainPair> batch;
    for (int i = 0; i < 12; ++i) {
        TrainPair p;
        for (int k = 0; k < 7; ++k) p.x.push_back(rng.uniform(-1.5, 1.5));
        p.y.push_back(rng.uniform(0.2, 1.2));
        batch.push_back(std::move(p));
    }
    const auto report = grad_check(m, batch, 1e-5, 1e-4);
    CHECK(report.pass);
    CHECK(report.params_checked == m.param_count());
    CHECK(report.max_rel_err <= 1e-4);
}

TEST_CASE("grad_check flags a perturbed gradient") {
    Rng rng(78);
    MlpModel m({3, 4, 1}, {Activation::selu, Activation::identity}, rng);
    std::vector<TrainPair> batch{{{0.3, -0.8, 1.1}, {0.5}}, {{-0.2, 0.4, 0.9}, {0.8}}};
    const auto params = m.param_blocks();
    const auto report = grad_check(
        [&] { return mse_loss(m, batch); },
        [&] {
            auto g = grad(m, batch).second;
            for (auto& block : g)
                for (auto& v : block) v *= 1.01;
            return g;
        },
        params, 1e-5, 1e-4);
    CHECK(!report.pass);
}

TEST_CASE("model with no parameters passes vacuously") {
    MlpModel empty;
    std::vector<TrainPair> batch{{{1.0, 2.0}, {1.0, 2.0}}};
    const auto report = grad_check(empty, batch, 1e-5, 1e-4);
    CHECK(report.pass);
    CHECK(report.params_checked == 0);
    CHECK(report.max_rel_err == 0.0);
}

TEST_CASE("adam zero gradient leaves parameters fixed") {
    Rng rng(5);
    MlpModel m({2, 2}, {Activation::identity}, rng);
    const auto before = m.layers()[0].weights;
    auto params = m.param_blocks();
    AdamState adam(params, 0.1);
    GradBlocks zero{std::vector<double>(4, 0.0), std::vector<double>(2, 0.0)};
    adam.step(params, zero);
    CHECK(adam.step_count() == 1);
    CHECK(m.layers()[0].weights == before);
}

TEST_CASE("adam converges on a 1-d quadratic") {
    // minimize (p - 3)^2
    double p = 0.0;
    std::vector<ParamView> params{{&p, 1}};
    AdamState adam(params, 0.05);
    for (int step = 0; step < 2000; ++step) {
        GradBlocks g{{2.0 * (p - 3.0)}};
        adam.step(params, g);
    }
    CHECK(p == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("full-batch descent decreases the loss on a fixed batch") {
    Rng rng(6);
    MlpModel m({4, 8, 1}, {Activation::selu, Activation::identity}, rng);
    std::vector<TrainPair> batch;
    for (int i = 0; i < 16; ++i) {
        TrainPair tp;
        for (int k = 0; k < 4; ++k) tp.x.push_back(rng.uniform(-1.0, 1.0));
        tp.y.push_back(rng.uniform(0.0, 1.0));
        batch.push_back(std::move(tp));
    }
    auto params = m.param_blocks();
    AdamState adam(params, 1e-3);
    double prev = mse_loss(m, batch);
    const double first = prev;
    for (int step = 0; step < 100; ++step) {
        const auto [loss, grads] = grad(m, batch);
        adam.step(params, grads);
    }
    const double after = mse_loss(m, batch);
    CHECK(after < first);
}

TEST_CASE("embedding tables") {
    Rng rng(9);
    auto t = EmbeddingTable::random(5, 3, rng);
    CHECK(t.rows == 5);
    CHECK(t.row(4).size() == 3);
    CHECK_THROWS_AS(t.row(5), std::out_of_range);
    CHECK_THROWS_AS(EmbeddingTable::random(0, 3, rng), std::invalid_argument);
}

TEST_CASE("model json round trip is lossless") {
    Rng rng(10);
    MlpModel m({7, 64, 64, 1}, {Activation::selu, Activation::selu, Activation::identity}, rng);
    const auto text = model_to_json(m);
    const auto back = model_from_json(text);
    REQUIRE(back.layers().size() == m.layers().size());
    for (std::size_t l = 0; l < m.layers().size(); ++l) {
        CHECK(back.layers()[l].weights == m.layers()[l].weights);
        CHECK(back.layers()[l].biases == m.layers()[l].biases);
        CHECK(back.layers()[l].activation == m.layers()[l].activation);
    }
    CHECK(model_to_json(back) == text);
    CHECK_THROWS(model_from_json("{"));
    CHECK_THROWS(model_from_json("{\"format_version\": 9}"));
}

TEST_CASE("identical seeds give identical training trajectories") {
    const auto train_once = [] {
        Rng rng(31);
        MlpModel m({3, 8, 1}, {Activation::selu, Activation::identity}, rng);
        std::vector<TrainPair> batch;
        Rng data(32);
        for (int i = 0; i < 20; ++i) {
            TrainPair tp;
            for (int k = 0; k < 3; ++k) tp.x.push_back(data.uniform(-1.0, 1.0));
            tp.y.push_back(data.uniform(0.0, 1.0));
            batch.push_back(std::move(tp));
        }
        auto params = m.param_blocks();
        AdamState adam(params);
        for (int step = 0; step < 50; ++step) adam.step(params, grad(m, batch).second);
        return model_to_json(m);
    };
    CHECK(train_once() == train_once());
}
