#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "opencap/kernels.hpp"
#include "opencap/rng.hpp"

using namespace opencap;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

bool close(double a, double b, double rel = 1e-12) {
    return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1.0});
}

} // namespace

TEST_CASE("scalar lane basics") {
    const auto& k = kern::scalar_ops();
    const double x[] = {1.0, 2.0, 3.0};
    const double y[] = {4.0, 5.0, 6.0};
    CHECK(k.dot(x, y, 3) == doctest::Approx(32.0));

    double acc[] = {1.0, 1.0, 1.0};
    k.axpy(2.0, x, acc, 3);
    CHECK(acc[0] == 3.0);
    CHECK(acc[2] == 7.0);

    // W = [[1,2],[3,4]], x = [1,1] -> [3,7]
    const double w[] = {1, 2, 3, 4};
    const double in[] = {1, 1};
    double out[2];
    k.matvec(w, in, out, 2, 2);
    CHECK(out[0] == 3.0);
    CHECK(out[1] == 7.0);

    double tout[2];
    k.matvec_t(w, in, tout, 2, 2); // W^T [1,1] = [4,6]
    CHECK(tout[0] == 4.0);
    CHECK(tout[1] == 6.0);
}

TEST_CASE("lane equivalence on random inputs") {
    if (!kern::avx2_available()) return; // nothing to compare on this host
    const auto& ref = kern::scalar_ops();
    const bool ok = kern::force_lane(kern::Lane::avx2);
    REQUIRE(ok);
    const auto& simd = kern::ops();
    Rng rng(1234);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_int(0, 130));
        const auto x = random_vec(rng, n);
        const auto y = random_vec(rng, n);
        CHECK(close(ref.dot(x.data(), y.data(), n), simd.dot(x.data(), y.data(), n)));

        auto a1 = y, a2 = y;
        ref.axpy(0.37, x.data(), a1.data(), n);
        simd.axpy(0.37, x.data(), a2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(close(a1[i], a2[i]));

        const std::size_t rows = 1 + static_cast<std::size_t>(rng.uniform_int(0, 17));
        const auto w = random_vec(rng, rows * n);
        std::vector<double> y1(rows), y2(rows);
        ref.matvec(w.data(), x.data(), y1.data(), rows, n);
        simd.matvec(w.data(), x.data(), y2.data(), rows, n);
        for (std::size_t i = 0; i < rows; ++i) CHECK(close(y1[i], y2[i]));

        const auto d = random_vec(rng, rows);
        std::vector<double> t1(n), t2(n);
        ref.matvec_t(w.data(), d.data(), t1.data(), rows, n);
        simd.matvec_t(w.data(), d.data(), t2.data(), rows, n);
        for (std::size_t i = 0; i < n; ++i) CHECK(close(t1[i], t2[i]));

        auto g1 = random_vec(rng, rows * n);
        auto g2 = g1;
        ref.outer_acc(d.data(), x.data(), g1.data(), rows, n);
        simd.outer_acc(d.data(), x.data(), g2.data(), rows, n);
        for (std::size_t i = 0; i < rows * n; ++i) CHECK(close(g1[i], g2[i]));

        auto p1 = random_vec(rng, n), p2 = p1;
        auto m1 = random_vec(rng, n, 0.0, 0.1), m2 = m1;
        auto v1 = random_vec(rng, n, 0.0, 0.1), v2 = v1;
        const auto grads = random_vec(rng, n);
        ref.adam_update(p1.data(), grads.data(), m1.data(), v1.data(), n, 1e-3, 0.9, 0.999, 1e-8,
                        0.9, 0.999);
        simd.adam_update(p2.data(), grads.data(), m2.data(), v2.data(), n, 1e-3, 0.9, 0.999, 1e-8,
                         0.9, 0.999);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(close(p1[i], p2[i]));
            CHECK(close(m1[i], m2[i]));
            CHECK(close(v1[i], v2[i]));
        }
    }
    kern::force_lane(kern::Lane::scalar);
    CHECK(kern::active_lane() == kern::Lane::scalar);
}

TEST_CASE("adam kernel matches hand-evaluated first step") {
    // single param 1.0, grad 1.0, lr 0.1: first step moves by ~lr
    double p = 1.0, m = 0.0, v = 0.0;
    const double g = 1.0;
    kern::scalar_ops().adam_update(&p, &g, &m, &v, 1, 0.1, 0.9, 0.999, 1e-8, 0.9, 0.999);
    CHECK(p == doctest::Approx(0.9).epsilon(1e-7));
    CHECK(m == doctest::Approx(0.1));
    CHECK(v == doctest::Approx(0.001));
}
