#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <deque>
#include <optional>
#include <vector>

#include "opencap/phasedet.hpp"
#include "opencap/rng.hpp"
#include "opencap/simnode.hpp"

using namespace opencap;
using namespace opencap::phase;

namespace {

// Literal transcription of the published detection loop, used as the oracle:
// circular buffer of N = W/delta samples, divided into 1-second intervals;
// fire when no interval contains a value below the threshold.
std::optional<std::size_t> oracle_first_fire(const std::vector<double>& powers,
                                             const DetectorConfig& cfg) {
    const std::size_t n = cfg.sample_count();
    const auto per_interval = static_cast<std::size_t>(1.0 / cfg.delta_s + 0.5);
    std::deque<double> q;
    for (std::size_t idx = 0; idx < powers.size(); ++idx) {
        q.push_back(powers[idx]);
        if (q.size() > n) q.pop_front();
        if (q.size() == n) {
            bool flag = true;
            for (std::size_t start = 0; start < n && flag; start += per_interval)
                for (std::size_t k = start; k < start + per_interval; ++k)
                    if (q[k] < cfg.p_th_w) {
                        flag = false;
                        break;
                    }
            if (flag) return idx;
        }
    }
    return std::nullopt;
}

sim::PowerTrace trace_from(const std::vector<double>& gpu_powers, double dt = 0.2) {
    sim::PowerTrace t;
    t.dt = dt;
    for (std::size_t k = 0; k < gpu_powers.size(); ++k)
        t.samples.push_back({static_cast<double>(k + 1) * dt, 100.0, gpu_powers[k]});
    return t;
}

} // namespace

TEST_CASE("constant high stream fires when the buffer first fills") {
    Detector det(DetectorConfig{});
    for (int k = 1; k <= 24; ++k) CHECK(det.feed(150.0) == Decision::pending);
    CHECK(det.feed(150.0) == Decision::transition); // sample 25, t = 5.0 s
    CHECK(det.samples_seen() == 25);
    CHECK_THROWS_AS(det.feed(150.0), std::logic_error); // one-shot until reset
    det.reset();
    CHECK(det.feed(150.0) == Decision::pending);
}

TEST_CASE("constant low stream never fires") {
    Detector det(DetectorConfig{});
    for (int k = 0; k < 500; ++k) CHECK(det.feed(30.0) == Decision::pending);
}

TEST_CASE("step at t=10 fires at t=15") {
    // samples cover [t-dt, t): 30 W while t <= 10.0, 150 W from t = 10.2
    std::vector<double> powers;
    for (int k = 1; k <= 150; ++k) powers.push_back(k <= 50 ? 30.0 : 150.0);
    Detector det(DetectorConfig{});
    std::optional<int> fired;
    for (std::size_t k = 0; k < powers.size() && !fired; ++k)
        if (det.feed(powers[k]) == Decision::transition) fired = static_cast<int>(k) + 1;
    REQUIRE(fired.has_value());
    CHECK(*fired * 0.2 == doctest::Approx(15.0));

    const auto off = detect_offline(trace_from(powers), DetectorConfig{});
    REQUIRE(off.has_value());
    CHECK(*off == doctest::Approx(15.0));
}

TEST_CASE("periodic dips inside every window suppress detection") {
    // dip to 50 W every 4 s; no clean 5 s window ever forms
    std::vector<double> powers;
    for (int k = 1; k <= 400; ++k) powers.push_back(k % 20 == 0 ? 50.0 : 150.0);
    const auto off = detect_offline(trace_from(powers), DetectorConfig{});
    CHECK(!off.has_value());
}

TEST_CASE("simnode run with a cpu phase is detected near 15 s") {
    sim::WorkloadSpec spec;
    spec.app_id = "phased";
    spec.archetype = sim::Archetype::insensitive;
    spec.kappa_c = 80.0;
    spec.kappa_g = 90.0;
    spec.base_runtime_s = 20.0;
    spec.cpu_phase_s = 10.0;
    const auto r = sim::run(spec, {200, 250}, 21);
    const auto t = detect_offline(r.trace, DetectorConfig{});
    REQUIRE(t.has_value());
    CHECK(*t == doctest::Approx(15.0).epsilon(0.2 / 15.0));
}

TEST_CASE("empty and short traces report none") {
    CHECK(!detect_offline(trace_from({}), DetectorConfig{}).has_value());
    std::vector<double> short_high(24, 150.0); // application ends before the buffer fills
    CHECK(!detect_offline(trace_from(short_high), DetectorConfig{}).has_value());
}

TEST_CASE("offline equals streaming on random traces") {
    Rng rng(555);
    const DetectorConfig cfg{};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> powers;
        const auto len = static_cast<std::size_t>(rng.uniform_int(0, 200));
        for (std::size_t k = 0; k < len; ++k)
            powers.push_back(rng.uniform() < 0.8 ? rng.uniform(60.0, 250.0) : rng.uniform(0.0, 59.9));
        const auto oracle = oracle_first_fire(powers, cfg);
        const auto off = detect_offline(trace_from(powers), cfg);
        if (oracle.has_value()) {
            REQUIRE(off.has_value());
            CHECK(*off == doctest::Approx((static_cast<double>(*oracle) + 1.0) * cfg.delta_s));
        } else {
            CHECK(!off.has_value());
        }
        // streaming detector agrees sample-for-sample with the interval oracle
        Detector det(cfg);
        std::optional<std::size_t> fired;
        for (std::size_t k = 0; k < powers.size() && !fired; ++k)
            if (det.feed(powers[k]) == Decision::transition) fired = k;
        CHECK(fired == oracle);
    }
}

TEST_CASE("detection latency is exactly the window for grid-aligned steps") {
    Rng rng(808);
    const DetectorConfig cfg{};
    for (int trial = 0; trial < 50; ++trial) {
        const auto step_at = static_cast<std::size_t>(rng.uniform_int(0, 100));
        std::vector<double> powers;
        for (std::size_t k = 0; k < step_at; ++k) powers.push_back(rng.uniform(5.0, 55.0));
        for (std::size_t k = 0; k < 60; ++k) powers.push_back(rng.uniform(60.0, 240.0));
        const auto oracle = oracle_first_fire(powers, cfg);
        REQUIRE(oracle.has_value());
        // first high sample index step_at; window completes 24 samples later
        CHECK(*oracle == step_at + cfg.sample_count() - 1);
    }
}

TEST_CASE("config validation") {
    DetectorConfig bad;
    bad.delta_s = 0.3; // 1 s interval does not divide into 0.3 s samples
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = DetectorConfig{};
    bad.window_s = 5.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = DetectorConfig{};
    bad.p_th_w = -1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    DetectorConfig ok;
    ok.delta_s = 0.25;
    ok.window_s = 4.0;
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.sample_count() == 16);

    // dt mismatch between trace and config
    CHECK_THROWS_AS(detect_offline(trace_from({100.0, 100.0}, 0.5), DetectorConfig{}),
                    std::invalid_argument);
}

TEST_CASE("negative power samples are rejected") {
    Detector det(DetectorConfig{});
    CHECK_THROWS_AS(det.feed(-2.0), std::invalid_argument);
}
