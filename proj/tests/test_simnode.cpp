#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "opencap/simnode.hpp"

using namespace opencap;
using namespace opencap::sim;

namespace {

WorkloadSpec insensitive_spec() {
    WorkloadSpec w;
    w.app_id = "flat";
    w.archetype = Archetype::insensitive;
    w.kappa_c = 80.0;
    w.alpha_c = 1.0;
    w.kappa_g = 90.0;
    w.alpha_g = 1.0;
    w.base_runtime_s = 10.0;
    w.noise_sigma = 0.0;
    return w;
}

WorkloadSpec gpu_heavy_spec() {
    WorkloadSpec w;
    w.app_id = "gpuheavy";
    w.archetype = Archetype::gpu_sensitive;
    w.kappa_c = 80.0;
    w.alpha_c = 1.0;
    w.kappa_g = 225.0;
    w.alpha_g = 0.7;
    w.base_runtime_s = 10.0;
    w.noise_sigma = 0.0;
    return w;
}

} // namespace

TEST_CASE("true_perf matches the knee-product formula") {
    const auto grid = PowerGrid::default_grid();
    const auto flat = insensitive_spec();
    for (const auto s : grid.settings()) CHECK(true_perf(flat, s) == 1.0);

    const auto gs = gpu_heavy_spec();
    // direct formula evaluation, independent of the implementation path
    CHECK(true_perf(gs, {200, 150}) == doctest::Approx(std::pow(150.0 / 225.0, 0.7)).epsilon(1e-12));
    CHECK(std::pow(150.0 / 225.0, 0.7) == doctest::Approx(0.752897956971237).epsilon(1e-12));

    WorkloadSpec both;
    both.app_id = "both";
    both.archetype = Archetype::both_sensitive;
    both.kappa_c = 180.0;
    both.alpha_c = 1.0;
    both.kappa_g = 225.0;
    both.alpha_g = 1.0;
    both.base_runtime_s = 10.0;
    CHECK(true_perf(both, {100, 150}) ==
          doctest::Approx((100.0 / 180.0) * (150.0 / 225.0)).epsilon(1e-12));
    CHECK((100.0 / 180.0) * (150.0 / 225.0) == doctest::Approx(0.37037037).epsilon(1e-6));
}

TEST_CASE("true_perf is monotone in caps and 1.0 at baseline") {
    const auto grid = PowerGrid::default_grid();
    const auto suite = make_suite(default_evaluation_params(11), grid);
    for (const auto& spec : suite) {
        CHECK(true_perf(spec, grid.baseline()) == 1.0);
        for (std::size_t ci = 1; ci < grid.cpu_caps().size(); ++ci)
            for (const int g : grid.gpu_caps())
                CHECK(true_perf(spec, {grid.cpu_caps()[ci], g}) >=
                      true_perf(spec, {grid.cpu_caps()[ci - 1], g}));
        for (std::size_t gi = 1; gi < grid.gpu_caps().size(); ++gi)
            for (const int c : grid.cpu_caps())
                CHECK(true_perf(spec, {c, grid.gpu_caps()[gi]}) >=
                      true_perf(spec, {c, grid.gpu_caps()[gi - 1]}));
    }
}

TEST_CASE("noise-free run matches the analytic runtime") {
    auto spec = insensitive_spec();
    const auto r = run(spec, {200, 250}, 1);
    CHECK(r.runtime_s == 10.0);

    spec.cpu_phase_s = 10.0;
    const auto r2 = run(spec, {200, 250}, 1);
    CHECK(r2.runtime_s == 20.0);

    auto gs = gpu_heavy_spec();
    gs.cpu_phase_s = 4.0;
    for (const auto s : PowerGrid::default_grid().settings()) {
        const auto rr = run(gs, s, 3);
        const double expect = gs.cpu_phase_s / cpu_factor(gs, s) + gs.base_runtime_s / true_perf(gs, s);
        CHECK(rr.runtime_s == doctest::Approx(expect).epsilon(1e-12));
        CHECK(rr.runtime_s >= gs.base_runtime_s);
    }
}

TEST_CASE("trace shows the CPU phase below the 60 W threshold") {
    auto spec = insensitive_spec();
    spec.cpu_phase_s = 10.0;
    const auto r = run(spec, {200, 250}, 5);
    for (const auto& ts : r.trace.samples) {
        if (ts.t_s <= 10.0)
            CHECK(ts.gpu_power_w < 60.0);
        else
            CHECK(ts.gpu_power_w >= 60.0);
    }
    // GPU phase settles at demand = 0.9*250*fp + idle, capped
    const auto& last = r.trace.samples.back();
    CHECK(last.gpu_power_w > 200.0);
}

TEST_CASE("runs are deterministic and noise behaves") {
    auto spec = gpu_heavy_spec();
    spec.noise_sigma = 0.01;
    const auto a = run(spec, {150, 200}, 42);
    const auto b = run(spec, {150, 200}, 42);
    CHECK(a.runtime_s == b.runtime_s);
    CHECK(a.energy_j == b.energy_j);
    CHECK(a.avg_power_w == b.avg_power_w);
    REQUIRE(a.trace.samples.size() == b.trace.samples.size());
    for (std::size_t i = 0; i < a.trace.samples.size(); ++i) {
        CHECK(a.trace.samples[i].t_s == b.trace.samples[i].t_s);
        CHECK(a.trace.samples[i].cpu_power_w == b.trace.samples[i].cpu_power_w);
        CHECK(a.trace.samples[i].gpu_power_w == b.trace.samples[i].gpu_power_w);
    }
    const auto c = run(spec, {150, 200}, 43);
    CHECK(a.runtime_s != c.runtime_s);
}

TEST_CASE("energy equals the rectangular trace sum and caps bind") {
    const auto grid = PowerGrid::default_grid();
    const auto suite = make_suite(default_evaluation_params(17), grid);
    for (const auto& spec : suite) {
        for (const auto s : {PowerSetting{100, 100}, PowerSetting{150, 200}, grid.baseline()}) {
            const auto r = run(spec, s, 7);
            double sum = 0.0;
            for (const auto& ts : r.trace.samples) {
                CHECK(ts.cpu_power_w >= 0.0);
                CHECK(ts.gpu_power_w >= 0.0);
                CHECK(ts.cpu_power_w <= s.cpu_cap_w);
                CHECK(ts.gpu_power_w <= s.gpu_cap_w);
                sum += (ts.cpu_power_w + ts.gpu_power_w) * r.trace.dt;
            }
            CHECK(r.energy_j == doctest::Approx(sum).epsilon(1e-9));
            CHECK(r.avg_power_w == doctest::Approx(r.energy_j / r.runtime_s).epsilon(1e-9));
        }
    }
}

TEST_CASE("counter curves follow the documented response model") {
    const auto flat = insensitive_spec();
    const auto c = sample_counters(flat, {200, 250});
    CHECK(c.fp_active == 1.0);
    CHECK(c.ips == flat.counter_scales.ips_max);
    CHECK(c.dram_active == 1.0);

    const auto gs = gpu_heavy_spec();
    const auto cg = sample_counters(gs, {200, 150});
    CHECK(cg.fp_active == doctest::Approx(std::pow(150.0 / 225.0, 0.7)).epsilon(1e-12));
    CHECK(cg.sm_clock ==
          doctest::Approx(gs.counter_scales.sm_clock_max * std::sqrt(150.0 / 225.0)).epsilon(1e-12));
    CHECK(cg.cpu_cap_w == 200.0);
    CHECK(cg.gpu_cap_w == 150.0);
}

TEST_CASE("counters are monotone non-decreasing in each cap") {
    const auto grid = PowerGrid::default_grid();
    const auto suite = make_suite(default_evaluation_params(23), grid);
    const auto leq = [](const CounterSample& a, const CounterSample& b) {
        return a.ips <= b.ips && a.mem_tput <= b.mem_tput && a.sm_clock <= b.sm_clock &&
               a.fp_active <= b.fp_active && a.dram_active <= b.dram_active;
    };
    for (const auto& spec : suite) {
        for (const int g : grid.gpu_caps())
            for (std::size_t ci = 1; ci < grid.cpu_caps().size(); ++ci)
                CHECK(leq(sample_counters(spec, {grid.cpu_caps()[ci - 1], g}),
                          sample_counters(spec, {grid.cpu_caps()[ci], g})));
        for (const int c : grid.cpu_caps())
            for (std::size_t gi = 1; gi < grid.gpu_caps().size(); ++gi)
                CHECK(leq(sample_counters(spec, {c, grid.gpu_caps()[gi - 1]}),
                          sample_counters(spec, {c, grid.gpu_caps()[gi]})));
    }
}

TEST_CASE("suite generation is reproducible and honors archetypes") {
    const auto grid = PowerGrid::default_grid();
    const auto a = make_suite(default_training_params(7), grid);
    const auto b = make_suite(default_training_params(7), grid);
    REQUIRE(a.size() == 10);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].app_id == b[i].app_id);
        CHECK(a[i].kappa_c == b[i].kappa_c);
        CHECK(a[i].kappa_g == b[i].kappa_g);
        CHECK(a[i].base_runtime_s == b[i].base_runtime_s);
    }
    const auto ev = make_suite(default_evaluation_params(7), grid);
    CHECK(ev.size() == 20);
    for (const auto& spec : ev) CHECK_NOTHROW(validate_spec(spec, grid));

    SuiteParams zero;
    zero.counts = {0, 0, 0, 0};
    CHECK_THROWS_AS(make_suite(zero, grid), std::invalid_argument);
}

TEST_CASE("spec validation rejects broken archetype constraints") {
    const auto grid = PowerGrid::default_grid();
    auto w = insensitive_spec();
    CHECK_NOTHROW(validate_spec(w, grid));
    w.kappa_g = 150.0; // sensitive knee on an insensitive archetype
    CHECK_THROWS_AS(validate_spec(w, grid), std::invalid_argument);
    w = gpu_heavy_spec();
    w.kappa_g = 260.0; // above baseline cap: perf at baseline would be < 1
    CHECK_THROWS_AS(validate_spec(w, grid), std::invalid_argument);
    w = gpu_heavy_spec();
    w.base_runtime_s = 0.0;
    CHECK_THROWS_AS(validate_spec(w, grid), std::invalid_argument);
}

TEST_CASE("trace csv round trip") {
    auto spec = insensitive_spec();
    spec.cpu_phase_s = 3.0;
    spec.noise_sigma = 0.01;
    const auto r = run(spec, {200, 250}, 9);
    std::ostringstream out;
    write_trace_csv(r.trace, out);
    std::istringstream in(out.str());
    const auto back = read_trace_csv(in);
    REQUIRE(back.samples.size() == r.trace.samples.size());
    CHECK(back.dt == doctest::Approx(r.trace.dt).epsilon(1e-12));
    for (std::size_t i = 0; i < back.samples.size(); ++i) {
        CHECK(back.samples[i].t_s == r.trace.samples[i].t_s);
        CHECK(back.samples[i].cpu_power_w == r.trace.samples[i].cpu_power_w);
        CHECK(back.samples[i].gpu_power_w == r.trace.samples[i].gpu_power_w);
    }
    std::istringstream bad("t_s,cpu\n");
    CHECK_THROWS_AS(read_trace_csv(bad), config_error);
}
