#include "opencap/simnode.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace opencap::sim {

const char* archetype_name(Archetype a) {
    switch (a) {
        case Archetype::gpu_sensitive: return "gpu_sensitive";
        case Archetype::cpu_sensitive: return "cpu_sensitive";
        case Archetype::both_sensitive: return "both_sensitive";
        case Archetype::insensitive: return "insensitive";
    }
    throw std::logic_error("bad archetype");
}

Archetype parse_archetype(const std::string& name) {
    if (name == "gpu_sensitive") return Archetype::gpu_sensitive;
    if (name == "cpu_sensitive") return Archetype::cpu_sensitive;
    if (name == "both_sensitive") return Archetype::both_sensitive;
    if (name == "insensitive") return Archetype::insensitive;
    throw config_error("unknown archetype: " + name);
}

double knee_factor(double cap_w, double kappa, double alpha) {
    if (cap_w >= kappa) return 1.0;
    return std::pow(cap_w / kappa, alpha);
}

double cpu_factor(const WorkloadSpec& spec, PowerSetting s) {
    return knee_factor(s.cpu_cap_w, spec.kappa_c, spec.alpha_c);
}

double gpu_factor(const WorkloadSpec& spec, PowerSetting s) {
    return knee_factor(s.gpu_cap_w, spec.kappa_g, spec.alpha_g);
}

double true_perf(const WorkloadSpec& spec, PowerSetting s) {
    return cpu_factor(spec, s) * gpu_factor(spec, s);
}

double noise_free_runtime(const WorkloadSpec& spec, PowerSetting s) {
    return spec.cpu_phase_s / cpu_factor(spec, s) + spec.base_runtime_s / true_perf(spec, s);
}

void validate_spec(const WorkloadSpec& spec, const PowerGrid& grid) {
    if (spec.app_id.empty()) throw std::invalid_argument("workload spec: empty app_id");
    if (spec.base_runtime_s <= 0) throw std::invalid_argument("workload spec: base_runtime_s <= 0");
    if (spec.cpu_phase_s < 0) throw std::invalid_argument("workload spec: cpu_phase_s < 0");
    if (spec.noise_sigma < 0) throw std::invalid_argument("workload spec: noise_sigma < 0");
    if (spec.kappa_c <= 0 || spec.kappa_g <= 0 || spec.alpha_c < 0 || spec.alpha_g < 0)
        throw std::invalid_argument("workload spec: bad knee parameters");
    const auto& sc = spec.counter_scales;
    if (sc.ips_max <= 0 || sc.mem_tput_max <= 0 || sc.sm_clock_max <= 0)
        throw std::invalid_argument("workload spec: counter scales must be positive");
    // knees never exceed the baseline caps, so true_perf(baseline) == 1
    if (spec.kappa_c > grid.baseline().cpu_cap_w || spec.kappa_g > grid.baseline().gpu_cap_w)
        throw std::invalid_argument("workload spec: knee above baseline cap");
    const bool cpu_sens = spec.kappa_c > grid.min_cpu_cap();
    const bool gpu_sens = spec.kappa_g > grid.min_gpu_cap();
    switch (spec.archetype) {
        case Archetype::gpu_sensitive:
            if (cpu_sens || !gpu_sens) throw std::invalid_argument("gpu_sensitive knee constraint violated");
            break;
        case Archetype::cpu_sensitive:
            if (!cpu_sens || gpu_sens) throw std::invalid_argument("cpu_sensitive knee constraint violated");
            break;
        case Archetype::both_sensitive:
            if (!cpu_sens || !gpu_sens) throw std::invalid_argument("both_sensitive knee constraint violated");
            break;
        case Archetype::insensitive:
            if (cpu_sens || gpu_sens) throw std::invalid_argument("insensitive knee constraint violated");
            break;
    }
}

double cpu_power_base(const WorkloadSpec& spec, PowerSetting s, bool in_cpu_phase) {
    (void)spec;
    const double demand = in_cpu_phase ? 0.85 * kCpuNominalW : 0.5 * kCpuNominalW;
    return std::min(static_cast<double>(s.cpu_cap_w), demand);
}

double gpu_power_base(const WorkloadSpec& spec, PowerSetting s, bool in_cpu_phase) {
    if (in_cpu_phase) return std::min(static_cast<double>(s.gpu_cap_w), kGpuIdleW);
    const double demand = 0.9 * kGpuMaxBoardW * gpu_factor(spec, s) + kGpuIdleW;
    return std::min(static_cast<double>(s.gpu_cap_w), demand);
}

double jitter_power(double base_w, double cap_w, Rng& rng) {
    return std::clamp(base_w + rng.normal(0.0, kJitterSigmaW), 0.0, cap_w);
}

CounterSample sample_counters(const WorkloadSpec& spec, PowerSetting s) {
    const double fc = cpu_factor(spec, s);
    const double fg = gpu_factor(spec, s);
    CounterSample c;
    c.cpu_cap_w = s.cpu_cap_w;
    c.gpu_cap_w = s.gpu_cap_w;
    c.ips = spec.counter_scales.ips_max * fc;
    c.mem_tput = spec.counter_scales.mem_tput_max * std::pow(fc, 0.8);
    c.sm_clock = spec.counter_scales.sm_clock_max * std::sqrt(std::min(1.0, s.gpu_cap_w / spec.kappa_g));
    c.fp_active = fg;
    c.dram_active = std::min(1.0, 0.9 * fg + 0.1);
    return c;
}

CounterSample sample_counters_cpu_phase(const WorkloadSpec& spec, PowerSetting s) {
    const double fc = cpu_factor(spec, s);
    CounterSample c;
    c.cpu_cap_w = s.cpu_cap_w;
    c.gpu_cap_w = s.gpu_cap_w;
    c.ips = spec.counter_scales.ips_max * fc;
    c.mem_tput = spec.counter_scales.mem_tput_max * std::pow(fc, 0.8);
    c.sm_clock = 0.3 * spec.counter_scales.sm_clock_max; // idle clock floor
    c.fp_active = 0.02;
    c.dram_active = 0.05;
    return c;
}

RunResult run(const WorkloadSpec& spec, PowerSetting s, std::uint64_t seed) {
    Rng rng(seed);
    const double noise = std::exp(spec.noise_sigma * rng.normal());
    const double cpu_dur = spec.cpu_phase_s / cpu_factor(spec, s) * noise;
    const double total = noise_free_runtime(spec, s) * noise;

    RunResult r;
    r.runtime_s = total;
    r.trace.dt = kSampleDt;
    const auto n = static_cast<std::size_t>(std::ceil(total / kSampleDt - 1e-12));
    r.trace.samples.reserve(n);
    double energy = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        const double t = static_cast<double>(k) * kSampleDt;
        const bool in_cpu_phase = (t - kSampleDt) < cpu_dur;
        TraceSample ts;
        ts.t_s = t;
        ts.cpu_power_w = jitter_power(cpu_power_base(spec, s, in_cpu_phase), s.cpu_cap_w, rng);
        ts.gpu_power_w = jitter_power(gpu_power_base(spec, s, in_cpu_phase), s.gpu_cap_w, rng);
        energy += (ts.cpu_power_w + ts.gpu_power_w) * kSampleDt;
        r.trace.samples.push_back(ts);
    }
    r.energy_j = energy;
    r.avg_power_w = energy / total;
    r.counters = sample_counters(spec, s);
    return r;
}

SuiteParams default_training_params(std::uint64_t seed) {
    SuiteParams p;
    p.counts = {3, 3, 2, 2};
    p.seed = seed;
    p.noise_sigma = 0.01;
    p.role = SuiteRole::training;
    p.cpu_phase_fraction = 0.0;
    return p;
}

SuiteParams default_evaluation_params(std::uint64_t seed) {
    SuiteParams p;
    p.counts = {5, 5, 5, 5};
    p.seed = seed;
    p.noise_sigma = 0.01;
    p.role = SuiteRole::evaluation;
    p.cpu_phase_fraction = 0.2;
    return p;
}

namespace {

// low/high interval pair; evaluation suites draw from the two side bands so
// their parameters never collide with training values
struct Band {
    double lo, hi;
};

double draw_band(Rng& rng, Band training, Band eval_low, Band eval_high, SuiteRole role) {
    if (role == SuiteRole::training) return rng.uniform(training.lo, training.hi);
    const bool high = rng.uniform() < 0.5;
    const Band b = high ? eval_high : eval_low;
    return rng.uniform(b.lo, b.hi);
}

double lerp(double lo, double hi, double f) { return lo + (hi - lo) * f; }

} // namespace

std::vector<WorkloadSpec> make_suite(const SuiteParams& params, const PowerGrid& grid) {
    if (params.counts.total() <= 0) throw std::invalid_argument("suite config: zero workload count");
    const double c_lo = grid.min_cpu_cap(), c_hi = grid.baseline().cpu_cap_w;
    const double g_lo = grid.min_gpu_cap(), g_hi = grid.baseline().gpu_cap_w;

    // knee position bands as fractions of the [min cap, max cap] span
    const Band knee_tr{0.30, 0.80}, knee_ev_lo{0.15, 0.28}, knee_ev_hi{0.82, 0.95};
    const Band alpha_tr{0.70, 1.20}, alpha_ev_lo{0.55, 0.68}, alpha_ev_hi{1.25, 1.45};
    const Band rt_tr{8.0, 12.0}, rt_ev{12.5, 16.0};
    const Band scale_tr{0.95, 1.05}, scale_ev_lo{0.92, 0.95}, scale_ev_hi{1.05, 1.08};

    Rng rng(derive_seed(params.seed, params.role == SuiteRole::training ? "suite.training"
                                                                        : "suite.evaluation"));
    std::vector<WorkloadSpec> suite;

    const auto sensitive_knee = [&](double lo, double hi) {
        const double f = draw_band(rng, knee_tr, knee_ev_lo, knee_ev_hi, params.role);
        return lerp(lo, hi, f);
    };
    const auto insensitive_knee = [&](double min_cap) { return rng.uniform(0.4, 0.95) * min_cap; };
    const auto alpha = [&] { return draw_band(rng, alpha_tr, alpha_ev_lo, alpha_ev_hi, params.role); };
    const auto scale = [&] { return draw_band(rng, scale_tr, scale_ev_lo, scale_ev_hi, params.role); };

    const auto emit = [&](Archetype arch, int count) {
        const char* prefix = params.role == SuiteRole::training ? "tr" : "ev";
        for (int k = 0; k < count; ++k) {
            WorkloadSpec w;
            w.app_id = std::string(prefix) + "_" + archetype_name(arch) + "_" + std::to_string(k);
            w.archetype = arch;
            const bool cpu_sens = arch == Archetype::cpu_sensitive || arch == Archetype::both_sensitive;
            const bool gpu_sens = arch == Archetype::gpu_sensitive || arch == Archetype::both_sensitive;
            w.kappa_c = cpu_sens ? sensitive_knee(c_lo, c_hi) : insensitive_knee(c_lo);
            w.alpha_c = cpu_sens ? alpha() : rng.uniform(0.5, 1.5);
            w.kappa_g = gpu_sens ? sensitive_knee(g_lo, g_hi) : insensitive_knee(g_lo);
            w.alpha_g = gpu_sens ? alpha() : rng.uniform(0.5, 1.5);
            w.base_runtime_s = params.role == SuiteRole::training ? rng.uniform(rt_tr.lo, rt_tr.hi)
                                                                  : rng.uniform(rt_ev.lo, rt_ev.hi);
            w.cpu_phase_s = rng.uniform() < params.cpu_phase_fraction ? rng.uniform(6.0, 14.0) : 0.0;
            w.noise_sigma = params.noise_sigma;
            w.counter_scales.ips_max = 2.0e11 * scale();
            w.counter_scales.mem_tput_max = 2.5e11 * scale();
            w.counter_scales.sm_clock_max = 1410.0;
            validate_spec(w, grid);
            suite.push_back(std::move(w));
        }
    };

    emit(Archetype::gpu_sensitive, params.counts.gpu_sensitive);
    emit(Archetype::cpu_sensitive, params.counts.cpu_sensitive);
    emit(Archetype::both_sensitive, params.counts.both_sensitive);
    emit(Archetype::insensitive, params.counts.insensitive);
    return suite;
}

void write_trace_csv(const PowerTrace& trace, std::ostream& out) {
    out << "t_s,cpu_power_w,gpu_power_w\n";
    for (const auto& s : trace.samples)
        out << format_double(s.t_s) << ',' << format_double(s.cpu_power_w) << ','
            << format_double(s.gpu_power_w) << '\n';
}

void write_trace_csv(const PowerTrace& trace, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    write_trace_csv(trace, f);
}

PowerTrace read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw config_error("trace csv: empty file");
    {
        const auto header = split_csv_line(line);
        if (header != std::vector<std::string>{"t_s", "cpu_power_w", "gpu_power_w"})
            throw config_error("trace csv: bad header");
    }
    PowerTrace trace;
    const auto parse = [](const std::string& cell) {
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
            throw config_error("trace csv: non-numeric cell '" + cell + "'");
        return v;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 3) throw config_error("trace csv: ragged row");
        trace.samples.push_back({parse(cells[0]), parse(cells[1]), parse(cells[2])});
    }
    if (trace.samples.size() >= 2) {
        trace.dt = trace.samples[1].t_s - trace.samples[0].t_s;
        for (std::size_t k = 1; k < trace.samples.size(); ++k) {
            const double step = trace.samples[k].t_s - trace.samples[k - 1].t_s;
            if (std::abs(step - trace.dt) > 1e-9) throw config_error("trace csv: non-uniform sampling");
        }
    } else if (trace.samples.size() == 1) {
        trace.dt = trace.samples[0].t_s;
    }
    return trace;
}

PowerTrace read_trace_csv_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw missing_artifact_error("missing trace csv: " + path);
    return read_trace_csv(f);
}

} // namespace opencap::sim
