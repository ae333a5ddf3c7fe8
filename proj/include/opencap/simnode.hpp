#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "opencap/core.hpp"
#include "opencap/rng.hpp"

namespace opencap::sim {

enum class Archetype { gpu_sensitive, cpu_sensitive, both_sensitive, insensitive };

const char* archetype_name(Archetype a);
Archetype parse_archetype(const std::string& name);

struct CounterScales {
    double ips_max = 2.0e11;      // instructions/s at unthrottled CPU
    double mem_tput_max = 2.5e11; // bytes/s
    double sm_clock_max = 1410.0; // MHz
};

// Ground truth for one emulated application. Performance under caps follows
// knee curves f(x; kappa, alpha) = min(1, (x/kappa)^alpha) per component.
struct WorkloadSpec {
    std::string app_id;
    Archetype archetype = Archetype::insensitive;
    double kappa_c = 50.0; // CPU knee, watts
    double alpha_c = 1.0;
    double kappa_g = 50.0; // GPU knee, watts
    double alpha_g = 1.0;
    double base_runtime_s = 10.0; // uncapped GPU-phase runtime
    double cpu_phase_s = 0.0;     // CPU-only preparation phase, uncapped seconds
    double noise_sigma = 0.0;     // log-normal runtime noise
    CounterScales counter_scales;
};

// archetype knee constraints, knees within baseline caps, positive fields
void validate_spec(const WorkloadSpec& spec, const PowerGrid& grid);

struct TraceSample {
    double t_s = 0.0;
    double cpu_power_w = 0.0;
    double gpu_power_w = 0.0;
};

// Uniformly sampled power telemetry. The sample stamped t covers [t-dt, t),
// so the first sample carries timestamp dt.
struct PowerTrace {
    double dt = 0.2;
    std::vector<TraceSample> samples;
};

struct RunResult {
    double runtime_s = 0.0;
    double energy_j = 0.0;     // rectangular sum over the trace
    double avg_power_w = 0.0;  // energy_j / runtime_s
    PowerTrace trace;
    CounterSample counters;    // GPU-phase average
};

// simulated node constants
inline constexpr double kSampleDt = 0.2;
inline constexpr double kGpuIdleW = 30.0;        // GPU board draw during the CPU phase
inline constexpr double kGpuMaxBoardW = 250.0;   // nominal board power, scales GPU-phase demand
inline constexpr double kCpuNominalW = 200.0;    // nominal package power
inline constexpr double kJitterSigmaW = 2.0;

double knee_factor(double cap_w, double kappa, double alpha);
double cpu_factor(const WorkloadSpec& spec, PowerSetting s);
double gpu_factor(const WorkloadSpec& spec, PowerSetting s);

// noise-free normalized performance; 1.0 at the baseline setting
double true_perf(const WorkloadSpec& spec, PowerSetting s);

// cpu_phase_s / f_c + base_runtime_s / true_perf
double noise_free_runtime(const WorkloadSpec& spec, PowerSetting s);

// pre-jitter power draw of each component in the given phase, cap enforced
double cpu_power_base(const WorkloadSpec& spec, PowerSetting s, bool in_cpu_phase);
double gpu_power_base(const WorkloadSpec& spec, PowerSetting s, bool in_cpu_phase);
double jitter_power(double base_w, double cap_w, Rng& rng);

// GPU-phase steady-state counters; deterministic in (spec, s)
CounterSample sample_counters(const WorkloadSpec& spec, PowerSetting s);
// counters seen while the CPU preparation phase is still running (GPU idle)
CounterSample sample_counters_cpu_phase(const WorkloadSpec& spec, PowerSetting s);

// Virtual-time execution under caps: deterministic in (spec, s, seed).
RunResult run(const WorkloadSpec& spec, PowerSetting s, std::uint64_t seed);

enum class SuiteRole { training, evaluation };

struct ArchetypeCounts {
    int gpu_sensitive = 0;
    int cpu_sensitive = 0;
    int both_sensitive = 0;
    int insensitive = 0;
    int total() const { return gpu_sensitive + cpu_sensitive + both_sensitive + insensitive; }
};

struct SuiteParams {
    ArchetypeCounts counts;
    std::uint64_t seed = 0;
    double noise_sigma = 0.01;
    SuiteRole role = SuiteRole::training;
    double cpu_phase_fraction = 0.0; // share of specs given a CPU preparation phase
};

SuiteParams default_training_params(std::uint64_t seed);   // 10 specs, no CPU phases
SuiteParams default_evaluation_params(std::uint64_t seed); // 20 specs, some CPU phases

// Reproducible randomized specs. Training and evaluation roles draw knees,
// curvatures, runtimes and counter scales from disjoint ranges.
std::vector<WorkloadSpec> make_suite(const SuiteParams& params, const PowerGrid& grid);

// Trace CSV: header "t_s,cpu_power_w,gpu_power_w"
void write_trace_csv(const PowerTrace& trace, std::ostream& out);
void write_trace_csv(const PowerTrace& trace, const std::string& path);
PowerTrace read_trace_csv(std::istream& in);
PowerTrace read_trace_csv_file(const std::string& path);

} // namespace opencap::sim
