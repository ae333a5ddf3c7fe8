#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace opencap {

// Bad user input: unusable config values, malformed CSV, unknown flags.
class config_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A required file (model, matrix, dataset) is absent or unreadable.
class missing_artifact_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A (CPU cap, GPU cap) pair in watts. Ordered lexicographically (cpu, then
// gpu) so that grid iteration order is the same everywhere.
struct PowerSetting {
    int cpu_cap_w = 0;
    int gpu_cap_w = 0;

    friend auto operator<=>(const PowerSetting&, const PowerSetting&) = default;
};

std::string setting_label(PowerSetting s);                    // "c200_g250"
std::optional<PowerSetting> parse_setting_label(const std::string& label);

// Cross product of strictly increasing cap lists. The baseline is the
// element-wise maximum and is always a grid member by construction.
class PowerGrid {
  public:
    PowerGrid(std::vector<int> cpu_caps, std::vector<int> gpu_caps);

    static PowerGrid default_grid(); // {100,125,150,175,200} x {100,150,200,250}

    const std::vector<int>& cpu_caps() const { return cpu_caps_; }
    const std::vector<int>& gpu_caps() const { return gpu_caps_; }
    PowerSetting baseline() const { return {cpu_caps_.back(), gpu_caps_.back()}; }
    int min_cpu_cap() const { return cpu_caps_.front(); }
    int min_gpu_cap() const { return gpu_caps_.front(); }

    // lexicographic (cpu, gpu) order; size = |C| * |G|
    std::vector<PowerSetting> settings() const;
    bool contains(PowerSetting s) const;

  private:
    std::vector<int> cpu_caps_;
    std::vector<int> gpu_caps_;
};

// The seven predictor features for one profiling interval. Field order is the
// input vector layout and must match feature_vector().
struct CounterSample {
    double cpu_cap_w = 0.0;
    double gpu_cap_w = 0.0;
    double ips = 0.0;         // retired instructions per second
    double mem_tput = 0.0;    // bytes per second
    double sm_clock = 0.0;    // MHz
    double fp_active = 0.0;   // fraction of FP units busy, [0,1]
    double dram_active = 0.0; // fraction of DRAM activity, [0,1]
};

inline constexpr std::size_t kFeatureCount = 7;
extern const char* const kFeatureNames[kFeatureCount]; // csv column names

std::vector<double> feature_vector(const CounterSample& c);
void validate_counters(const CounterSample& c);

// Normalized performance: baseline runtime / runtime under a setting.
// Valid values are in (0, 1.25]; 1.0 means no slowdown.
inline constexpr double kPerfMax = 1.25;

// apps x settings grid of normalized performance with an observed mask.
// Column j always denotes grid.settings()[j].
class PerformanceMatrix {
  public:
    PerformanceMatrix(std::vector<std::string> app_ids, const PowerGrid& grid);
    PerformanceMatrix(std::vector<std::string> app_ids, std::vector<PowerSetting> settings);

    const std::vector<std::string>& app_ids() const { return app_ids_; }
    const std::vector<PowerSetting>& settings() const { return settings_; }
    std::size_t rows() const { return app_ids_.size(); }
    std::size_t cols() const { return settings_.size(); }

    std::size_t app_index(const std::string& app) const;         // throws if unknown
    std::size_t setting_index(PowerSetting s) const;             // throws if unknown

    bool observed(std::size_t i, std::size_t j) const;
    double value(std::size_t i, std::size_t j) const;            // throws if unobserved
    std::size_t observed_count() const;

    void set(std::size_t i, std::size_t j, double v);            // enforces (0, 1.25]
    void set(const std::string& app, PowerSetting s, double v);
    void append_row(const std::string& app);                     // all-missing row

    bool operator==(const PerformanceMatrix& other) const;

  private:
    std::vector<std::string> app_ids_;
    std::vector<PowerSetting> settings_;
    std::vector<double> values_;
    std::vector<std::uint8_t> observed_;
};

// Matrix CSV: header "app,c<CPU>_g<GPU>,..."; one row per application; missing
// entries are empty cells; values in round-trip-exact decimal.
void write_matrix_csv(const PerformanceMatrix& m, std::ostream& out);
void write_matrix_csv(const PerformanceMatrix& m, const std::string& path);
PerformanceMatrix read_matrix_csv(std::istream& in);
PerformanceMatrix read_matrix_csv_file(const std::string& path);

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

// Split one CSV line; empty trailing cells are preserved.
std::vector<std::string> split_csv_line(const std::string& line);

} // namespace opencap
