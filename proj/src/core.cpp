#include "opencap/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace opencap {

const char* const kFeatureNames[kFeatureCount] = {
    "cpu_cap_w", "gpu_cap_w", "ips", "mem_tput", "sm_clock", "fp_active", "dram_active"};

std::string setting_label(PowerSetting s) {
    return "c" + std::to_string(s.cpu_cap_w) + "_g" + std::to_string(s.gpu_cap_w);
}

std::optional<PowerSetting> parse_setting_label(const std::string& label) {
    if (label.size() < 4 || label[0] != 'c') return std::nullopt;
    const auto sep = label.find("_g");
    if (sep == std::string::npos || sep == 1 || sep + 2 >= label.size()) return std::nullopt;
    int cpu = 0, gpu = 0;
    const char* cb = label.data() + 1;
    const char* ce = label.data() + sep;
    const char* gb = label.data() + sep + 2;
    const char* ge = label.data() + label.size();
    auto rc = std::from_chars(cb, ce, cpu);
    auto rg = std::from_chars(gb, ge, gpu);
    if (rc.ec != std::errc{} || rc.ptr != ce || rg.ec != std::errc{} || rg.ptr != ge) return std::nullopt;
    if (cpu <= 0 || gpu <= 0) return std::nullopt;
    return PowerSetting{cpu, gpu};
}

namespace {

void check_caps(const std::vector<int>& caps, const char* which) {
    if (caps.empty()) throw std::invalid_argument(std::string(which) + " cap list is empty");
    for (std::size_t i = 0; i < caps.size(); ++i) {
        if (caps[i] <= 0) throw std::invalid_argument(std::string(which) + " caps must be positive watts");
        if (i > 0 && caps[i] <= caps[i - 1])
            throw std::invalid_argument(std::string(which) + " caps must be strictly increasing");
    }
}

} // namespace

PowerGrid::PowerGrid(std::vector<int> cpu_caps, std::vector<int> gpu_caps)
    : cpu_caps_(std::move(cpu_caps)), gpu_caps_(std::move(gpu_caps)) {
    check_caps(cpu_caps_, "cpu");
    check_caps(gpu_caps_, "gpu");
}

PowerGrid PowerGrid::default_grid() {
    return PowerGrid({100, 125, 150, 175, 200}, {100, 150, 200, 250});
}

std::vector<PowerSetting> PowerGrid::settings() const {
    std::vector<PowerSetting> out;
    out.reserve(cpu_caps_.size() * gpu_caps_.size());
    for (const int c : cpu_caps_)
        for (const int g : gpu_caps_) out.push_back({c, g});
    return out;
}

bool PowerGrid::contains(PowerSetting s) const {
    return std::binary_search(cpu_caps_.begin(), cpu_caps_.end(), s.cpu_cap_w) &&
           std::binary_search(gpu_caps_.begin(), gpu_caps_.end(), s.gpu_cap_w);
}

std::vector<double> feature_vector(const CounterSample& c) {
    return {c.cpu_cap_w, c.gpu_cap_w, c.ips, c.mem_tput, c.sm_clock, c.fp_active, c.dram_active};
}

void validate_counters(const CounterSample& c) {
    const auto bad = [](double v) { return !std::isfinite(v); };
    for (const double v : feature_vector(c))
        if (bad(v)) throw std::invalid_argument("non-finite counter value");
    if (c.ips < 0 || c.mem_tput < 0 || c.sm_clock < 0)
        throw std::invalid_argument("negative counter value");
    if (c.fp_active < 0 || c.fp_active > 1 || c.dram_active < 0 || c.dram_active > 1)
        throw std::invalid_argument("activity fraction outside [0,1]");
}

namespace {

void check_app_ids(const std::vector<std::string>& ids) {
    if (ids.empty()) throw std::invalid_argument("app id list is empty");
    std::set<std::string> seen;
    for (const auto& id : ids) {
        if (id.empty()) throw std::invalid_argument("empty app id");
        if (id.find_first_of(",\n\r") != std::string::npos)
            throw std::invalid_argument("app id contains csv delimiter: " + id);
        if (!seen.insert(id).second) throw std::invalid_argument("duplicate app id: " + id);
    }
}

} // namespace

PerformanceMatrix::PerformanceMatrix(std::vector<std::string> app_ids, const PowerGrid& grid)
    : PerformanceMatrix(std::move(app_ids), grid.settings()) {}

PerformanceMatrix::PerformanceMatrix(std::vector<std::string> app_ids, std::vector<PowerSetting> settings)
    : app_ids_(std::move(app_ids)), settings_(std::move(settings)) {
    check_app_ids(app_ids_);
    if (settings_.empty()) throw std::invalid_argument("empty setting list");
    std::set<PowerSetting> seen(settings_.begin(), settings_.end());
    if (seen.size() != settings_.size()) throw std::invalid_argument("duplicate setting");
    values_.assign(rows() * cols(), 0.0);
    observed_.assign(rows() * cols(), 0);
}

std::size_t PerformanceMatrix::app_index(const std::string& app) const {
    const auto it = std::find(app_ids_.begin(), app_ids_.end(), app);
    if (it == app_ids_.end()) throw std::invalid_argument("unknown app id: " + app);
    return static_cast<std::size_t>(it - app_ids_.begin());
}

std::size_t PerformanceMatrix::setting_index(PowerSetting s) const {
    const auto it = std::find(settings_.begin(), settings_.end(), s);
    if (it == settings_.end()) throw std::invalid_argument("unknown setting: " + setting_label(s));
    return static_cast<std::size_t>(it - settings_.begin());
}

bool PerformanceMatrix::observed(std::size_t i, std::size_t j) const {
    if (i >= rows() || j >= cols()) throw std::out_of_range("matrix index out of range");
    return observed_[i * cols() + j] != 0;
}

double PerformanceMatrix::value(std::size_t i, std::size_t j) const {
    if (!observed(i, j)) throw std::invalid_argument("reading unobserved matrix entry");
    return values_[i * cols() + j];
}

std::size_t PerformanceMatrix::observed_count() const {
    std::size_t n = 0;
    for (const auto o : observed_) n += o;
    return n;
}

void PerformanceMatrix::set(std::size_t i, std::size_t j, double v) {
    if (i >= rows() || j >= cols()) throw std::out_of_range("matrix index out of range");
    if (!std::isfinite(v) || v <= 0.0 || v > kPerfMax)
        throw std::invalid_argument("normalized performance outside (0, 1.25]: " + format_double(v));
    values_[i * cols() + j] = v;
    observed_[i * cols() + j] = 1;
}

void PerformanceMatrix::set(const std::string& app, PowerSetting s, double v) {
    set(app_index(app), setting_index(s), v);
}

void PerformanceMatrix::append_row(const std::string& app) {
    auto ids = app_ids_;
    ids.push_back(app);
    check_app_ids(ids);
    app_ids_ = std::move(ids);
    values_.resize(rows() * cols(), 0.0);
    observed_.resize(rows() * cols(), 0);
}

bool PerformanceMatrix::operator==(const PerformanceMatrix& other) const {
    if (app_ids_ != other.app_ids_ || settings_ != other.settings_) return false;
    if (observed_ != other.observed_) return false;
    for (std::size_t k = 0; k < values_.size(); ++k)
        if (observed_[k] && values_[k] != other.values_[k]) return false;
    return true;
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (const char ch : line) {
        if (ch == ',') {
            cells.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    cells.push_back(std::move(cur));
    return cells;
}

void write_matrix_csv(const PerformanceMatrix& m, std::ostream& out) {
    out << "app";
    for (const auto s : m.settings()) out << ',' << setting_label(s);
    out << '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out << m.app_ids()[i];
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out << ',';
            if (m.observed(i, j)) out << format_double(m.value(i, j));
        }
        out << '\n';
    }
}

void write_matrix_csv(const PerformanceMatrix& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    write_matrix_csv(m, f);
}

PerformanceMatrix read_matrix_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw config_error("matrix csv: empty file");
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "app")
        throw config_error("matrix csv: header must start with 'app'");
    if (header.size() < 2) throw config_error("matrix csv: no setting columns");
    std::vector<PowerSetting> settings;
    for (std::size_t j = 1; j < header.size(); ++j) {
        const auto s = parse_setting_label(header[j]);
        if (!s) throw config_error("matrix csv: bad setting label '" + header[j] + "'");
        settings.push_back(*s);
    }
    std::vector<std::string> apps;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw config_error("matrix csv: ragged row for '" + (cells.empty() ? "" : cells[0]) + "'");
        apps.push_back(cells[0]);
        rows.push_back(std::move(cells));
    }
    PerformanceMatrix m(apps, settings);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < settings.size(); ++j) {
            const std::string& cell = rows[i][j + 1];
            if (cell.empty()) continue;
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
                throw config_error("matrix csv: non-numeric cell '" + cell + "'");
            m.set(i, j, v);
        }
    }
    return m;
}

PerformanceMatrix read_matrix_csv_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw missing_artifact_error("missing matrix csv: " + path);
    return read_matrix_csv(f);
}

} // namespace opencap
