#include "opencap/phasedet.hpp"

#include <cmath>
#include <stdexcept>

namespace opencap::phase {

std::size_t DetectorConfig::sample_count() const {
    return static_cast<std::size_t>(std::llround(window_s / delta_s));
}

void DetectorConfig::validate() const {
    if (delta_s <= 0 || window_s <= 0 || p_th_w <= 0)
        throw std::invalid_argument("detector config: fields must be positive");
    const std::size_t n = sample_count();
    if (n == 0 || std::abs(static_cast<double>(n) * delta_s - window_s) > 1e-9)
        throw std::invalid_argument("detector config: window_s must be a multiple of delta_s");
    // the window subdivides into whole 1-second intervals
    const double per_sec = 1.0 / delta_s;
    if (std::abs(per_sec - std::round(per_sec)) > 1e-9 ||
        std::abs(window_s - std::round(window_s)) > 1e-9)
        throw std::invalid_argument("detector config: window must split into 1-second intervals");
}

Detector::Detector(DetectorConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    buffer_.assign(cfg_.sample_count(), 0.0);
}

Decision Detector::feed(double p_w) {
    if (fired_) throw std::logic_error("detector already fired; reset() before feeding");
    if (p_w < 0) throw std::invalid_argument("negative power sample");
    buffer_[head_] = p_w;
    head_ = (head_ + 1) % buffer_.size();
    if (size_ < buffer_.size()) ++size_;
    ++samples_seen_;
    if (size_ < buffer_.size()) return Decision::pending;
    // Full window: the per-1-second-interval scan reduces to "no sample in the
    // buffer below threshold" (see the equivalence test against the literal
    // interval subdivision).
    for (const double v : buffer_)
        if (v < cfg_.p_th_w) return Decision::pending;
    fired_ = true;
    return Decision::transition;
}

void Detector::reset() {
    head_ = 0;
    size_ = 0;
    samples_seen_ = 0;
    fired_ = false;
}

std::optional<double> detect_offline(const sim::PowerTrace& trace, const DetectorConfig& cfg) {
    if (!trace.samples.empty() && std::abs(trace.dt - cfg.delta_s) > 1e-9)
        throw std::invalid_argument("trace sampling interval does not match detector delta");
    Detector det(cfg);
    for (const auto& s : trace.samples)
        if (det.feed(s.gpu_power_w) == Decision::transition) return s.t_s;
    return std::nullopt;
}

} // namespace opencap::phase
