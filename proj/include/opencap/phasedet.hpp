#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "opencap/simnode.hpp"

namespace opencap::phase {

// Sliding-window transition detector over GPU power. Defaults: 0.2 s sampling,
// 5 s window, 60 W threshold, 25-sample buffer.
struct DetectorConfig {
    double delta_s = 0.2;
    double window_s = 5.0;
    double p_th_w = 60.0;

    std::size_t sample_count() const; // n = window_s / delta_s
    void validate() const;
};

enum class Decision { pending, transition };

// One-shot CPU->GPU detector: fires once when a full window holds at or above
// the threshold; must be reset() before further feeding.
class Detector {
  public:
    explicit Detector(DetectorConfig cfg);

    // p is the next GPU power reading, delta_s after the previous one
    Decision feed(double p_w);
    void reset();

    bool fired() const { return fired_; }
    std::size_t samples_seen() const { return samples_seen_; }
    std::size_t buffer_size() const { return size_; }
    const DetectorConfig& config() const { return cfg_; }

  private:
    DetectorConfig cfg_;
    std::vector<double> buffer_; // circular, capacity n
    std::size_t head_ = 0;       // next write slot
    std::size_t size_ = 0;
    std::size_t samples_seen_ = 0;
    bool fired_ = false;
};

// Batch wrapper: timestamp of the sample on which the streaming detector first
// fires, or nullopt. Requires trace.dt == cfg.delta_s.
std::optional<double> detect_offline(const sim::PowerTrace& trace, const DetectorConfig& cfg);

} // namespace opencap::phase
