#include "opencap/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace opencap::kern {

#if defined(__x86_64__) || defined(_M_X64)
const Ops& avx2_ops_impl();
#endif

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

namespace {

Lane env_lane() {
    const char* e = std::getenv("OPENCAP_KERNEL");
    if (e != nullptr) {
        if (std::strcmp(e, "scalar") == 0) return Lane::scalar;
        if (std::strcmp(e, "avx2") == 0 && avx2_available()) return Lane::avx2;
        // "auto" or anything unrecognized falls through to detection
    }
    return avx2_available() ? Lane::avx2 : Lane::scalar;
}

std::atomic<Lane>& lane_slot() {
    static std::atomic<Lane> lane{env_lane()};
    return lane;
}

} // namespace

Lane active_lane() { return lane_slot().load(std::memory_order_relaxed); }

bool force_lane(Lane lane) {
    if (lane == Lane::avx2 && !avx2_available()) return false;
    lane_slot().store(lane, std::memory_order_relaxed);
    return true;
}

std::string lane_name(Lane lane) { return lane == Lane::avx2 ? "avx2" : "scalar"; }

const Ops& ops() {
#if defined(__x86_64__) || defined(_M_X64)
    if (active_lane() == Lane::avx2) return avx2_ops_impl();
#endif
    return scalar_ops();
}

} // namespace opencap::kern
