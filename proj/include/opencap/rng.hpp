#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace opencap {

// Seeded RNG with hand-written output transforms. The engine is mt19937_64;
// uniform/normal draws are defined here rather than via std::*_distribution so
// that the byte-level stream depends only on this code and the seed.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive integer range; modulo bias is irrelevant at our span sizes
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo + 1);
        return lo + static_cast<std::int64_t>(eng_() % span);
    }

    // Box-Muller, two uniforms per call, no cached spare
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

  private:
    std::mt19937_64 eng_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derive a sub-seed from a root seed, a tag and an integer; used to give each
// (app, setting, repetition) context its own reproducible stream.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::uint64_t n = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (const char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(root ^ splitmix64(h) ^ splitmix64(n * 0x9e3779b97f4a7c15ULL + 1));
}

} // namespace opencap
