#pragma once
#include <cmath>
#include <cstdint>
#include <random>

namespace hvc {

/// splitmix64 hash step; used both as a seed mixer and to derive independent
/// per-task seeds from (base seed, task id) so thread schedule cannot change
/// any result.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d4a2ca9f13d135ULL;
    return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t base, uint64_t id) {
    return splitmix64(base ^ splitmix64(id + 0x632be59bd9b4e019ULL));
}

/// Deterministic RNG wrapper. mt19937_64 output is pinned by the standard;
/// the transforms below are hand-rolled because std::*_distribution sequences
/// are implementation-defined and would break cross-platform determinism.
class Rng {
  public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n) {
        // rejection sampling to avoid modulo bias
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = eng_();
        } while (v >= limit);
        return v % n;
    }

    /// Standard normal via Box-Muller (cached second value).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

  private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace hvc
