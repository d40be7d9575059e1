#pragma once

// Deterministic RNG plumbing. All randomness in the project flows through
// mt19937_64 engines seeded by mixing a base seed with a stream label, so
// every component (init, masks, data order) draws from an independent,
// reproducible stream. Distributions are hand-rolled on top of the raw
// engine output: std::uniform_real_distribution et al. are not pinned by
// the standard and would break bitwise reproducibility across toolchains.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace hgin {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Combines a base seed with stream labels (string or counter) into a fresh
// engine seed. Order of mixing matters; keep call sites consistent.
inline std::uint64_t mix_seed(std::uint64_t base, std::string_view stream,
                              std::uint64_t index = 0) {
    return splitmix64(base ^ splitmix64(fnv1a(stream) + index * 0x9e3779b97f4a7c15ULL));
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Inclusive integer range.
    int uniform_int(int lo, int hi) {
        if (hi <= lo) return lo;
        auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(eng_() % span);
    }

    // Box-Muller; consumes two uniforms per call, no caching so the stream
    // position stays easy to reason about.
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

  private:
    std::mt19937_64 eng_;
};

}  // namespace hgin
