#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace gsnav::rng {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Counter-based deterministic generator.  Every random draw in the project is
/// a pure function of (seed, stream name, counter), so results are identical
/// regardless of evaluation order or parallel scheduling.  Streams derived for
/// independent work items (one per bench trial, one per RANSAC hypothesis)
/// never interleave.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0)
      : key_(mix(seed, detail::fnv1a(stream), index)), counter_(0) {}

  std::uint64_t next_u64() {
    return detail::splitmix64(key_ ^ (0xd1b54a32d192ed03ULL * ++counter_));
  }

  /// Uniform double in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Integer in [0, n); n must be positive.  Uses rejection-free scaling,
  /// acceptable bias for n far below 2^64.
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  /// Standard normal via Box-Muller (one value per call; pairs not cached so
  /// the draw count stays a pure function of call count).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return detail::splitmix64(detail::splitmix64(a ^ 0x9e3779b97f4a7c15ULL) ^
                              detail::splitmix64(b + 0x165667b19e3779f9ULL) ^
                              detail::splitmix64(c + 0x27d4eb2f165667c5ULL));
  }

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace gsnav::rng
