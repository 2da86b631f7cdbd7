#pragma once

#include <cmath>
#include <cstdint>

namespace mfsbm {

// Counter-based random streams in the SplittableRandom style: the i-th output
// of a stream is mix(key + i*GAMMA), so any number of statistically independent
// streams can be derived from (seed, tag...) keys without shared state.  This
// is what makes Monte Carlo results reproducible for a fixed configuration
// regardless of how samples are distributed over threads.

namespace detail {

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

/// Stafford "mix13" finalizer of splitmix64.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

} // namespace detail

/// Derives a stream key from a seed and up to four integer tags.  Each tag is
/// folded through the mixer so that nearby tags give unrelated keys.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a = 0,
                                std::uint64_t b = 0, std::uint64_t c = 0,
                                std::uint64_t d = 0) {
  std::uint64_t h = detail::mix64(seed + detail::kGamma);
  h = detail::mix64(h ^ detail::mix64(a + 0x8000000000000001ULL));
  h = detail::mix64(h ^ detail::mix64(b + 0x8000000000000003ULL));
  h = detail::mix64(h ^ detail::mix64(c + 0x8000000000000005ULL));
  h = detail::mix64(h ^ detail::mix64(d + 0x8000000000000007ULL));
  return h;
}

/// Keyed counter RNG.  Cheap to construct, no warm-up, no shared state.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return detail::mix64(key_ + (++counter_) * detail::kGamma); }

  /// Uniform on the open interval (0, 1); never returns an exact endpoint.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform on (lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (have_cache_) {
      have_cache_ = false;
      return cache_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cache_ = r * std::sin(a);
    have_cache_ = true;
    return r * std::cos(a);
  }

  /// Exponential with the given rate (mean 1/rate).
  double exponential(double rate) { return -std::log(uniform()) / rate; }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cache_ = 0.0;
  bool have_cache_ = false;
};

} // namespace mfsbm
