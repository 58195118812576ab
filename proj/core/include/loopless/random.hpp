#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace loopless {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits; identical across standard
/// libraries, unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Unbiased uniform integer in [0, m).
inline std::size_t uniform_index(Rng& rng, std::size_t m) {
  const std::uint64_t bound = static_cast<std::uint64_t>(m);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

}  // namespace loopless
