#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace vizpipe {

/// Uniform integer in [0, bound) using rejection sampling on mt19937_64.
/// Unlike std::uniform_int_distribution the sequence is identical across
/// standard library implementations.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace vizpipe
