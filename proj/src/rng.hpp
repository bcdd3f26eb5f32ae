#pragma once

#include <cstdint>
#include <random>

namespace ctrlattack::detail {

// Independent generator per (seed, stream) pair.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

enum Stream : std::uint32_t {
  kJitterStream = 1,
  kFeatureNoiseStream = 2,
  kSpreadStream = 3,
};

}  // namespace ctrlattack::detail
