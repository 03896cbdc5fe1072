#pragma once

#include <cstdint>
#include <random>

namespace lsem {

/// Every stochastic operation takes an explicit generator; nothing seeds from
/// the wall clock.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer; decorrelates consecutive integer seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for trial `index` of a loop whose base seed is `base`. Trials seeded
/// this way give the same result in any execution order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return mix_seed(mix_seed(base) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(mix_seed(seed)); }

}  // namespace lsem
