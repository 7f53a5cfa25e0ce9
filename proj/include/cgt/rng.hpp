#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cgt {

using Rng = std::mt19937_64;

// Uniform double in [0, 1).
inline double uniform01(Rng& rng) {
  return (rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [lo, hi] inclusive.
inline int uniform_int(Rng& rng, int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  return d(rng);
}

// Box-Muller, cosine branch only. Kept hand-rolled so the stream is stable
// across standard library implementations.
inline double normal_sample(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

inline bool bernoulli(Rng& rng, double p) {
  return uniform01(rng) < p;
}

// Mixes several seed components into one engine seed (splitmix64 rounds).
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL;
  auto round = [](std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  z = round(z) ^ b;
  z = round(z + 0x9e3779b97f4a7c15ULL) ^ c;
  return round(z + 0x9e3779b97f4a7c15ULL);
}

}  // namespace cgt
