#pragma once

#include <cstdint>
#include <random>

namespace dexreg {

// All chains draw from a 64-bit Mersenne Twister. Independent streams for
// replicates and parallel chains are seeded through derive_seed.
using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for stream `index` derived from `master`: splitmix64(master ^ splitmix64(index + 1)).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(master ^ splitmix64(index + 1));
}

inline double draw_normal(Rng& rng, double mean = 0.0, double sd = 1.0) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

inline double draw_uniform(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline bool draw_bernoulli(Rng& rng, double p) { return draw_uniform(rng) < p; }

// Inverse gamma with shape a and scale b (density ∝ x^{-a-1} e^{-b/x}).
inline double draw_inverse_gamma(Rng& rng, double shape, double scale) {
  return scale / std::gamma_distribution<double>(shape, 1.0)(rng);
}

}  // namespace dexreg
