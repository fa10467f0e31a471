#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "gpbag/errors.hpp"

// Deterministic randomness helpers. Everything downstream of a (seed, stream)
// pair is reproducible across platforms and worker counts, so the standard
// distribution classes (whose algorithms are implementation-defined) are
// deliberately avoided; only mt19937_64's raw output is consumed.

namespace gpbag {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Independent seed for a named substream of a base seed. Substreams with
// distinct indices never share an engine state.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x51ab70be1ce4e5b9ull));
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(derive_seed(seed, stream));
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Unbiased integer in [0, n) via rejection sampling.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  if (n == 0) throw InputError("uniform_index: n must be positive");
  const std::uint64_t span = static_cast<std::uint64_t>(n);
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % span;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return static_cast<std::size_t>(draw % span);
}

// Standard normal draw (Box-Muller, one value per call so the engine
// position stays a pure function of the call count).
inline double standard_normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Simple random sample with replacement: `count` indices in [0, n).
inline std::vector<std::size_t> sample_with_replacement(std::mt19937_64& rng, std::size_t n,
                                                        std::size_t count) {
  if (n == 0) throw InputError("sample_with_replacement: empty population");
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = uniform_index(rng, n);
  return out;
}

// Simple random sample without replacement (partial Fisher-Yates, returned
// in draw order).
inline std::vector<std::size_t> sample_without_replacement(std::mt19937_64& rng, std::size_t n,
                                                           std::size_t count) {
  if (count > n) throw InputError("sample_without_replacement: count exceeds population");
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + uniform_index(rng, n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

inline std::vector<std::size_t> shuffled_indices(std::mt19937_64& rng, std::size_t n) {
  return sample_without_replacement(rng, n, n);
}

}  // namespace gpbag
