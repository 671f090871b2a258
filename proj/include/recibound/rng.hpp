#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace recibound {

/// splitmix64 step; used to derive independent stream seeds from a master
/// seed without correlated low bits.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0, 1) with 53 random bits. Avoids
/// std::uniform_real_distribution, whose output is implementation-defined.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in (0, 1]; safe to feed into log().
inline double uniform01_open(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n).
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  // Rejection-free modulo is biased for huge n; n here is tiny relative to
  // 2^64 so the bias is far below any tolerance in this library.
  return static_cast<std::size_t>(rng() % n);
}

/// Standard Gumbel draw, used for top-m sampling without replacement.
inline double gumbel(std::mt19937_64& rng) {
  return -std::log(-std::log(uniform01_open(rng)));
}

}  // namespace recibound
