// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "deitsp/errors.hpp"

namespace deitsp {

// splitmix64 step; used to stretch a (seed, stream) pair into mt19937_64
// seed material so that nearby seeds / stream ids give unrelated sequences.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s ^= stream * 0x9e3779b97f4a7c15ull;
  std::uint64_t b = splitmix64(s);
  return a ^ (b + 0x2545f4914f6cdd1dull);
}

// Deterministic RNG with named sub-streams. All derived quantities
// (uniform doubles, bounded ints) are computed from raw 64-bit draws rather
// than std::*_distribution, whose output is implementation-defined and would
// break byte-identical replay across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : Rng(seed, 0) {}
  Rng(std::uint64_t seed, std::uint64_t stream)
      : gen_(mix_seed(seed, stream)) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1): top 53 bits of one draw.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, n). Rejection sampling, no modulo bias.
  int uniform_int(int n) {
    if (n <= 0) throw UsageError("uniform_int: n must be positive");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<int>(x % un);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Fisher-Yates over [first, last).
  template <typename It>
  void shuffle(It first, It last) {
    const auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
      auto j = uniform_int(static_cast<int>(i + 1));
      std::swap(first[i], first[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace deitsp
