// SPDX-License-Identifier: Apache-2.0
// Copyright (c) the kahc project authors.
//
// Deterministic random-number utilities.
//
// Everything stochastic in the library flows through this header so that a
// fixed seed yields bit-identical results across platforms and runs.  The
// engine is std::mt19937_64 (whose output sequence is specified by the
// standard); the distributions are implemented here instead of using
// std::uniform_real_distribution / std::normal_distribution because the
// standard leaves those implementation-defined.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "kahc/core.hpp"

namespace kahc {

/// Fast 64-bit mixer used to derive independent child seeds from a master
/// seed, e.g. one seed per grid cell or per ensemble member.  Calling it
/// repeatedly on its own output walks a well-distributed sequence.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded random generator with portable uniform/normal/sampling primitives.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1): top 53 bits of the engine output.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in (0, 1]; never returns 0, safe under log().
  double uniform_pos() {
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Uniform integer in [0, bound) without modulo bias (rejection sampling).
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw argument_error("Rng::below: bound must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  /// k distinct indices drawn uniformly from {0, ..., n-1} via a partial
  /// Fisher-Yates shuffle; order of the result is the draw order.
  std::vector<index_t> sample_without_replacement(index_t n, index_t k) {
    if (k > n) {
      throw argument_error(
          "Rng::sample_without_replacement: k exceeds population size");
    }
    std::vector<index_t> pool(n);
    for (index_t i = 0; i < n; ++i) pool[i] = i;
    for (index_t i = 0; i < k; ++i) {
      const index_t j = i + static_cast<index_t>(below(n - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace kahc
