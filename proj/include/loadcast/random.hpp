// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

namespace loadcast {

/// Seeded generator with library-independent draws: the same seed yields the
/// same doubles on every standard library, which keeps model files
/// byte-reproducible.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), rejection sampled.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = engine_();
    while (v >= limit)
      v = engine_();
    return v % n;
  }

  /// Standard normal via Box-Muller.
  double normal();

private:
  std::mt19937_64 engine_;
};

} // namespace loadcast
