// SPDX-License-Identifier: Apache-2.0
// Seeded synthetic series shared by the unit and acceptance tests.
#pragma once

#include "loadcast/linalg.hpp"
#include "loadcast/random.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>

namespace loadcast::fixtures {

/// Four coupled sines plus a small AR(1) disturbance per feature. Feature 0
/// mixes in features 1 and 2 so the multivariate input carries information.
inline Matrix coupled_sines(std::size_t length, std::uint64_t seed,
                            double noise = 0.01) {
  Rng rng(seed);
  const double two_pi = 2.0 * std::numbers::pi;
  const double periods[4] = {10.0, 17.0, 7.0, 25.0};
  double phases[4];
  for (double &p : phases)
    p = rng.uniform(0.0, two_pi);
  Matrix values(static_cast<Eigen::Index>(length), 4);
  double ar[4] = {0, 0, 0, 0};
  for (std::size_t t = 0; t < length; ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    double base[4];
    for (int f = 0; f < 4; ++f) {
      base[f] = std::sin(two_pi * static_cast<double>(t) / periods[f] + phases[f]);
      ar[f] = 0.7 * ar[f] + noise * rng.normal();
    }
    values(r, 0) = base[0] + 0.4 * base[1] + 0.3 * base[2] + ar[0];
    values(r, 1) = base[1] + ar[1];
    values(r, 2) = base[2] + 0.2 * base[0] + ar[2];
    values(r, 3) = 0.5 * base[3] + 0.5 * base[1] + ar[3];
  }
  return values;
}

/// Two regimes split at the midpoint: the second half uses a different
/// period and amplitude for every feature. Values are already in [0, 1]-ish
/// range so no scaler is needed.
inline Matrix two_regime_stream(std::size_t length, std::uint64_t seed,
                                double noise = 0.005) {
  Rng rng(seed);
  const double two_pi = 2.0 * std::numbers::pi;
  Matrix values(static_cast<Eigen::Index>(length), 2);
  for (std::size_t t = 0; t < length; ++t) {
    const bool second = t >= length / 2;
    const double period = second ? 9.0 : 24.0;
    const double amplitude = second ? 0.4 : 0.15;
    const double level = second ? 0.4 : 0.5;
    const double phase = two_pi * static_cast<double>(t) / period;
    const auto r = static_cast<Eigen::Index>(t);
    values(r, 0) = level + amplitude * std::sin(phase) + noise * rng.normal();
    values(r, 1) = level + amplitude * std::cos(phase) + noise * rng.normal();
  }
  return values;
}

} // namespace loadcast::fixtures
