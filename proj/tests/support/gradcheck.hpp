// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "loadcast/model.hpp"
#include "loadcast/random.hpp"
#include "loadcast/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace loadcast::fixtures {

struct GradCase {
  model::Network net;
  std::vector<data::Sample> batch;
};

/// Random small architecture (N <= 3, H <= 5, L <= 2, k <= 6) with
/// perturbed biases/peepholes and a random batch of 4 samples.
inline GradCase random_grad_case(std::uint64_t seed, model::CellKind cell) {
  Rng rng(seed);
  model::NetworkShape s;
  s.cell = cell;
  s.features = 1 + rng.below(3);
  s.hidden = 1 + rng.below(5);
  s.layers = 1 + rng.below(2);
  s.lookback = 1 + rng.below(6);
  GradCase c{model::make_network(s, seed), {}};
  c.net.params.for_each_block([&](const std::string &, auto &block) {
    for (Eigen::Index i = 0; i < block.size(); ++i)
      block.data()[i] += rng.uniform(-0.5, 0.5);
  });
  c.net.target_feature = rng.below(s.features);
  for (int i = 0; i < 4; ++i) {
    data::Sample smp;
    smp.input = Matrix(static_cast<Eigen::Index>(s.lookback),
                       static_cast<Eigen::Index>(s.features));
    smp.target = Matrix(1, static_cast<Eigen::Index>(s.features));
    for (Eigen::Index j = 0; j < smp.input.size(); ++j)
      smp.input.data()[j] = rng.uniform(-1, 1);
    for (Eigen::Index j = 0; j < smp.target.size(); ++j)
      smp.target.data()[j] = rng.uniform(-1, 1);
    c.batch.push_back(std::move(smp));
  }
  return c;
}

struct GradComparison {
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_relative = 0.0;
  std::string worst_block;
};

/// Relative error |a - b| / max(|a|, |b|) on every coordinate where either
/// gradient exceeds `floor` in magnitude.
inline GradComparison compare_gradients(const model::GradientSet &analytic,
                                        const model::GradientSet &numeric,
                                        double tolerance, double floor = 1e-8) {
  GradComparison out;
  std::vector<std::pair<std::string, Vector>> num;
  numeric.for_each_block([&](const std::string &name, const auto &block) {
    num.emplace_back(name, Eigen::Map<const Vector>(block.data(), block.size()));
  });
  std::size_t idx = 0;
  analytic.for_each_block([&](const std::string &name, const auto &block) {
    const Vector &b = num[idx++].second;
    for (Eigen::Index i = 0; i < block.size(); ++i) {
      const double x = block.data()[i], y = b(i);
      const double scale = std::max(std::abs(x), std::abs(y));
      if (scale <= floor)
        continue;
      ++out.checked;
      const double rel = std::abs(x - y) / scale;
      if (rel > out.worst_relative) {
        out.worst_relative = rel;
        out.worst_block = name;
      }
      if (rel > tolerance)
        ++out.violations;
    }
  });
  return out;
}

} // namespace loadcast::fixtures
