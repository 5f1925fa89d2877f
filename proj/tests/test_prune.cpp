// SPDX-License-Identifier: Apache-2.0
#include "loadcast/error.hpp"
#include "loadcast/prune.hpp"
#include "loadcast/random.hpp"
#include "support/reference.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

using namespace loadcast;
using namespace loadcast::prune;
using model::CellKind;

namespace {

model::Network perturbed(model::NetworkShape shape, std::uint64_t seed) {
  auto net = model::make_network(shape, seed);
  Rng rng(seed + 99);
  net.params.for_each_block([&](const std::string &, auto &block) {
    for (Eigen::Index i = 0; i < block.size(); ++i)
      block.data()[i] += rng.uniform(-0.2, 0.2);
  });
  return net;
}

Matrix random_window(Rng &rng, std::size_t k, std::size_t n) {
  Matrix w(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w.data()[i] = rng.uniform(-1, 1);
  return w;
}

fixtures::UnitMask mask_from(const model::Network &net, const PruneReport &report) {
  fixtures::UnitMask mask;
  for (std::size_t l = 0; l < net.params.layers.size(); ++l) {
    mask.emplace_back(net.params.layers[l].hidden_width(), true);
    for (auto u : report.removed[l])
      mask.back()[u] = false;
  }
  return mask;
}

} // namespace

TEST(Scores, ZeroRowScoresZero) {
  const auto layer = model::LayerParams::zeros(CellKind::lstm, 3, 4);
  EXPECT_EQ(unit_l1_scores(layer), Vector(Vector::Zero(4)));
}

TEST(Scores, SingleGateToy) {
  auto layer = model::LayerParams::zeros(CellKind::gru, 2, 2);
  layer.input_weights[0] << 1, -2, 0.5, 0.5;
  const Vector s = unit_l1_scores(layer);
  EXPECT_DOUBLE_EQ(s(0), 3.0);
  EXPECT_DOUBLE_EQ(s(1), 1.0);
}

TEST(Scores, BruteForceAndNegationProperty) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto cell = trial % 2 ? CellKind::lstm : CellKind::gru;
    auto net = perturbed({cell, 3, 1 + rng.below(6), 2, 3}, static_cast<std::uint64_t>(trial));
    for (std::size_t l = 0; l < 2; ++l) {
      const auto &p = net.params.layers[l];
      const Vector s = unit_l1_scores(net, l);
      for (Eigen::Index u = 0; u < s.size(); ++u) {
        double want = 0;
        for (const auto &w : p.input_weights)
          for (Eigen::Index j = 0; j < w.cols(); ++j)
            want += std::abs(w(u, j));
        for (const auto &w : p.recurrent_weights)
          for (Eigen::Index j = 0; j < w.cols(); ++j)
            want += std::abs(w(u, j));
        for (const auto &b : p.biases)
          want += std::abs(b(u));
        for (const auto &v : p.peepholes)
          want += std::abs(v(u));
        EXPECT_NEAR(s(u), want, 1e-12);
      }
      auto negated = net;
      negated.params.for_each_block(
          [](const std::string &, auto &block) { block = -block; });
      EXPECT_EQ(unit_l1_scores(negated, l), s);
    }
  }
}

TEST(Select, LowestScores) {
  Vector s(4);
  s << 0.1, 5.0, 0.3, 2.0;
  EXPECT_EQ(select_prune_units(s, {Method::l1, 0.25, 0}), (std::vector<std::size_t>{0}));
  EXPECT_EQ(select_prune_units(s, {Method::l1, 0.5, 0}),
            (std::vector<std::size_t>{0, 2}));
}

TEST(Select, TiesGoToLowerIndex) {
  Vector s(4);
  s << 1.0, 1.0, 1.0, 1.0;
  EXPECT_EQ(select_prune_units(s, {Method::l1, 0.5, 0}),
            (std::vector<std::size_t>{0, 1}));
}

TEST(Select, RemovalCountFloor) {
  EXPECT_EQ(removal_count(0.05, 64), 3u);
  EXPECT_EQ(removal_count(0.1, 64), 6u);
  EXPECT_EQ(removal_count(0.2, 64), 12u);
  EXPECT_EQ(removal_count(0.0, 64), 0u);
  EXPECT_THROW(removal_count(1.0, 64), ConfigError);
  EXPECT_THROW(removal_count(-0.1, 64), ConfigError);
  EXPECT_EQ(removal_count(0.9, 1), 0u);
  EXPECT_EQ(removal_count(0.99, 100), 99u);
}

TEST(Select, RandomIsSeededSubset) {
  const PruneSpec spec{Method::random, 0.25, 7};
  const auto a = select_random_units(40, spec, 7);
  const auto b = select_random_units(40, spec, 7);
  const auto c = select_random_units(40, spec, 8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  ASSERT_EQ(a.size(), 10u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 10u);
  EXPECT_LT(a.back(), 40u);
}

TEST(PruneNetwork, AmountZeroIsIdentity) {
  const auto net = perturbed({CellKind::gru, 4, 8, 2, 5}, 1);
  const auto r = prune_network(net, {Method::l1, 0.0, 0});
  EXPECT_EQ(model::flatten(r.network.params), model::flatten(net.params));
  for (const auto &l : r.report.removed)
    EXPECT_TRUE(l.empty());
  EXPECT_EQ(r.report.params_before, r.report.params_after);
  EXPECT_EQ(r.report.flops_before, r.report.flops_after);
}

TEST(PruneNetwork, L1RemovesLowestThreePerLayer) {
  const auto net = perturbed({CellKind::gru, 4, 64, 3, 4}, 2);
  const auto r = prune_network(net, {Method::l1, 0.05, 0});
  ASSERT_EQ(r.report.removed.size(), 3u);
  for (std::size_t l = 0; l < 3; ++l) {
    ASSERT_EQ(r.report.removed[l].size(), 3u);
    const Vector s = unit_l1_scores(net, l);
    std::vector<std::size_t> order(64);
    for (std::size_t i = 0; i < 64; ++i)
      order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
      return s(static_cast<Eigen::Index>(a)) < s(static_cast<Eigen::Index>(b));
    });
    std::vector<std::size_t> want(order.begin(), order.begin() + 3);
    std::sort(want.begin(), want.end());
    EXPECT_EQ(r.report.removed[l], want);
    EXPECT_EQ(r.network.params.layers[l].hidden_width(), 61u);
  }
  EXPECT_LT(r.report.params_after, r.report.params_before);
  EXPECT_EQ(r.report.params_after, model::param_count(r.network));
  EXPECT_NO_THROW(r.network.validate());
}

TEST(PruneNetwork, CompactedEqualsMaskedProperty) {
  Rng rng(21);
  for (auto cell : {CellKind::gru, CellKind::lstm})
    for (auto method : {Method::l1, Method::random})
      for (double amount : {0.05, 0.1, 0.2, 0.5}) {
        const auto net = perturbed({cell, 3, 20, 2, 5}, rng.below(1000));
        const auto r = prune_network(net, {method, amount, 3});
        const auto mask = mask_from(net, r.report);
        for (int i = 0; i < 10; ++i) {
          const Matrix w = random_window(rng, 5, 3);
          const Vector got = model::network_forward(r.network, w).prediction;
          const Vector want = fixtures::reference_forward(net, w, &mask);
          EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-12);
        }
      }
}

TEST(PruneNetwork, FlopsAndCountsShrink) {
  const auto net = perturbed({CellKind::lstm, 4, 32, 2, 6}, 3);
  std::int64_t previous = model::flop_count_per_forecast(net).total();
  for (double amount : {0.05, 0.1, 0.2}) {
    const auto r = prune_network(net, {Method::l1, amount, 0});
    EXPECT_EQ(r.report.flops_before, model::flop_count_per_forecast(net).total());
    EXPECT_EQ(r.report.flops_after, model::flop_count_per_forecast(r.network).total());
    EXPECT_LT(r.report.flops_after, previous);
    previous = r.report.flops_after;
  }
}

TEST(PruneNetwork, RecurrentRatioSingleLayer) {
  const auto net = perturbed({CellKind::gru, 4, 50, 1, 6}, 4);
  const auto r = prune_network(net, {Method::l1, 0.2, 0});
  const auto before = model::flop_count_per_forecast(net);
  const auto after = model::flop_count_per_forecast(r.network);
  EXPECT_EQ(after.recurrent * 25, before.recurrent * 16);
}

TEST(PruneNetwork, RandomDeterministicAcrossRuns) {
  const auto net = perturbed({CellKind::gru, 4, 16, 2, 3}, 5);
  const auto a = prune_network(net, {Method::random, 0.25, 7});
  const auto b = prune_network(net, {Method::random, 0.25, 7});
  EXPECT_EQ(a.report.removed, b.report.removed);
  EXPECT_EQ(model::flatten(a.network.params), model::flatten(b.network.params));
}

TEST(PruneNetwork, InputLeftUntouched) {
  const auto net = perturbed({CellKind::gru, 4, 16, 2, 3}, 6);
  const Vector before = model::flatten(net.params);
  (void)prune_network(net, {Method::l1, 0.25, 0});
  EXPECT_EQ(model::flatten(net.params), before);
}

TEST(RemoveUnits, RejectsBadLists) {
  auto net = perturbed({CellKind::gru, 2, 4, 1, 2}, 7);
  EXPECT_THROW(remove_units(net, 0, {2, 1}), InternalError);
  EXPECT_THROW(remove_units(net, 0, {5}), InternalError);
  EXPECT_THROW(remove_units(net, 3, {0}), InternalError);
}

TEST(PruneReportJson, HasFields) {
  const auto net = perturbed({CellKind::gru, 2, 8, 1, 2}, 8);
  const auto r = prune_network(net, {Method::l1, 0.25, 0});
  std::ostringstream os;
  write_report_json(os, r.report);
  for (const char *key : {"\"method\"", "\"amount\"", "\"removed\"", "\"params_before\"",
                          "\"params_after\"", "\"flops_before\"", "\"flops_after\""})
    EXPECT_NE(os.str().find(key), std::string::npos) << key;
}
