// SPDX-License-Identifier: Apache-2.0
#include "loadcast/train.hpp"

#include "loadcast/csv.hpp"
#include "loadcast/error.hpp"
#include "loadcast/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <tuple>

namespace loadcast::train {

std::string_view to_string(Optimizer optimizer) {
  return optimizer == Optimizer::gd ? "gd" : "lbfgs";
}

Optimizer parse_optimizer(std::string_view text) {
  if (text == "gd" || text == "GD")
    return Optimizer::gd;
  if (text == "lbfgs" || text == "LBFGS" || text == "l-bfgs")
    return Optimizer::lbfgs;
  throw ConfigError("unknown optimizer '" + std::string(text) +
                    "' (expected gd or lbfgs)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning rate must be positive");
  if (epochs < 1)
    throw ConfigError("epochs must be >= 1");
  if (batch_size < 1)
    throw ConfigError("batch size must be >= 1");
  if (lbfgs_memory < 1)
    throw ConfigError("lbfgs memory must be >= 1");
  if (lbfgs_max_iters < 1)
    throw ConfigError("lbfgs max iterations must be >= 1");
  if (!(convergence_tol > 0.0))
    throw ConfigError("convergence tolerance must be positive");
  if (clip_norm < 0.0)
    throw ConfigError("clip norm must be >= 0");
}

void GridSpec::validate() const {
  if (hidden_sizes.empty() || layer_counts.empty() || lookbacks.empty())
    throw ConfigError("grid search space has an empty dimension");
  for (const auto *set : {&hidden_sizes, &layer_counts, &lookbacks})
    if (set->count(0))
      throw ConfigError("grid search values must be >= 1");
}

namespace {

void zero_biases(model::GradientSet &grads) {
  for (auto &layer : grads.layers)
    for (auto &b : layer.biases)
      b.setZero();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

void train_gd(model::Network &net, const data::WindowedDataset &train_set,
              const TrainConfig &config, TrainReport &report) {
  const std::span<const data::Sample> all(train_set.samples);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t begin = 0; begin < all.size(); begin += config.batch_size) {
      const auto batch = all.subspan(begin, std::min(config.batch_size,
                                                     all.size() - begin));
      LossAndGradient lg;
      try {
        lg = backprop(net, batch);
      } catch (const NumericError &e) {
        throw NumericError("epoch " + std::to_string(epoch) +
                           ", batch starting at sample " + std::to_string(begin) +
                           ": " + e.what());
      }
      if (config.freeze_biases)
        zero_biases(lg.grads);
      clip_global_norm(lg.grads, config.clip_norm);
      gd_step(net.params, lg.grads, config.learning_rate);
      total += lg.loss * static_cast<double>(batch.size());
    }
    report.epoch_losses.push_back(total / static_cast<double>(all.size()));
  }
}

void train_lbfgs(model::Network &net, const data::WindowedDataset &train_set,
                 const TrainConfig &config, TrainReport &report) {
  model::Network probe = net;
  const std::span<const data::Sample> all(train_set.samples);
  Objective objective = [&](const Vector &x, Vector &grad) {
    model::assign_flat(probe.params, x);
    LossAndGradient lg;
    try {
      lg = backprop(probe, all);
    } catch (const NumericError &) {
      // Reported as an infinite value so the line search backs off.
      return std::numeric_limits<double>::infinity();
    }
    if (config.freeze_biases)
      zero_biases(lg.grads);
    grad = model::flatten(lg.grads);
    return lg.loss;
  };
  LbfgsOptions options;
  options.memory = config.lbfgs_memory;
  options.max_iters = config.lbfgs_max_iters;
  options.tolerance = config.convergence_tol;
  const auto result = lbfgs_minimize(objective, model::flatten(net.params), options);
  model::assign_flat(net.params, result.x);
  report.epoch_losses = result.trace;
}

} // namespace

TrainReport train_network(model::Network &net, const data::WindowedDataset &train_set,
                          const data::WindowedDataset &val_set,
                          const TrainConfig &config) {
  config.validate();
  net.validate();
  if (train_set.empty())
    throw DataError("training set is empty");
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = config.seed;
  report.config = config;
  if (config.optimizer == Optimizer::gd)
    train_gd(net, train_set, config, report);
  else
    train_lbfgs(net, train_set, config, report);
  if (!val_set.empty()) {
    const auto ev = eval::evaluate_next_step(net, val_set);
    report.val_mae = ev.mae;
    report.val_rmse = ev.rmse;
    report.validated = true;
  }
  report.seconds = seconds_since(start);
  return report;
}

bool ranks_before(const GridCandidate &a, const GridCandidate &b) {
  if (a.failed != b.failed)
    return !a.failed;
  return std::tie(a.rmse, a.params, a.mae, a.hidden, a.layers, a.lookback) <
         std::tie(b.rmse, b.params, b.mae, b.hidden, b.layers, b.lookback);
}

GridResult grid_search(const GridSpec &space, const Matrix &series,
                       const TrainConfig &base_config,
                       const GridSearchOptions &options) {
  space.validate();
  base_config.validate();
  GridResult result;
  bool have_best = false;
  for (std::size_t hidden : space.hidden_sizes) {
    for (std::size_t layers : space.layer_counts) {
      for (std::size_t lookback : space.lookbacks) {
        GridCandidate cand;
        cand.hidden = hidden;
        cand.layers = layers;
        cand.lookback = lookback;
        const auto start = std::chrono::steady_clock::now();
        try {
          auto windows = data::make_windows(series, lookback, 1);
          windows.feature_names = options.feature_names;
          auto [train_set, val_set] =
              data::split_dataset(windows, options.train_fraction);
          if (val_set.empty())
            throw DataError("validation split is empty");
          model::NetworkShape shape;
          shape.cell = options.cell;
          shape.features = static_cast<std::size_t>(series.cols());
          shape.hidden = hidden;
          shape.layers = layers;
          shape.lookback = lookback;
          auto net = model::make_network(shape, base_config.seed,
                                         options.feature_names);
          net.target_feature = options.target_feature;
          const auto report = train_network(net, train_set, val_set, base_config);
          cand.rmse = report.val_rmse;
          cand.mae = report.val_mae;
          cand.params = model::param_count(net);
          cand.seconds = seconds_since(start);
          if (!have_best || ranks_before(cand, result.best)) {
            result.best = cand;
            result.best_network = std::move(net);
            have_best = true;
          }
        } catch (const Error &e) {
          cand.failed = true;
          cand.error = e.what();
          cand.seconds = seconds_since(start);
        }
        if (options.on_candidate)
          options.on_candidate(cand);
        result.table.push_back(std::move(cand));
      }
    }
  }
  if (!have_best)
    throw DataError("grid search failed: every candidate errored (first: " +
                    result.table.front().error + ")");
  std::stable_sort(result.table.begin(), result.table.end(), ranks_before);
  return result;
}

void write_grid_csv(std::ostream &out, const std::vector<GridCandidate> &table) {
  out << "hidden,layers,lookback,rmse,mae,params,seconds\n";
  for (const auto &c : table) {
    out << c.hidden << ',' << c.layers << ',' << c.lookback << ',';
    if (c.failed)
      out << "nan,nan,";
    else
      out << csv::format_double(c.rmse) << ',' << csv::format_double(c.mae) << ',';
    out << c.params << ',' << csv::format_double(c.seconds) << '\n';
  }
}

} // namespace loadcast::train
