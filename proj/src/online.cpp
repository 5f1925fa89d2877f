// SPDX-License-Identifier: Apache-2.0
#include "loadcast/online.hpp"

#include "loadcast/csv.hpp"
#include "loadcast/error.hpp"
#include "loadcast/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

namespace loadcast::online {

void OnlineConfig::validate() const {
  if (batch_size < 1)
    throw ConfigError("online batch size must be >= 1");
  if (!(learning_rate > 0.0))
    throw ConfigError("online learning rate must be positive");
  if (clip_norm < 0.0)
    throw ConfigError("online clip norm must be >= 0");
  if (lbfgs_memory < 1 || lbfgs_max_iters < 1)
    throw ConfigError("online L-BFGS settings must be >= 1");
  if (!(convergence_tol > 0.0))
    throw ConfigError("online convergence tolerance must be positive");
}

std::size_t batch_count(std::size_t stream_length, std::size_t lookback,
                        std::size_t batch_size) {
  if (batch_size == 0 || stream_length <= lookback)
    return 0;
  return (stream_length - lookback) / batch_size;
}

namespace {

void adapt_gd(model::Network &net, std::span<const data::Sample> windows,
              const OnlineConfig &config) {
  const std::size_t step =
      config.minibatch == 0 ? windows.size() : config.minibatch;
  for (std::size_t epoch = 0; epoch < config.adapt_epochs; ++epoch) {
    for (std::size_t begin = 0; begin < windows.size(); begin += step) {
      auto lg = train::backprop(
          net, windows.subspan(begin, std::min(step, windows.size() - begin)));
      train::clip_global_norm(lg.grads, config.clip_norm);
      train::gd_step(net.params, lg.grads, config.learning_rate);
    }
  }
}

void adapt_lbfgs(model::Network &net, std::span<const data::Sample> windows,
                 const OnlineConfig &config) {
  model::Network probe = net;
  train::Objective objective = [&](const Vector &x, Vector &grad) {
    model::assign_flat(probe.params, x);
    train::LossAndGradient lg;
    try {
      lg = train::backprop(probe, windows);
    } catch (const NumericError &) {
      return std::numeric_limits<double>::infinity();
    }
    grad = model::flatten(lg.grads);
    return lg.loss;
  };
  train::LbfgsOptions options;
  options.memory = config.lbfgs_memory;
  options.max_iters = config.lbfgs_max_iters * config.adapt_epochs;
  options.tolerance = config.convergence_tol;
  // Fresh curvature history for every batch.
  const auto result = train::lbfgs_minimize(objective, model::flatten(net.params),
                                            options);
  model::assign_flat(net.params, result.x);
}

double rms(const std::vector<PointForecast> &points, std::size_t from,
           bool squared) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto &p : points) {
    if (p.row < from)
      continue;
    const double e = p.actual - p.predicted;
    sum += squared ? e * e : std::abs(e);
    ++n;
  }
  if (n == 0)
    throw DataError("no forecasts at or after row " + std::to_string(from));
  const double mean = sum / static_cast<double>(n);
  return squared ? std::sqrt(mean) : mean;
}

} // namespace

OnlineRunReport prequential_run(model::Network &net, const Matrix &stream,
                                const OnlineConfig &config,
                                const std::function<void(const BatchResult &)>
                                    &on_batch) {
  config.validate();
  net.validate();
  if (static_cast<std::size_t>(stream.cols()) != net.feature_count())
    throw ShapeError("stream feature count does not match the network");
  const std::size_t k = net.lookback;
  const std::size_t B = config.batch_size;
  const auto length = static_cast<std::size_t>(stream.rows());
  const std::size_t batches = batch_count(length, k, B);
  if (batches == 0)
    throw DataError("stream of length " + std::to_string(length) +
                    " holds no complete batch for lookback " + std::to_string(k) +
                    " and batch size " + std::to_string(B));

  OnlineRunReport report;
  report.batch_size = B;
  const auto target = static_cast<Eigen::Index>(net.target_feature);
  for (std::size_t n = 0; n < batches; ++n) {
    BatchResult br;
    br.index = n;
    br.first_row = k + n * B;
    std::vector<data::Sample> windows(B);
    std::vector<const Matrix *> inputs(B);
    for (std::size_t i = 0; i < B; ++i) {
      const std::size_t row = br.first_row + i;
      windows[i].input = stream.middleRows(static_cast<Eigen::Index>(row - k),
                                           static_cast<Eigen::Index>(k));
      windows[i].target = stream.row(static_cast<Eigen::Index>(row));
      inputs[i] = &windows[i].input;
    }

    // Forecast with the current model before it sees this batch.
    const Matrix pred = model::predict_next(net, inputs);
    Vector actual(static_cast<Eigen::Index>(B));
    Vector predicted(static_cast<Eigen::Index>(B));
    for (std::size_t i = 0; i < B; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      actual(ii) = windows[i].target(0, target);
      predicted(ii) = pred(ii, target);
      report.points.push_back({br.first_row + i, actual(ii), predicted(ii)});
    }
    if (!predicted.allFinite()) {
      report.aborted = true;
      report.failed_batch = n;
      report.error = "non-finite forecast in batch " + std::to_string(n);
      break;
    }
    br.mae = eval::mae(actual, predicted);
    br.rmse = eval::rmse(actual, predicted);

    const auto start = std::chrono::steady_clock::now();
    if (config.adapt_epochs > 0) {
      try {
        if (config.optimizer == train::Optimizer::gd)
          adapt_gd(net, windows, config);
        else
          adapt_lbfgs(net, windows, config);
      } catch (const NumericError &e) {
        report.batches.push_back(br);
        report.aborted = true;
        report.failed_batch = n;
        report.error = e.what();
        break;
      }
    }
    br.adapt_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    report.batches.push_back(br);
    if (on_batch)
      on_batch(br);
  }
  if (!report.points.empty()) {
    report.cumulative_mae = rms(report.points, 0, false);
    report.cumulative_rmse = rms(report.points, 0, true);
  }
  return report;
}

double rmse_from(const OnlineRunReport &report, std::size_t first_row) {
  return rms(report.points, first_row, true);
}

double mae_from(const OnlineRunReport &report, std::size_t first_row) {
  return rms(report.points, first_row, false);
}

std::vector<BatchSizeRow> compare_batch_sizes(
    const model::Network &initial, const Matrix &stream,
    std::vector<std::size_t> sizes, const OnlineConfig &config,
    const std::function<void(std::size_t, const BatchResult &)> &on_batch) {
  if (sizes.empty())
    throw ConfigError("no online batch sizes given");
  std::sort(sizes.begin(), sizes.end());
  std::vector<BatchSizeRow> rows;
  for (std::size_t b : sizes) {
    BatchSizeRow row;
    row.batch_size = b;
    OnlineConfig cfg = config;
    cfg.batch_size = b;
    model::Network net = initial;
    try {
      row.report = prequential_run(net, stream, cfg, [&](const BatchResult &br) {
        if (on_batch)
          on_batch(b, br);
      });
      row.cumulative_mae = row.report.cumulative_mae;
      row.cumulative_rmse = row.report.cumulative_rmse;
      if (row.report.aborted) {
        row.failed = true;
        row.error = row.report.error;
      }
    } catch (const Error &e) {
      row.failed = true;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_batch_csv_header(std::ostream &out) {
  out << "batch_index,mae,rmse,adapt_seconds\n";
}

void write_batch_csv_row(std::ostream &out, const BatchResult &b) {
  out << b.index << ',' << csv::format_double(b.mae) << ','
      << csv::format_double(b.rmse) << ',' << csv::format_double(b.adapt_seconds)
      << '\n';
}

void write_report_json(std::ostream &out, const OnlineRunReport &report) {
  nlohmann::ordered_json j;
  j["batch_size"] = report.batch_size;
  j["batches"] = report.batches.size();
  j["cumulative_mae"] = report.cumulative_mae;
  j["cumulative_rmse"] = report.cumulative_rmse;
  j["aborted"] = report.aborted;
  if (report.aborted) {
    j["failed_batch"] = report.failed_batch;
    j["error"] = report.error;
  }
  auto rows = nlohmann::ordered_json::array();
  for (const auto &b : report.batches)
    rows.push_back({{"index", b.index},
                    {"first_row", b.first_row},
                    {"mae", b.mae},
                    {"rmse", b.rmse},
                    {"adapt_seconds", b.adapt_seconds}});
  j["per_batch"] = rows;
  out << j.dump(2) << '\n';
}

} // namespace loadcast::online
