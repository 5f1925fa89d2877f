// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "loadcast/model.hpp"
#include "loadcast/train.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace loadcast::online {

struct OnlineConfig {
  /// Observations per adaptation.
  std::size_t batch_size = 128;
  train::Optimizer optimizer = train::Optimizer::gd;
  /// Passes over each batch; 0 disables adaptation (static model).
  std::size_t adapt_epochs = 1;
  double learning_rate = 0.01;
  /// GD mini-batch size inside one adaptation pass; 0 means the whole batch.
  std::size_t minibatch = 0;
  double clip_norm = 5.0;
  std::size_t lbfgs_memory = 10;
  std::size_t lbfgs_max_iters = 20;
  double convergence_tol = 1e-6;

  void validate() const;
};

struct BatchResult {
  std::size_t index = 0;
  std::size_t first_row = 0; // stream row of the batch's first target
  double mae = 0.0;
  double rmse = 0.0;
  double adapt_seconds = 0.0;
};

struct PointForecast {
  std::size_t row = 0;
  double actual = 0.0;
  double predicted = 0.0;
};

struct OnlineRunReport {
  std::size_t batch_size = 0;
  std::vector<BatchResult> batches;
  std::vector<PointForecast> points;
  double cumulative_mae = 0.0;
  double cumulative_rmse = 0.0;
  bool aborted = false;
  std::size_t failed_batch = 0;
  std::string error;
};

/// floor((T - k) / B): every batch holds B targets that each have k
/// preceding observations.
std::size_t batch_count(std::size_t stream_length, std::size_t lookback,
                        std::size_t batch_size);

/// Prequential loop over a normalized T x N stream. For every batch the
/// current model first forecasts each target from the k rows before it
/// (errors on the network's target feature are recorded), then adapts on
/// exactly those windows. `net` carries the adapted state forward. A numeric
/// failure while adapting stops the run; the report is marked aborted with
/// the failing batch index.
OnlineRunReport prequential_run(model::Network &net, const Matrix &stream,
                                const OnlineConfig &config,
                                const std::function<void(const BatchResult &)>
                                    &on_batch = {});

/// RMSE / MAE over recorded forecasts whose target row is >= first_row.
double rmse_from(const OnlineRunReport &report, std::size_t first_row);
double mae_from(const OnlineRunReport &report, std::size_t first_row);

struct BatchSizeRow {
  std::size_t batch_size = 0;
  double cumulative_mae = 0.0;
  double cumulative_rmse = 0.0;
  bool failed = false;
  std::string error;
  OnlineRunReport report;
};

/// One independent prequential run per batch size, each from a fresh copy of
/// `initial`. Rows are sorted by batch size.
std::vector<BatchSizeRow> compare_batch_sizes(
    const model::Network &initial, const Matrix &stream,
    std::vector<std::size_t> sizes, const OnlineConfig &config,
    const std::function<void(std::size_t, const BatchResult &)> &on_batch = {});

void write_batch_csv_header(std::ostream &out);
void write_batch_csv_row(std::ostream &out, const BatchResult &batch);
void write_report_json(std::ostream &out, const OnlineRunReport &report);

} // namespace loadcast::online
