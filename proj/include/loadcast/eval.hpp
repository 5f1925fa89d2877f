// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "loadcast/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace loadcast::eval {

double mae(const Vector &actual, const Vector &predicted);
double rmse(const Vector &actual, const Vector &predicted);

struct LatencyStats {
  double mean_us = 0.0;
  double median_us = 0.0;
  double p95_us = 0.0;
  std::size_t repetitions = 0;
  std::size_t calls = 0;
};

struct EvalReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
  std::string target_feature;
  /// "normalized" or "original".
  std::string units = "normalized";
  std::size_t params = 0;
  std::int64_t flops = 0;
  LatencyStats latency;
};

/// Next-step error of `net` on the target feature over a windowed dataset,
/// in normalized units.
EvalReport evaluate_next_step(const model::Network &net,
                              const data::WindowedDataset &dataset);

/// Same windows, target feature mapped back through the network's scaler.
/// Throws ConfigError when the network carries no scaler.
EvalReport evaluate_next_step_original(const model::Network &net,
                                       const data::WindowedDataset &dataset);

/// Predict-last-value baseline on the target feature.
EvalReport persistence_baseline(const data::WindowedDataset &dataset,
                                std::size_t target_feature);

/// Wall-clock per single-window forecast over repetitions * |windows| calls
/// after three untimed warm-up passes, plus the deterministic flop count.
EvalReport bench_forecast(const model::Network &net,
                          const std::vector<Matrix> &windows,
                          std::size_t repetitions);

void write_report_json(std::ostream &out, const EvalReport &report);
void write_report_csv_header(std::ostream &out);
void write_report_csv_row(std::ostream &out, const EvalReport &report);

} // namespace loadcast::eval
