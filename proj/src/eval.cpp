// SPDX-License-Identifier: Apache-2.0
#include "loadcast/eval.hpp"

#include "loadcast/csv.hpp"
#include "loadcast/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

namespace loadcast::eval {

namespace {

void check_pair(const Vector &actual, const Vector &predicted) {
  if (actual.size() != predicted.size())
    throw ShapeError("metric inputs differ in length");
  if (actual.size() == 0)
    throw DataError("metric over an empty sample");
}

std::vector<const Matrix *> inputs_of(const data::WindowedDataset &dataset) {
  std::vector<const Matrix *> windows;
  windows.reserve(dataset.size());
  for (const auto &s : dataset.samples)
    windows.push_back(&s.input);
  return windows;
}

Vector next_target_column(const data::WindowedDataset &dataset,
                          std::size_t feature) {
  Vector out(static_cast<Eigen::Index>(dataset.size()));
  for (std::size_t i = 0; i < dataset.size(); ++i)
    out(static_cast<Eigen::Index>(i)) =
        dataset.samples[i].target(0, static_cast<Eigen::Index>(feature));
  return out;
}

std::string feature_label(const model::Network &net) {
  if (net.target_feature < net.feature_names.size())
    return net.feature_names[net.target_feature];
  return "f" + std::to_string(net.target_feature);
}

double percentile(std::vector<double> sorted, double q) {
  if (sorted.empty())
    return 0.0;
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

} // namespace

double mae(const Vector &actual, const Vector &predicted) {
  check_pair(actual, predicted);
  return (actual - predicted).cwiseAbs().sum() /
         static_cast<double>(actual.size());
}

double rmse(const Vector &actual, const Vector &predicted) {
  check_pair(actual, predicted);
  return std::sqrt((actual - predicted).squaredNorm() /
                   static_cast<double>(actual.size()));
}

EvalReport evaluate_next_step(const model::Network &net,
                              const data::WindowedDataset &dataset) {
  if (dataset.empty())
    throw DataError("evaluation set is empty");
  const Matrix pred = model::predict_next(net, inputs_of(dataset));
  const Vector actual = next_target_column(dataset, net.target_feature);
  const Vector predicted = pred.col(static_cast<Eigen::Index>(net.target_feature));
  EvalReport r;
  r.mae = mae(actual, predicted);
  r.rmse = rmse(actual, predicted);
  r.n = dataset.size();
  r.target_feature = feature_label(net);
  r.params = model::param_count(net);
  r.flops = model::flop_count_per_forecast(net).total();
  return r;
}

EvalReport evaluate_next_step_original(const model::Network &net,
                                       const data::WindowedDataset &dataset) {
  if (!net.scaler)
    throw ConfigError("network carries no scaler; original units unavailable");
  if (dataset.empty())
    throw DataError("evaluation set is empty");
  const Matrix pred =
      data::invert_scaler(model::predict_next(net, inputs_of(dataset)), *net.scaler);
  Matrix actual_rows(static_cast<Eigen::Index>(dataset.size()),
                     static_cast<Eigen::Index>(net.feature_count()));
  for (std::size_t i = 0; i < dataset.size(); ++i)
    actual_rows.row(static_cast<Eigen::Index>(i)) = dataset.samples[i].target.row(0);
  const Matrix actual = data::invert_scaler(actual_rows, *net.scaler);
  const auto f = static_cast<Eigen::Index>(net.target_feature);
  EvalReport r;
  r.mae = mae(actual.col(f), pred.col(f));
  r.rmse = rmse(actual.col(f), pred.col(f));
  r.n = dataset.size();
  r.target_feature = feature_label(net);
  r.units = "original";
  r.params = model::param_count(net);
  r.flops = model::flop_count_per_forecast(net).total();
  return r;
}

EvalReport persistence_baseline(const data::WindowedDataset &dataset,
                                std::size_t target_feature) {
  if (dataset.empty())
    throw DataError("evaluation set is empty");
  Vector last(static_cast<Eigen::Index>(dataset.size()));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto &in = dataset.samples[i].input;
    last(static_cast<Eigen::Index>(i)) =
        in(in.rows() - 1, static_cast<Eigen::Index>(target_feature));
  }
  const Vector actual = next_target_column(dataset, target_feature);
  EvalReport r;
  r.mae = mae(actual, last);
  r.rmse = rmse(actual, last);
  r.n = dataset.size();
  r.target_feature = target_feature < dataset.feature_names.size()
                         ? dataset.feature_names[target_feature]
                         : "f" + std::to_string(target_feature);
  return r;
}

EvalReport bench_forecast(const model::Network &net,
                          const std::vector<Matrix> &windows,
                          std::size_t repetitions) {
  if (repetitions < 1)
    throw ConfigError("benchmark repetitions must be >= 1");
  EvalReport r;
  r.target_feature = feature_label(net);
  r.params = model::param_count(net);
  r.flops = model::flop_count_per_forecast(net).total();
  if (windows.empty())
    return r;
  using clock = std::chrono::steady_clock;
  double sink = 0.0;
  for (int warm = 0; warm < 3; ++warm)
    for (const auto &w : windows)
      sink += model::network_forward(net, w).prediction(0);
  std::vector<double> samples;
  samples.reserve(repetitions * windows.size());
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    for (const auto &w : windows) {
      const auto start = clock::now();
      sink += model::network_forward(net, w).prediction(0);
      const auto stop = clock::now();
      samples.push_back(
          std::chrono::duration<double, std::micro>(stop - start).count());
    }
  }
  // Keep the forecasts observable so they are not optimized away.
  if (std::isnan(sink))
    r.n = 0;
  double total = 0.0;
  for (double s : samples)
    total += s;
  r.latency.mean_us = total / static_cast<double>(samples.size());
  r.latency.median_us = percentile(samples, 0.5);
  r.latency.p95_us = percentile(samples, 0.95);
  r.latency.repetitions = repetitions;
  r.latency.calls = samples.size();
  r.n = samples.size();
  return r;
}

void write_report_json(std::ostream &out, const EvalReport &report) {
  nlohmann::ordered_json j;
  j["mae"] = report.mae;
  j["rmse"] = report.rmse;
  j["n"] = report.n;
  j["target_feature"] = report.target_feature;
  j["units"] = report.units;
  j["params"] = report.params;
  j["flops"] = report.flops;
  j["latency_us"] = {{"mean", report.latency.mean_us},
                     {"median", report.latency.median_us},
                     {"p95", report.latency.p95_us}};
  j["repetitions"] = report.latency.repetitions;
  out << j.dump(2) << '\n';
}

void write_report_csv_header(std::ostream &out) {
  out << "mae,rmse,n,target_feature,units,params,flops,mean_us,median_us,p95_us,"
         "repetitions\n";
}

void write_report_csv_row(std::ostream &out, const EvalReport &r) {
  out << csv::format_double(r.mae) << ',' << csv::format_double(r.rmse) << ','
      << r.n << ',' << csv::quote(r.target_feature) << ',' << r.units << ','
      << r.params << ',' << r.flops << ','
      << csv::format_double(r.latency.mean_us) << ','
      << csv::format_double(r.latency.median_us) << ','
      << csv::format_double(r.latency.p95_us) << ',' << r.latency.repetitions
      << '\n';
}

} // namespace loadcast::eval
