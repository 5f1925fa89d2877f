// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "loadcast/linalg.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace loadcast::data {

/// One task's resource usage over one measurement window.
struct TraceRecord {
  std::int64_t window_start = 0; // seconds since trace epoch
  std::string machine_id;
  double cpu_rate = 0.0;
  double memory = 0.0;
  std::optional<double> disk_io_time;
  double disk_space = 0.0;
};

/// Column positions are 1-based, following the numbering of the public
/// cluster-trace schema documents. `time_units_per_second` converts the raw
/// timestamp column into seconds (the public trace stores microseconds).
struct TraceSchema {
  int time_column = 1;
  int machine_column = 5;
  int cpu_column = 6;
  int memory_column = 7;
  int disk_io_column = 12;
  int disk_space_column = 13;
  std::int64_t time_units_per_second = 1000000;
  char delimiter = ',';
  bool has_header = false;

  /// task_usage table of the 2011 cluster trace.
  static TraceSchema google_task_usage();
  /// `time,machine,cpu,memory,disk_io,disk_space` with times in seconds.
  static TraceSchema simple();

  int max_column() const;
};

struct ParseResult {
  std::vector<TraceRecord> records;
  std::size_t skipped = 0;
};

/// Single-pass parse. Rows whose mandatory fields do not parse (or are
/// negative / non-finite) are skipped and counted.
ParseResult parse_trace(std::istream &source, const TraceSchema &schema);

/// Feature labels of series built from trace records, in column order.
const std::vector<std::string> &trace_feature_names();

/// Uniformly spaced multivariate series for one machine. Row t is the
/// measurement at start_time + t * interval_seconds. Missing entries are NaN
/// until interpolate_missing runs.
struct MachineSeries {
  std::string machine_id;
  std::int64_t interval_seconds = 300;
  std::int64_t start_time = 0;
  Matrix values; // T x N
  std::vector<std::string> feature_names;

  std::size_t length() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t feature_count() const {
    return static_cast<std::size_t>(values.cols());
  }
  std::int64_t timestamp(std::size_t row) const {
    return start_time + static_cast<std::int64_t>(row) * interval_seconds;
  }
  /// Throws ConfigError when the name is unknown.
  std::size_t feature_index(const std::string &name) const;
};

/// Sums usage of all tasks on `machine` per half-open bucket
/// [start, start + interval). Rows run from the first to the last observed
/// bucket; empty buckets (and absent optional fields) become NaN.
MachineSeries aggregate_machine_usage(const std::vector<TraceRecord> &records,
                                      const std::string &machine,
                                      std::int64_t interval_seconds = 300);

/// Linear interpolation across interior gaps, nearest-value extension at the
/// edges.
MachineSeries interpolate_missing(MachineSeries series);

/// Half-open row range [begin, end).
struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end > begin ? end - begin : 0; }
};

struct ScalerParams {
  Vector minimum;
  Vector maximum;
  std::vector<bool> degenerate_mask;

  std::size_t feature_count() const {
    return static_cast<std::size_t>(minimum.size());
  }
};

ScalerParams fit_scaler(const MachineSeries &series, RowRange fit_range);
ScalerParams fit_scaler(const Matrix &values, RowRange fit_range);

/// (x - min) / (max - min) per column; degenerate columns map to 0. Values
/// outside the fitted range are not clipped.
Matrix apply_scaler(const Matrix &values, const ScalerParams &params);
MachineSeries apply_scaler(MachineSeries series, const ScalerParams &params);

Matrix invert_scaler(const Matrix &values, const ScalerParams &params);

struct Sample {
  Matrix input;  // k x N
  Matrix target; // m x N
};

struct WindowedDataset {
  std::size_t lookback = 1;
  std::size_t horizon = 1;
  std::vector<Sample> samples;
  std::vector<std::string> feature_names;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

/// Sample j takes rows [j, j+k) as input and [j+k, j+k+m) as target.
WindowedDataset make_windows(const MachineSeries &series, std::size_t lookback,
                             std::size_t horizon);
WindowedDataset make_windows(const Matrix &values, std::size_t lookback,
                             std::size_t horizon);

/// Chronological split: the first floor(fraction * count) samples train.
std::pair<WindowedDataset, WindowedDataset>
split_dataset(const WindowedDataset &dataset, double train_fraction);

/// Rows used for scaler fitting when fitting on the training split only:
/// the first floor(train_fraction * T) rows.
RowRange training_rows(std::size_t length, double train_fraction);

/// Canonical series file: `timestamp,<features...>` header, one row per
/// interval, shortest round-trip decimal formatting.
void write_series_csv(std::ostream &out, const MachineSeries &series);
MachineSeries read_series_csv(std::istream &in,
                              const std::string &machine_id = "");

} // namespace loadcast::data
