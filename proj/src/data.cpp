// SPDX-License-Identifier: Apache-2.0
#include "loadcast/data.hpp"

#include "loadcast/csv.hpp"
#include "loadcast/error.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>

namespace loadcast::data {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0)))
    --q;
  return q;
}

std::optional<double> non_negative(std::string_view field) {
  auto v = csv::parse_double(field);
  if (!v || !std::isfinite(*v) || *v < 0.0)
    return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_time(std::string_view field,
                                       std::int64_t units_per_second) {
  if (auto i = csv::parse_int(field))
    return floor_div(*i, units_per_second);
  auto d = csv::parse_double(field);
  if (!d || !std::isfinite(*d))
    return std::nullopt;
  return static_cast<std::int64_t>(
      std::floor(*d / static_cast<double>(units_per_second)));
}

} // namespace

TraceSchema TraceSchema::google_task_usage() { return TraceSchema{}; }

TraceSchema TraceSchema::simple() {
  TraceSchema s;
  s.time_column = 1;
  s.machine_column = 2;
  s.cpu_column = 3;
  s.memory_column = 4;
  s.disk_io_column = 5;
  s.disk_space_column = 6;
  s.time_units_per_second = 1;
  return s;
}

int TraceSchema::max_column() const {
  return std::max({time_column, machine_column, cpu_column, memory_column,
                   disk_io_column, disk_space_column});
}

ParseResult parse_trace(std::istream &source, const TraceSchema &schema) {
  if (!source)
    throw IoError("trace stream is not readable");
  for (int c : {schema.time_column, schema.machine_column, schema.cpu_column,
                schema.memory_column, schema.disk_io_column,
                schema.disk_space_column}) {
    if (c < 1)
      throw ConfigError("trace schema column positions are 1-based, got " +
                        std::to_string(c));
  }
  if (schema.time_units_per_second < 1)
    throw ConfigError("time_units_per_second must be >= 1");

  ParseResult result;
  std::string line;
  bool header_pending = schema.has_header;
  bool width_checked = false;
  const auto at = [](const std::vector<std::string> &fields, int column) {
    return std::string_view(fields[static_cast<std::size_t>(column - 1)]);
  };
  while (std::getline(source, line)) {
    if (line.empty() || line == "\r")
      continue;
    auto fields = csv::split_line(line, schema.delimiter);
    if (!width_checked) {
      if (static_cast<int>(fields.size()) < schema.max_column())
        throw ConfigError("trace schema references column " +
                          std::to_string(schema.max_column()) +
                          " but rows have " + std::to_string(fields.size()) +
                          " columns");
      width_checked = true;
    }
    if (header_pending) {
      header_pending = false;
      continue;
    }
    if (static_cast<int>(fields.size()) < schema.max_column()) {
      ++result.skipped;
      continue;
    }
    TraceRecord rec;
    auto t = parse_time(at(fields, schema.time_column),
                        schema.time_units_per_second);
    auto cpu = non_negative(at(fields, schema.cpu_column));
    auto mem = non_negative(at(fields, schema.memory_column));
    auto space = non_negative(at(fields, schema.disk_space_column));
    auto machine = at(fields, schema.machine_column);
    auto io_field = at(fields, schema.disk_io_column);
    std::optional<double> io;
    bool io_ok = true;
    if (io_field.find_first_not_of(" \t\r") != std::string_view::npos) {
      io = non_negative(io_field);
      io_ok = io.has_value();
    }
    if (!t || !cpu || !mem || !space || machine.empty() || !io_ok) {
      ++result.skipped;
      continue;
    }
    rec.window_start = *t;
    rec.machine_id = std::string(machine);
    rec.cpu_rate = *cpu;
    rec.memory = *mem;
    rec.disk_io_time = io;
    rec.disk_space = *space;
    result.records.push_back(std::move(rec));
  }
  if (source.bad())
    throw IoError("error while reading trace stream");
  return result;
}

const std::vector<std::string> &trace_feature_names() {
  static const std::vector<std::string> names{"cpu", "memory", "disk_io",
                                              "disk_space"};
  return names;
}

std::size_t MachineSeries::feature_index(const std::string &name) const {
  auto it = std::find(feature_names.begin(), feature_names.end(), name);
  if (it == feature_names.end())
    throw ConfigError("unknown feature '" + name + "'");
  return static_cast<std::size_t>(it - feature_names.begin());
}

MachineSeries aggregate_machine_usage(const std::vector<TraceRecord> &records,
                                      const std::string &machine,
                                      std::int64_t interval_seconds) {
  if (interval_seconds <= 0)
    throw ConfigError("aggregation interval must be positive");
  constexpr std::size_t kFeatures = 4;
  // bucket -> per-feature observed values; sorted before summing so the sum
  // does not depend on record order.
  std::map<std::int64_t, std::array<std::vector<double>, kFeatures>> buckets;
  for (const auto &r : records) {
    if (r.machine_id != machine)
      continue;
    auto &b = buckets[floor_div(r.window_start, interval_seconds)];
    b[0].push_back(r.cpu_rate);
    b[1].push_back(r.memory);
    if (r.disk_io_time)
      b[2].push_back(*r.disk_io_time);
    b[3].push_back(r.disk_space);
  }
  if (buckets.empty())
    throw DataError("no usage records for machine '" + machine + "'");

  const std::int64_t first = buckets.begin()->first;
  const std::int64_t last = buckets.rbegin()->first;
  MachineSeries series;
  series.machine_id = machine;
  series.interval_seconds = interval_seconds;
  series.start_time = first * interval_seconds;
  series.feature_names = trace_feature_names();
  series.values = Matrix::Constant(last - first + 1, kFeatures, kMissing);
  for (auto &[bucket, features] : buckets) {
    const auto row = static_cast<Eigen::Index>(bucket - first);
    for (std::size_t f = 0; f < kFeatures; ++f) {
      auto &vals = features[f];
      if (vals.empty())
        continue;
      std::sort(vals.begin(), vals.end());
      double sum = 0.0;
      for (double v : vals)
        sum += v;
      series.values(row, static_cast<Eigen::Index>(f)) = sum;
    }
  }
  return series;
}

MachineSeries interpolate_missing(MachineSeries series) {
  const Eigen::Index rows = series.values.rows();
  for (Eigen::Index f = 0; f < series.values.cols(); ++f) {
    auto col = series.values.col(f);
    std::vector<Eigen::Index> observed;
    for (Eigen::Index t = 0; t < rows; ++t)
      if (!std::isnan(col(t)))
        observed.push_back(t);
    if (observed.empty()) {
      const auto name = static_cast<std::size_t>(f) < series.feature_names.size()
                            ? series.feature_names[static_cast<std::size_t>(f)]
                            : std::to_string(f);
      throw DataError("feature '" + name + "' has no observed values");
    }
    for (Eigen::Index t = 0; t < observed.front(); ++t)
      col(t) = col(observed.front());
    for (Eigen::Index t = observed.back() + 1; t < rows; ++t)
      col(t) = col(observed.back());
    for (std::size_t i = 0; i + 1 < observed.size(); ++i) {
      const Eigen::Index a = observed[i];
      const Eigen::Index b = observed[i + 1];
      for (Eigen::Index t = a + 1; t < b; ++t) {
        const double w = static_cast<double>(t - a) / static_cast<double>(b - a);
        col(t) = col(a) + (col(b) - col(a)) * w;
      }
    }
  }
  return series;
}

ScalerParams fit_scaler(const Matrix &values, RowRange fit_range) {
  if (fit_range.size() == 0)
    throw ConfigError("scaler fit range is empty");
  if (fit_range.end > static_cast<std::size_t>(values.rows()))
    throw ConfigError("scaler fit range exceeds the series length");
  const auto block = values.middleRows(static_cast<Eigen::Index>(fit_range.begin),
                                       static_cast<Eigen::Index>(fit_range.size()));
  ScalerParams p;
  p.minimum = block.colwise().minCoeff().transpose();
  p.maximum = block.colwise().maxCoeff().transpose();
  p.degenerate_mask.resize(static_cast<std::size_t>(values.cols()));
  for (Eigen::Index f = 0; f < values.cols(); ++f)
    p.degenerate_mask[static_cast<std::size_t>(f)] = p.maximum(f) == p.minimum(f);
  return p;
}

ScalerParams fit_scaler(const MachineSeries &series, RowRange fit_range) {
  return fit_scaler(series.values, fit_range);
}

Matrix apply_scaler(const Matrix &values, const ScalerParams &params) {
  if (static_cast<std::size_t>(values.cols()) != params.feature_count())
    throw ShapeError("scaler expects " + std::to_string(params.feature_count()) +
                     " features, got " + std::to_string(values.cols()));
  Matrix out(values.rows(), values.cols());
  for (Eigen::Index f = 0; f < values.cols(); ++f) {
    if (params.degenerate_mask[static_cast<std::size_t>(f)]) {
      out.col(f).setZero();
      continue;
    }
    const double lo = params.minimum(f);
    const double span = params.maximum(f) - lo;
    out.col(f) = (values.col(f).array() - lo) / span;
  }
  return out;
}

MachineSeries apply_scaler(MachineSeries series, const ScalerParams &params) {
  series.values = apply_scaler(series.values, params);
  return series;
}

Matrix invert_scaler(const Matrix &values, const ScalerParams &params) {
  if (static_cast<std::size_t>(values.cols()) != params.feature_count())
    throw ShapeError("scaler expects " + std::to_string(params.feature_count()) +
                     " features, got " + std::to_string(values.cols()));
  Matrix out(values.rows(), values.cols());
  for (Eigen::Index f = 0; f < values.cols(); ++f) {
    const double lo = params.minimum(f);
    if (params.degenerate_mask[static_cast<std::size_t>(f)]) {
      out.col(f).setConstant(lo);
      continue;
    }
    out.col(f) = values.col(f).array() * (params.maximum(f) - lo) + lo;
  }
  return out;
}

WindowedDataset make_windows(const Matrix &values, std::size_t lookback,
                             std::size_t horizon) {
  if (lookback < 1 || horizon < 1)
    throw ConfigError("lookback and horizon must be >= 1");
  const auto length = static_cast<std::size_t>(values.rows());
  if (length < lookback + horizon)
    throw DataError("series of length " + std::to_string(length) +
                    " is too short for lookback " + std::to_string(lookback) +
                    " and horizon " + std::to_string(horizon));
  WindowedDataset ds;
  ds.lookback = lookback;
  ds.horizon = horizon;
  const std::size_t count = length - lookback - horizon + 1;
  ds.samples.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    Sample s;
    s.input = values.middleRows(static_cast<Eigen::Index>(j),
                                static_cast<Eigen::Index>(lookback));
    s.target = values.middleRows(static_cast<Eigen::Index>(j + lookback),
                                 static_cast<Eigen::Index>(horizon));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

WindowedDataset make_windows(const MachineSeries &series, std::size_t lookback,
                             std::size_t horizon) {
  auto ds = make_windows(series.values, lookback, horizon);
  ds.feature_names = series.feature_names;
  return ds;
}

std::pair<WindowedDataset, WindowedDataset>
split_dataset(const WindowedDataset &dataset, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0, 1)");
  if (dataset.empty())
    throw DataError("cannot split an empty dataset");
  const auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(dataset.size())));
  WindowedDataset train;
  WindowedDataset test;
  for (auto *part : {&train, &test}) {
    part->lookback = dataset.lookback;
    part->horizon = dataset.horizon;
    part->feature_names = dataset.feature_names;
  }
  const auto mid = dataset.samples.begin() + static_cast<std::ptrdiff_t>(n_train);
  train.samples.assign(dataset.samples.begin(), mid);
  test.samples.assign(mid, dataset.samples.end());
  return {std::move(train), std::move(test)};
}

RowRange training_rows(std::size_t length, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0, 1)");
  return {0, static_cast<std::size_t>(
                 std::floor(train_fraction * static_cast<double>(length)))};
}

void write_series_csv(std::ostream &out, const MachineSeries &series) {
  std::vector<std::string> header{"timestamp"};
  header.insert(header.end(), series.feature_names.begin(),
                series.feature_names.end());
  out << csv::join(header) << '\n';
  for (std::size_t t = 0; t < series.length(); ++t) {
    out << series.timestamp(t);
    for (Eigen::Index f = 0; f < series.values.cols(); ++f) {
      const double v = series.values(static_cast<Eigen::Index>(t), f);
      out << ',';
      if (!std::isnan(v))
        out << csv::format_double(v);
    }
    out << '\n';
  }
}

MachineSeries read_series_csv(std::istream &in, const std::string &machine_id) {
  if (!in)
    throw IoError("series stream is not readable");
  std::string line;
  if (!std::getline(in, line))
    throw DataError("series file is empty");
  auto header = csv::split_line(line);
  if (header.size() < 2 || header.front() != "timestamp")
    throw DataError("series header must start with 'timestamp' and name at "
                    "least one feature");
  MachineSeries series;
  series.machine_id = machine_id;
  series.feature_names.assign(header.begin() + 1, header.end());
  std::set<std::string> unique(series.feature_names.begin(),
                               series.feature_names.end());
  if (unique.size() != series.feature_names.size())
    throw DataError("series header has duplicate feature names");

  const std::size_t n = series.feature_names.size();
  std::vector<std::int64_t> stamps;
  std::vector<double> flat;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r")
      continue;
    auto fields = csv::split_line(line);
    if (fields.size() != n + 1)
      throw DataError("series line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(n + 1));
    auto ts = csv::parse_int(fields[0]);
    if (!ts)
      throw DataError("bad timestamp on series line " + std::to_string(line_no));
    stamps.push_back(*ts);
    for (std::size_t f = 0; f < n; ++f) {
      auto v = csv::parse_double(fields[f + 1]);
      if (!v || !std::isfinite(*v))
        throw DataError("missing or non-finite value on series line " +
                        std::to_string(line_no));
      flat.push_back(*v);
    }
  }
  if (stamps.empty())
    throw DataError("series file has no rows");
  series.start_time = stamps.front();
  if (stamps.size() > 1)
    series.interval_seconds = stamps[1] - stamps[0];
  if (series.interval_seconds <= 0)
    throw DataError("series timestamps must be strictly increasing");
  for (std::size_t t = 1; t < stamps.size(); ++t)
    if (stamps[t] != series.timestamp(t))
      throw DataError("series rows are not uniformly spaced at row " +
                      std::to_string(t));
  series.values.resize(static_cast<Eigen::Index>(stamps.size()),
                       static_cast<Eigen::Index>(n));
  for (std::size_t t = 0; t < stamps.size(); ++t)
    for (std::size_t f = 0; f < n; ++f)
      series.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(f)) =
          flat[t * n + f];
  return series;
}

} // namespace loadcast::data
