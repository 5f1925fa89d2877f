// SPDX-License-Identifier: Apache-2.0
#include "loadcast/config.hpp"

#include "loadcast/csv.hpp"
#include "loadcast/error.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

namespace loadcast::config {

const std::vector<KeySpec> &keys() {
  static const std::vector<KeySpec> specs{
      {"paths.trace", "", "raw trace file read by prepare"},
      {"paths.series", "", "canonical series CSV"},
      {"paths.model", "", "model file (input, or output of train/gridsearch)"},
      {"paths.output", "", "primary output file of the command"},
      {"paths.report", "", "JSON report file"},
      {"paths.table", "", "CSV results table (gridsearch, online summary)"},
      {"data.schema", "google", "trace column preset: google | simple"},
      {"data.delimiter", ",", "trace field delimiter (single character)"},
      {"data.has_header", "false", "trace has a header row"},
      {"data.time_units_per_second", "", "override the preset time unit"},
      {"data.col.time", "", "1-based timestamp column (overrides preset)"},
      {"data.col.machine", "", "1-based machine id column"},
      {"data.col.cpu", "", "1-based CPU rate column"},
      {"data.col.memory", "", "1-based canonical memory column"},
      {"data.col.disk_io", "", "1-based disk I/O time column"},
      {"data.col.disk_space", "", "1-based local disk space column"},
      {"data.interval", "300", "aggregation interval in seconds"},
      {"data.machine", "", "machine id to extract (empty: busiest machine)"},
      {"series.features", "", "comma list of features to model (empty: all)"},
      {"series.target", "", "feature scored by error metrics (empty: first)"},
      {"series.train_fraction", "0.8", "chronological training share"},
      {"series.scaler_fit", "train", "fit MinMax on: train | full"},
      {"model.cell", "gru", "recurrent cell: gru | lstm"},
      {"model.hidden", "64", "hidden units per layer"},
      {"model.layers", "3", "stacked recurrent layers"},
      {"model.lookback", "12", "observations per input window"},
      {"model.horizon", "3", "forecast steps (3 x 300 s = 15 minutes)"},
      {"grid.hidden", "32,64", "grid search hidden sizes"},
      {"grid.layers", "1,3,5", "grid search layer counts"},
      {"grid.lookback", "4,8,12", "grid search lookbacks"},
      {"train.optimizer", "gd", "gd | lbfgs"},
      {"train.learning_rate", "0.001", "GD step size"},
      {"train.epochs", "100", "training epochs"},
      {"train.batch_size", "32", "GD mini-batch size"},
      {"train.seed", "42", "initialization seed"},
      {"train.lbfgs_memory", "10", "L-BFGS curvature pairs"},
      {"train.lbfgs_max_iters", "100", "L-BFGS iterations"},
      {"train.convergence_tol", "1e-06", "L-BFGS gradient-norm tolerance"},
      {"train.clip_norm", "5", "global gradient-norm clip (0 disables)"},
      {"train.freeze_biases", "false", "hold the cell-gate biases at zero"},
      {"prune.method", "l1", "l1 | random"},
      {"prune.amount", "0.05", "fraction of hidden units removed per layer"},
      {"prune.seed", "0", "seed for random pruning"},
      {"prune.finetune_epochs", "0", "GD epochs after pruning (needs a series)"},
      {"online.batch_sizes", "64,128", "observations per adaptation"},
      {"online.optimizer", "gd", "gd | lbfgs"},
      {"online.adapt_epochs", "1", "passes per batch (0: static model)"},
      {"online.learning_rate", "0.01", "online GD step size"},
      {"online.minibatch", "0", "GD mini-batch inside a pass (0: whole batch)"},
      {"online.clip_norm", "5", "global gradient-norm clip (0 disables)"},
      {"online.lbfgs_memory", "10", "L-BFGS curvature pairs per batch"},
      {"online.lbfgs_max_iters", "20", "L-BFGS iterations per batch"},
      {"online.include_static", "false", "add a non-adapting baseline row"},
      {"online.start_row", "0", "first stream row used for the online run"},
      {"forecast.from", "", "first window start row (empty: held-out split)"},
      {"forecast.count", "0", "forecast origins to emit (0: to the end)"},
      {"bench.repetitions", "20", "timed passes over the bench windows"},
      {"bench.windows", "50", "windows drawn from the series for bench"},
  };
  return specs;
}

bool is_known_key(const std::string &key) {
  for (const auto &s : keys())
    if (s.key == key)
      return true;
  return false;
}

KeyValues KeyValues::defaults() {
  KeyValues kv;
  for (const auto &s : keys())
    kv.values_[s.key] = s.default_value;
  return kv;
}

void KeyValues::set(const std::string &key, const std::string &value) {
  if (!is_known_key(key))
    throw ConfigError("unknown configuration key '" + key + "'");
  values_[key] = value;
}

const std::string &KeyValues::get(const std::string &key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw InternalError("configuration key '" + key + "' has no value");
  return it->second;
}

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

} // namespace

void KeyValues::merge(std::istream &in, const std::string &origin) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!is_known_key(key))
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": unknown configuration key '" + key + "'");
    values_[key] = value;
  }
}

void KeyValues::merge_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot read config file '" + path + "'");
  merge(in, path);
}

namespace {

std::size_t as_count(const KeyValues &kv, const std::string &key,
                     std::size_t min = 0) {
  const auto &text = kv.get(key);
  auto v = csv::parse_int(text);
  if (!v || *v < static_cast<long long>(min))
    throw ConfigError(key + " must be an integer >= " + std::to_string(min) +
                      ", got '" + text + "'");
  return static_cast<std::size_t>(*v);
}

std::optional<int> as_column(const KeyValues &kv, const std::string &key) {
  if (kv.get(key).empty())
    return std::nullopt;
  return static_cast<int>(as_count(kv, key, 1));
}

double as_real(const KeyValues &kv, const std::string &key) {
  const auto &text = kv.get(key);
  auto v = csv::parse_double(text);
  if (!v || !std::isfinite(*v))
    throw ConfigError(key + " must be a number, got '" + text + "'");
  return *v;
}

bool as_bool(const KeyValues &kv, const std::string &key) {
  const auto &text = kv.get(key);
  if (text == "true" || text == "1" || text == "yes" || text == "on")
    return true;
  if (text == "false" || text == "0" || text == "no" || text == "off")
    return false;
  throw ConfigError(key + " must be true or false, got '" + text + "'");
}

std::vector<std::string> as_list(const KeyValues &kv, const std::string &key) {
  std::vector<std::string> out;
  const auto &text = kv.get(key);
  if (trim(text).empty())
    return out;
  for (auto &item : csv::split_line(text, ','))
    out.push_back(trim(item));
  return out;
}

std::vector<std::size_t> as_count_list(const KeyValues &kv,
                                       const std::string &key) {
  std::vector<std::size_t> out;
  for (const auto &item : as_list(kv, key)) {
    auto v = csv::parse_int(item);
    if (!v || *v < 1)
      throw ConfigError(key + " entries must be integers >= 1, got '" + item + "'");
    out.push_back(static_cast<std::size_t>(*v));
  }
  if (out.empty())
    throw ConfigError(key + " must list at least one value");
  return out;
}

std::set<std::size_t> as_count_set(const KeyValues &kv, const std::string &key) {
  auto list = as_count_list(kv, key);
  return {list.begin(), list.end()};
}

} // namespace

RunConfig resolve(const KeyValues &kv) {
  RunConfig c;
  c.paths = {kv.get("paths.trace"),  kv.get("paths.series"),
             kv.get("paths.model"),  kv.get("paths.output"),
             kv.get("paths.report"), kv.get("paths.table")};

  const auto &preset = kv.get("data.schema");
  if (preset == "google")
    c.schema = data::TraceSchema::google_task_usage();
  else if (preset == "simple")
    c.schema = data::TraceSchema::simple();
  else
    throw ConfigError("data.schema must be google or simple, got '" + preset + "'");
  const auto &delim = kv.get("data.delimiter");
  if (delim == "\\t" || delim == "tab")
    c.schema.delimiter = '\t';
  else if (delim.size() == 1)
    c.schema.delimiter = delim[0];
  else
    throw ConfigError("data.delimiter must be a single character");
  c.schema.has_header = as_bool(kv, "data.has_header");
  if (!kv.get("data.time_units_per_second").empty())
    c.schema.time_units_per_second =
        static_cast<std::int64_t>(as_count(kv, "data.time_units_per_second", 1));
  if (auto v = as_column(kv, "data.col.time"))
    c.schema.time_column = *v;
  if (auto v = as_column(kv, "data.col.machine"))
    c.schema.machine_column = *v;
  if (auto v = as_column(kv, "data.col.cpu"))
    c.schema.cpu_column = *v;
  if (auto v = as_column(kv, "data.col.memory"))
    c.schema.memory_column = *v;
  if (auto v = as_column(kv, "data.col.disk_io"))
    c.schema.disk_io_column = *v;
  if (auto v = as_column(kv, "data.col.disk_space"))
    c.schema.disk_space_column = *v;
  c.interval_seconds = static_cast<std::int64_t>(as_count(kv, "data.interval", 1));
  c.machine = kv.get("data.machine");

  c.features = as_list(kv, "series.features");
  c.target = kv.get("series.target");
  c.train_fraction = as_real(kv, "series.train_fraction");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
    throw ConfigError("series.train_fraction must lie in (0, 1)");
  const auto &fit = kv.get("series.scaler_fit");
  if (fit != "train" && fit != "full")
    throw ConfigError("series.scaler_fit must be train or full");
  c.scaler_fit_full = fit == "full";

  c.shape.cell = model::parse_cell_kind(kv.get("model.cell"));
  c.shape.hidden = as_count(kv, "model.hidden", 1);
  c.shape.layers = as_count(kv, "model.layers", 1);
  c.shape.lookback = as_count(kv, "model.lookback", 1);
  c.horizon = as_count(kv, "model.horizon", 1);

  c.grid.hidden_sizes = as_count_set(kv, "grid.hidden");
  c.grid.layer_counts = as_count_set(kv, "grid.layers");
  c.grid.lookbacks = as_count_set(kv, "grid.lookback");
  c.grid.validate();

  c.train.optimizer = train::parse_optimizer(kv.get("train.optimizer"));
  c.train.learning_rate = as_real(kv, "train.learning_rate");
  c.train.epochs = as_count(kv, "train.epochs", 1);
  c.train.batch_size = as_count(kv, "train.batch_size", 1);
  c.train.seed = as_count(kv, "train.seed");
  c.train.lbfgs_memory = as_count(kv, "train.lbfgs_memory", 1);
  c.train.lbfgs_max_iters = as_count(kv, "train.lbfgs_max_iters", 1);
  c.train.convergence_tol = as_real(kv, "train.convergence_tol");
  c.train.clip_norm = as_real(kv, "train.clip_norm");
  c.train.freeze_biases = as_bool(kv, "train.freeze_biases");
  c.train.validate();

  c.prune.method = prune::parse_method(kv.get("prune.method"));
  c.prune.amount = as_real(kv, "prune.amount");
  c.prune.seed = as_count(kv, "prune.seed");
  c.prune.validate();
  c.finetune_epochs = as_count(kv, "prune.finetune_epochs");

  c.batch_sizes = as_count_list(kv, "online.batch_sizes");
  c.online.optimizer = train::parse_optimizer(kv.get("online.optimizer"));
  c.online.adapt_epochs = as_count(kv, "online.adapt_epochs");
  c.online.learning_rate = as_real(kv, "online.learning_rate");
  c.online.minibatch = as_count(kv, "online.minibatch");
  c.online.clip_norm = as_real(kv, "online.clip_norm");
  c.online.lbfgs_memory = as_count(kv, "online.lbfgs_memory", 1);
  c.online.lbfgs_max_iters = as_count(kv, "online.lbfgs_max_iters", 1);
  c.online.validate();
  c.include_static = as_bool(kv, "online.include_static");
  c.online_start_row = as_count(kv, "online.start_row");

  if (!kv.get("forecast.from").empty())
    c.forecast_from = as_count(kv, "forecast.from");
  c.forecast_count = as_count(kv, "forecast.count");

  c.bench_repetitions = as_count(kv, "bench.repetitions", 1);
  c.bench_windows = as_count(kv, "bench.windows", 1);
  return c;
}

std::string describe_keys() {
  std::ostringstream out;
  out << "Configuration keys (config file `key = value`, env LOADCAST_CONFIG; "
         "flags override):\n";
  for (const auto &s : keys()) {
    out << "  " << s.key;
    for (std::size_t pad = s.key.size(); pad < 28; ++pad)
      out << ' ';
    out << s.help;
    if (!s.default_value.empty())
      out << " [" << s.default_value << "]";
    out << '\n';
  }
  return out.str();
}

} // namespace loadcast::config
