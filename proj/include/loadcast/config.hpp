// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "loadcast/data.hpp"
#include "loadcast/model.hpp"
#include "loadcast/online.hpp"
#include "loadcast/prune.hpp"
#include "loadcast/train.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace loadcast::config {

struct KeySpec {
  std::string key;
  std::string default_value;
  std::string help;
};

/// Every recognised configuration key with its default, in display order.
const std::vector<KeySpec> &keys();

bool is_known_key(const std::string &key);

/// `key = value` lines with dotted section keys; `#` starts a comment.
/// Unknown keys are rejected.
class KeyValues {
public:
  static KeyValues defaults();

  void set(const std::string &key, const std::string &value);
  const std::string &get(const std::string &key) const;

  /// Merges a config document; later values override earlier ones.
  void merge(std::istream &in, const std::string &origin);
  void merge_file(const std::string &path);

  const std::map<std::string, std::string> &entries() const { return values_; }

private:
  std::map<std::string, std::string> values_;
};

struct Paths {
  std::string trace;
  std::string series;
  std::string model;
  std::string output;
  std::string report;
  std::string table;
};

struct RunConfig {
  Paths paths;

  data::TraceSchema schema;
  std::int64_t interval_seconds = 300;
  std::string machine;

  std::vector<std::string> features; // empty: every column of the series
  std::string target;                // empty: first feature
  double train_fraction = 0.8;
  bool scaler_fit_full = false;

  model::NetworkShape shape;
  std::size_t horizon = 3;

  train::GridSpec grid;
  train::TrainConfig train;

  prune::PruneSpec prune;
  std::size_t finetune_epochs = 0;

  online::OnlineConfig online;
  std::vector<std::size_t> batch_sizes{64, 128};
  bool include_static = false;
  std::size_t online_start_row = 0;

  std::optional<std::size_t> forecast_from;
  std::size_t forecast_count = 0;

  std::size_t bench_repetitions = 20;
  std::size_t bench_windows = 50;
};

/// Typed, fully validated view; throws ConfigError on any bad value.
RunConfig resolve(const KeyValues &values);

/// Human-readable key listing used in --help output.
std::string describe_keys();

} // namespace loadcast::config
