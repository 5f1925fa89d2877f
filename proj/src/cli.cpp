// SPDX-License-Identifier: Apache-2.0
#include "loadcast/cli.hpp"

#include "loadcast/config.hpp"
#include "loadcast/csv.hpp"
#include "loadcast/error.hpp"
#include "loadcast/eval.hpp"
#include "loadcast/online.hpp"
#include "loadcast/prune.hpp"
#include "loadcast/train.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

namespace loadcast::cli {

namespace {

using config::RunConfig;

// -- shared helpers ----------------------------------------------------------

void write_file_atomic(const std::string &path,
                       const std::function<void(std::ostream &)> &body) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot open '" + tmp + "' for writing");
    try {
      body(out);
    } catch (...) {
      out.close();
      std::remove(tmp.c_str());
      throw;
    }
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw IoError("failed writing '" + tmp + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw IoError("cannot move output into place at '" + path + "'");
  }
}

/// Writes to the file when a path is set, otherwise to `fallback`.
void emit(const std::string &path, std::ostream &fallback,
          const std::function<void(std::ostream &)> &body) {
  if (path.empty())
    body(fallback);
  else
    write_file_atomic(path, body);
}

/// One JSON document for a single item, an array for several.
void write_json_list(std::ostream &os, std::size_t count,
                     const std::function<void(std::ostream &, std::size_t)> &item) {
  if (count == 1) {
    item(os, 0);
    return;
  }
  os << "[\n";
  for (std::size_t i = 0; i < count; ++i) {
    std::ostringstream one;
    item(one, i);
    std::string text = one.str();
    while (!text.empty() && text.back() == '\n')
      text.pop_back();
    os << text << (i + 1 < count ? ",\n" : "\n");
  }
  os << "]\n";
}

const std::string &require(const std::string &value, const char *what) {
  if (value.empty())
    throw ConfigError(std::string("missing required setting: ") + what);
  return value;
}

data::MachineSeries read_series(const std::string &path) {
  std::ifstream in(require(path, "paths.series (--series)"));
  if (!in)
    throw IoError("cannot open series file '" + path + "'");
  return data::read_series_csv(in, std::filesystem::path(path).stem().string());
}

/// Keeps only the named columns, in the given order.
data::MachineSeries select_features(data::MachineSeries series,
                                    const std::vector<std::string> &names) {
  if (names.empty())
    return series;
  Matrix picked(series.values.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < names.size(); ++i)
    picked.col(static_cast<Eigen::Index>(i)) =
        series.values.col(static_cast<Eigen::Index>(series.feature_index(names[i])));
  series.values = std::move(picked);
  series.feature_names = names;
  return series;
}

std::size_t target_index(const data::MachineSeries &series,
                         const std::string &target) {
  return target.empty() ? 0 : series.feature_index(target);
}

struct PreparedSeries {
  data::MachineSeries raw;
  data::ScalerParams scaler;
  Matrix normalized;
  std::size_t target = 0;
};

PreparedSeries prepare_training_series(const RunConfig &cfg) {
  PreparedSeries p;
  p.raw = select_features(read_series(cfg.paths.series), cfg.features);
  p.target = target_index(p.raw, cfg.target);
  const auto rows = cfg.scaler_fit_full
                        ? data::RowRange{0, p.raw.length()}
                        : data::training_rows(p.raw.length(), cfg.train_fraction);
  p.scaler = data::fit_scaler(p.raw, rows);
  p.normalized = data::apply_scaler(p.raw.values, p.scaler);
  return p;
}

/// Series columns matching the model's features, normalized with its scaler.
struct ModelSeries {
  data::MachineSeries raw;
  Matrix normalized;
};

ModelSeries series_for_model(const model::Network &net, const std::string &path) {
  ModelSeries s;
  s.raw = read_series(path);
  if (!net.feature_names.empty())
    s.raw = select_features(std::move(s.raw), net.feature_names);
  if (s.raw.feature_count() != net.feature_count())
    throw ShapeError("series has " + std::to_string(s.raw.feature_count()) +
                     " features, model expects " +
                     std::to_string(net.feature_count()));
  if (!net.scaler)
    throw DataError("model file carries no scaler");
  s.normalized = data::apply_scaler(s.raw.values, *net.scaler);
  return s;
}

nlohmann::ordered_json train_config_json(const train::TrainConfig &c) {
  return {{"optimizer", std::string(train::to_string(c.optimizer))},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"lbfgs_memory", c.lbfgs_memory},
          {"lbfgs_max_iters", c.lbfgs_max_iters},
          {"convergence_tol", c.convergence_tol},
          {"clip_norm", c.clip_norm},
          {"freeze_biases", c.freeze_biases}};
}

// -- commands ------------------------------------------------------------------

int cmd_prepare(const RunConfig &cfg, std::ostream &out) {
  std::ifstream in(require(cfg.paths.trace, "paths.trace (--input)"));
  if (!in)
    throw IoError("cannot open trace file '" + cfg.paths.trace + "'");
  const auto parsed = data::parse_trace(in, cfg.schema);
  std::string machine = cfg.machine;
  if (machine.empty()) {
    std::map<std::string, std::size_t> counts;
    for (const auto &r : parsed.records)
      ++counts[r.machine_id];
    std::size_t best = 0;
    for (const auto &[id, n] : counts)
      if (n > best) {
        best = n;
        machine = id;
      }
    if (machine.empty())
      throw DataError("trace holds no valid records");
  }
  auto series = data::interpolate_missing(
      data::aggregate_machine_usage(parsed.records, machine, cfg.interval_seconds));
  write_file_atomic(require(cfg.paths.series, "paths.series (--out)"),
                    [&](std::ostream &os) { data::write_series_csv(os, series); });
  out << "machine: " << machine << '\n';
  out << "records: " << parsed.records.size() << " (skipped " << parsed.skipped
      << ")\n";
  out << "rows: " << series.length() << '\n';
  const Vector means = series.values.colwise().mean().transpose();
  for (std::size_t f = 0; f < series.feature_count(); ++f)
    out << "mean " << series.feature_names[f] << ": "
        << csv::format_double(means(static_cast<Eigen::Index>(f))) << '\n';
  return 0;
}

void write_train_report(const RunConfig &cfg, const train::TrainReport &report,
                        const eval::EvalReport &original, std::ostream &out) {
  nlohmann::ordered_json j;
  j["epoch_losses"] = report.epoch_losses;
  j["val_mae_normalized"] = report.val_mae;
  j["val_rmse_normalized"] = report.val_rmse;
  j["val_mae_original"] = original.mae;
  j["val_rmse_original"] = original.rmse;
  j["target_feature"] = original.target_feature;
  j["seconds"] = report.seconds;
  j["seed"] = report.seed;
  j["config"] = train_config_json(report.config);
  emit(cfg.paths.report, out, [&](std::ostream &os) { os << j.dump(2) << '\n'; });
}

int cmd_train(const RunConfig &cfg, std::ostream &out) {
  require(cfg.paths.model, "paths.model (--model)");
  auto prepared = prepare_training_series(cfg);
  auto windows = data::make_windows(prepared.normalized, cfg.shape.lookback, 1);
  windows.feature_names = prepared.raw.feature_names;
  auto [train_set, val_set] = data::split_dataset(windows, cfg.train_fraction);
  auto shape = cfg.shape;
  shape.features = prepared.raw.feature_count();
  auto net = model::make_network(shape, cfg.train.seed, prepared.raw.feature_names);
  net.target_feature = prepared.target;
  net.scaler = prepared.scaler;
  const auto report = train::train_network(net, train_set, val_set, cfg.train);
  eval::EvalReport original;
  if (!val_set.empty())
    original = eval::evaluate_next_step_original(net, val_set);
  model::save_model_file(cfg.paths.model, net);
  out << "trained " << model::to_string(net.cell) << " hidden=" << shape.hidden
      << " layers=" << shape.layers << " lookback=" << shape.lookback
      << " params=" << model::param_count(net) << '\n';
  out << "final training loss: "
      << csv::format_double(report.epoch_losses.empty() ? 0.0
                                                        : report.epoch_losses.back())
      << '\n';
  out << "validation rmse (normalized): " << csv::format_double(report.val_rmse)
      << ", mae: " << csv::format_double(report.val_mae) << '\n';
  out << "validation rmse (original): " << csv::format_double(original.rmse)
      << ", mae: " << csv::format_double(original.mae) << '\n';
  if (!cfg.paths.report.empty())
    write_train_report(cfg, report, original, out);
  return 0;
}

int cmd_gridsearch(const RunConfig &cfg, std::ostream &out) {
  require(cfg.paths.model, "paths.model (--model)");
  auto prepared = prepare_training_series(cfg);
  train::GridSearchOptions options;
  options.cell = cfg.shape.cell;
  options.train_fraction = cfg.train_fraction;
  options.target_feature = prepared.target;
  options.feature_names = prepared.raw.feature_names;
  options.on_candidate = [&out](const train::GridCandidate &c) {
    out << "candidate hidden=" << c.hidden << " layers=" << c.layers
        << " lookback=" << c.lookback;
    if (c.failed)
      out << " failed: " << c.error << '\n';
    else
      out << " rmse=" << csv::format_double(c.rmse) << '\n';
    out.flush();
  };
  auto result = train::grid_search(cfg.grid, prepared.normalized, cfg.train, options);
  result.best_network.scaler = prepared.scaler;
  model::save_model_file(cfg.paths.model, result.best_network);
  emit(cfg.paths.table, out,
       [&](std::ostream &os) { train::write_grid_csv(os, result.table); });
  out << "evaluated " << result.table.size() << " candidates; best hidden="
      << result.best.hidden << " layers=" << result.best.layers
      << " lookback=" << result.best.lookback
      << " rmse=" << csv::format_double(result.best.rmse) << '\n';
  return 0;
}

int cmd_prune(const RunConfig &cfg, std::ostream &out) {
  const auto net = model::load_model_file(require(cfg.paths.model, "paths.model (--model)"));
  require(cfg.paths.output, "paths.output (--out)");
  auto result = prune::prune_network(net, cfg.prune);
  if (cfg.finetune_epochs > 0) {
    auto s = series_for_model(net, cfg.paths.series);
    auto windows = data::make_windows(s.normalized, net.lookback, 1);
    auto [train_set, val_set] = data::split_dataset(windows, cfg.train_fraction);
    auto tc = cfg.train;
    tc.optimizer = train::Optimizer::gd;
    tc.epochs = cfg.finetune_epochs;
    train::train_network(result.network, train_set, val_set, tc);
  }
  model::save_model_file(cfg.paths.output, result.network);
  emit(cfg.paths.report, out,
       [&](std::ostream &os) { prune::write_report_json(os, result.report); });
  if (!cfg.paths.report.empty()) {
    out << "pruned " << prune::to_string(cfg.prune.method) << " amount "
        << csv::format_double(cfg.prune.amount) << ": params "
        << result.report.params_before << " -> " << result.report.params_after
        << ", flops " << result.report.flops_before << " -> "
        << result.report.flops_after << '\n';
  }
  return 0;
}

std::string per_size_path(const std::string &path, std::size_t size, bool many) {
  if (!many)
    return path;
  std::filesystem::path p(path);
  const auto ext = p.extension().string();
  p.replace_extension();
  return p.string() + ".b" + std::to_string(size) + (ext.empty() ? ".csv" : ext);
}

int cmd_online(const RunConfig &cfg, std::ostream &out) {
  const auto net = model::load_model_file(require(cfg.paths.model, "paths.model (--model)"));
  auto s = series_for_model(net, cfg.paths.series);
  if (cfg.online_start_row >= static_cast<std::size_t>(s.normalized.rows()))
    throw DataError("online.start_row is beyond the end of the series");
  const Matrix stream = s.normalized.bottomRows(
      s.normalized.rows() - static_cast<Eigen::Index>(cfg.online_start_row));

  auto sizes = cfg.batch_sizes;
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  const bool many = sizes.size() > 1;
  std::map<std::size_t, std::unique_ptr<std::ofstream>> streams;
  if (!cfg.paths.output.empty()) {
    for (auto b : sizes) {
      auto os = std::make_unique<std::ofstream>(per_size_path(cfg.paths.output, b, many));
      if (!*os)
        throw IoError("cannot open per-batch output for batch size " +
                      std::to_string(b));
      online::write_batch_csv_header(*os);
      streams[b] = std::move(os);
    }
  }
  auto rows = online::compare_batch_sizes(
      net, stream, sizes, cfg.online,
      [&streams](std::size_t b, const online::BatchResult &br) {
        auto it = streams.find(b);
        if (it != streams.end()) {
          online::write_batch_csv_row(*it->second, br);
          it->second->flush();
        }
      });

  std::optional<online::BatchSizeRow> static_row;
  if (cfg.include_static) {
    auto cfg_static = cfg.online;
    cfg_static.adapt_epochs = 0;
    auto r = online::compare_batch_sizes(net, stream, {sizes.front()}, cfg_static);
    static_row = std::move(r.front());
  }

  const auto write_summary = [&](std::ostream &os) {
    os << "batch_size,optimizer,adapt_epochs,cumulative_mae,cumulative_rmse,batches,"
          "status\n";
    const auto line = [&os](const online::BatchSizeRow &r, std::string_view opt,
                            std::size_t epochs) {
      os << r.batch_size << ',' << opt << ',' << epochs << ','
         << csv::format_double(r.cumulative_mae) << ','
         << csv::format_double(r.cumulative_rmse) << ',' << r.report.batches.size()
         << ',' << (r.failed ? "failed" : "ok") << '\n';
    };
    for (const auto &r : rows)
      line(r, train::to_string(cfg.online.optimizer), cfg.online.adapt_epochs);
    if (static_row)
      line(*static_row, "none", 0);
  };
  write_summary(out);
  if (!cfg.paths.table.empty())
    write_file_atomic(cfg.paths.table, write_summary);
  if (!cfg.paths.report.empty()) {
    write_file_atomic(cfg.paths.report, [&](std::ostream &os) {
      write_json_list(os, rows.size(), [&](std::ostream &item, std::size_t i) {
        online::write_report_json(item, rows[i].report);
      });
    });
  }
  for (const auto &r : rows)
    if (r.failed)
      throw NumericError("online run with batch size " +
                         std::to_string(r.batch_size) + " failed: " + r.error);
  return 0;
}

int cmd_forecast(const RunConfig &cfg, std::ostream &out) {
  const auto net = model::load_model_file(require(cfg.paths.model, "paths.model (--model)"));
  auto s = series_for_model(net, cfg.paths.series);
  const std::size_t k = net.lookback;
  const std::size_t m = cfg.horizon;
  const std::size_t length = s.raw.length();
  const std::size_t from =
      cfg.forecast_from.value_or(data::training_rows(length, cfg.train_fraction).end);
  std::vector<std::size_t> origins;
  for (std::size_t start = from; start + k + m <= length; ++start) {
    if (cfg.forecast_count > 0 && origins.size() >= cfg.forecast_count)
      break;
    origins.push_back(start);
  }
  if (origins.empty())
    throw DataError("forecast evaluation range is empty");
  const auto f = static_cast<Eigen::Index>(net.target_feature);
  Vector actual(static_cast<Eigen::Index>(origins.size()));
  Vector predicted(static_cast<Eigen::Index>(origins.size()));
  std::vector<std::int64_t> stamps;
  for (std::size_t i = 0; i < origins.size(); ++i) {
    const Matrix window = s.normalized.middleRows(
        static_cast<Eigen::Index>(origins[i]), static_cast<Eigen::Index>(k));
    const Matrix forecast =
        data::invert_scaler(model::forecast_multistep(net, window, m), *net.scaler);
    const std::size_t row = origins[i] + k + m - 1;
    stamps.push_back(s.raw.timestamp(row));
    actual(static_cast<Eigen::Index>(i)) = s.raw.values(static_cast<Eigen::Index>(row), f);
    predicted(static_cast<Eigen::Index>(i)) =
        forecast(static_cast<Eigen::Index>(m - 1), f);
  }
  emit(cfg.paths.output, out, [&](std::ostream &os) {
    os << "timestamp,actual,predicted\n";
    for (std::size_t i = 0; i < origins.size(); ++i)
      os << stamps[i] << ','
         << csv::format_double(actual(static_cast<Eigen::Index>(i))) << ','
         << csv::format_double(predicted(static_cast<Eigen::Index>(i))) << '\n';
  });
  if (!cfg.paths.output.empty()) {
    out << "forecasts: " << origins.size() << " at " << m << " steps ("
        << static_cast<std::int64_t>(m) * s.raw.interval_seconds
        << " s ahead)\n";
    out << "rmse (original): " << csv::format_double(eval::rmse(actual, predicted))
        << ", mae: " << csv::format_double(eval::mae(actual, predicted)) << '\n';
  }
  return 0;
}

int cmd_bench(const RunConfig &cfg, std::ostream &out) {
  std::vector<std::string> paths;
  for (auto &p : csv::split_line(require(cfg.paths.model, "paths.model (--model)")))
    if (!p.empty())
      paths.push_back(p);
  std::vector<std::pair<std::string, eval::EvalReport>> reports;
  for (const auto &path : paths) {
    const auto net = model::load_model_file(path);
    auto s = series_for_model(net, cfg.paths.series);
    const std::size_t length = s.raw.length();
    const std::size_t from = data::training_rows(length, cfg.train_fraction).end;
    if (from + net.lookback + 1 > length)
      throw DataError("series holds no benchmark windows after the training split");
    const auto windows = data::make_windows(
        Matrix(s.normalized.bottomRows(static_cast<Eigen::Index>(length - from))),
        net.lookback, 1);
    std::vector<Matrix> inputs;
    data::WindowedDataset eval_set = windows;
    if (eval_set.samples.size() > cfg.bench_windows)
      eval_set.samples.resize(cfg.bench_windows);
    for (const auto &sample : eval_set.samples)
      inputs.push_back(sample.input);
    auto report = eval::bench_forecast(net, inputs, cfg.bench_repetitions);
    const auto accuracy = eval::evaluate_next_step(net, eval_set);
    report.mae = accuracy.mae;
    report.rmse = accuracy.rmse;
    reports.emplace_back(path, report);
  }
  emit(cfg.paths.report, out, [&](std::ostream &os) {
    write_json_list(os, reports.size(), [&](std::ostream &item, std::size_t i) {
      eval::write_report_json(item, reports[i].second);
    });
  });
  if (!cfg.paths.output.empty()) {
    write_file_atomic(cfg.paths.output, [&](std::ostream &os) {
      os << "model,";
      eval::write_report_csv_header(os);
      for (const auto &[path, r] : reports) {
        os << csv::quote(path) << ',';
        eval::write_report_csv_row(os, r);
      }
    });
  }
  return 0;
}

// -- argument wiring -------------------------------------------------------------

std::string flag_for(const std::string &key) {
  std::string name = "--";
  for (char c : key)
    name.push_back(c == '.' || c == '_' ? '-' : c);
  return name;
}

struct Command {
  std::string name;
  std::string description;
  std::vector<std::string> sections;
  std::vector<std::pair<std::string, std::string>> aliases; // flag -> key
  std::vector<std::pair<std::string, std::string>> switches; // flag -> key (sets true)
  int (*run)(const RunConfig &, std::ostream &);
};

const std::vector<Command> &commands() {
  static const std::vector<Command> list{
      {"prepare",
       "aggregate a raw task-usage trace into a canonical machine series",
       {"paths", "data"},
       {{"--input", "paths.trace"},
        {"--machine", "data.machine"},
        {"--out", "paths.series"},
        {"--schema", "data.schema"},
        {"--interval", "data.interval"},
        {"--delimiter", "data.delimiter"}},
       {{"--header", "data.has_header"}},
       cmd_prepare},
      {"train",
       "train one network and save it with its scaler",
       {"paths", "series", "model", "train"},
       {{"--series", "paths.series"},
        {"--model", "paths.model"},
        {"--report", "paths.report"},
        {"--cell", "model.cell"},
        {"--hidden", "model.hidden"},
        {"--layers", "model.layers"},
        {"--lookback", "model.lookback"},
        {"--optimizer", "train.optimizer"},
        {"--epochs", "train.epochs"},
        {"--lr", "train.learning_rate"},
        {"--batch-size", "train.batch_size"},
        {"--seed", "train.seed"}},
       {},
       cmd_train},
      {"gridsearch",
       "grid search hidden size x layers x lookback, save the best network",
       {"paths", "series", "model", "grid", "train"},
       {{"--series", "paths.series"},
        {"--model", "paths.model"},
        {"--table", "paths.table"},
        {"--cell", "model.cell"},
        {"--hidden", "grid.hidden"},
        {"--layers", "grid.layers"},
        {"--lookback", "grid.lookback"},
        {"--optimizer", "train.optimizer"},
        {"--epochs", "train.epochs"},
        {"--lr", "train.learning_rate"},
        {"--batch-size", "train.batch_size"},
        {"--seed", "train.seed"}},
       {},
       cmd_gridsearch},
      {"prune",
       "structured pruning of hidden units with weight compaction",
       {"paths", "series", "prune", "train"},
       {{"--model", "paths.model"},
        {"--out", "paths.output"},
        {"--report", "paths.report"},
        {"--series", "paths.series"},
        {"--method", "prune.method"},
        {"--amount", "prune.amount"},
        {"--seed", "prune.seed"},
        {"--finetune-epochs", "prune.finetune_epochs"}},
       {},
       cmd_prune},
      {"online",
       "prequential forecast-then-adapt run for one or more batch sizes",
       {"paths", "online"},
       {{"--model", "paths.model"},
        {"--series", "paths.series"},
        {"--out", "paths.output"},
        {"--table", "paths.table"},
        {"--report", "paths.report"},
        {"--batch-sizes", "online.batch_sizes"},
        {"--optimizer", "online.optimizer"},
        {"--adapt-epochs", "online.adapt_epochs"},
        {"--lr", "online.learning_rate"},
        {"--start-row", "online.start_row"}},
       {{"--with-static", "online.include_static"}},
       cmd_online},
      {"forecast",
       "recursive multistep forecasts in original units",
       {"paths", "series", "forecast"},
       {{"--model", "paths.model"},
        {"--series", "paths.series"},
        {"--out", "paths.output"},
        {"--steps", "model.horizon"},
        {"--from", "forecast.from"},
        {"--count", "forecast.count"}},
       {},
       cmd_forecast},
      {"bench",
       "latency, flop and accuracy report for one or more models",
       {"paths", "series", "bench"},
       {{"--model", "paths.model"},
        {"--series", "paths.series"},
        {"--out", "paths.output"},
        {"--report", "paths.report"},
        {"--reps", "bench.repetitions"},
        {"--windows", "bench.windows"}},
       {},
       cmd_bench},
  };
  return list;
}

bool in_sections(const std::string &key, const std::vector<std::string> &sections) {
  const auto dot = key.find('.');
  const auto section = key.substr(0, dot);
  return std::find(sections.begin(), sections.end(), section) != sections.end();
}

} // namespace

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"loadcast: multivariate host-load forecasting with recurrent "
               "networks, structured pruning and online adaptation",
               "loadcast"};
  app.require_subcommand(1);
  app.footer(config::describe_keys());
  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "config file (key = value lines)");
  app.add_option("--set", sets, "override any key: --set train.epochs=10");

  struct Bound {
    std::string key;
    std::string value;
    CLI::Option *option = nullptr;
    bool is_switch = false;
    bool flag_value = false;
  };
  std::map<std::string, std::vector<std::unique_ptr<Bound>>> bound;
  std::map<std::string, CLI::App *> subs;

  for (const auto &cmd : commands()) {
    auto *sub = app.add_subcommand(cmd.name, cmd.description);
    sub->footer(config::describe_keys());
    subs[cmd.name] = sub;
    auto &list = bound[cmd.name];
    for (const auto &[flag, key] : cmd.aliases) {
      auto b = std::make_unique<Bound>();
      b->key = key;
      b->option = sub->add_option(flag, b->value, "sets " + key);
      list.push_back(std::move(b));
    }
    for (const auto &[flag, key] : cmd.switches) {
      auto b = std::make_unique<Bound>();
      b->key = key;
      b->is_switch = true;
      b->option = sub->add_flag(flag, b->flag_value, "sets " + key + " = true");
      list.push_back(std::move(b));
    }
    for (const auto &spec : config::keys()) {
      if (!in_sections(spec.key, cmd.sections))
        continue;
      auto b = std::make_unique<Bound>();
      b->key = spec.key;
      b->option = sub->add_option(flag_for(spec.key), b->value, spec.help);
      list.push_back(std::move(b));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    auto kv = config::KeyValues::defaults();
    if (const char *env = std::getenv("LOADCAST_CONFIG"); env && *env)
      kv.merge_file(env);
    if (!config_path.empty())
      kv.merge_file(config_path);
    for (const auto &assignment : sets) {
      const auto eq = assignment.find('=');
      if (eq == std::string::npos)
        throw ConfigError("--set expects key=value, got '" + assignment + "'");
      kv.set(assignment.substr(0, eq), assignment.substr(eq + 1));
    }
    for (const auto &cmd : commands()) {
      if (!subs[cmd.name]->parsed())
        continue;
      for (const auto &b : bound[cmd.name]) {
        if (b->option->count() == 0)
          continue;
        kv.set(b->key, b->is_switch ? (b->flag_value ? "true" : "false") : b->value);
      }
      const auto cfg = config::resolve(kv);
      return cmd.run(cfg, out);
    }
    throw InternalError("no subcommand dispatched");
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception &e) {
    err << "internal error: " << e.what() << '\n';
    return 5;
  }
}

} // namespace loadcast::cli
