// SPDX-License-Identifier: Apache-2.0
#include "loadcast/cli.hpp"
#include "loadcast/config.hpp"
#include "loadcast/csv.hpp"
#include "loadcast/error.hpp"
#include "loadcast/model.hpp"
#include "support/tempdir.hpp"
#include "support/trace_fixture.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

using namespace loadcast;
using fixtures::slurp;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "loadcast");
  std::vector<const char *> argv;
  for (const auto &a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string &text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    out.push_back(line);
  return out;
}

class CliTest : public ::testing::Test {
protected:
  void SetUp() override {
    unsetenv("LOADCAST_CONFIG");
    trace = dir.file("trace.csv");
    series = dir.file("series.csv");
    fixtures::write_simple_trace(trace, 240);
  }

  void prepare() {
    const auto r = run({"prepare", "--input", trace, "--schema", "simple", "--machine",
                        "m1", "--out", series});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  std::string train_small(const std::string &name, const std::string &seed = "42") {
    const auto model = dir.file(name);
    const auto r = run({"train", "--series", series, "--model", model, "--hidden", "8",
                        "--layers", "2", "--lookback", "6", "--epochs", "4", "--lr",
                        "0.1", "--seed", seed});
    EXPECT_EQ(r.code, 0) << r.err;
    return model;
  }

  fixtures::TempDir dir;
  std::string trace, series;
};

} // namespace

TEST_F(CliTest, HelpListsSubcommandsAndKeys) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const char *s : {"prepare", "train", "gridsearch", "prune", "online", "forecast",
                        "bench", "train.learning_rate"})
    EXPECT_NE(r.out.find(s), std::string::npos) << s;
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"train", "--no-such-flag"}).code, 2);
  EXPECT_EQ(run({"--set", "bogus.key=1", "train"}).code, 2);
  EXPECT_EQ(run({"--set", "train.epochs=zero", "train"}).code, 2);
  EXPECT_EQ(run({"train", "--series", series}).code, 2); // no --model
}

TEST_F(CliTest, PrepareEmitsRequestedMachineOnly) {
  prepare();
  const auto rows = lines(slurp(series));
  ASSERT_EQ(rows.size(), 241u);
  EXPECT_EQ(rows[0], "timestamp,cpu,memory,disk_io,disk_space");
  for (const auto &row : rows) {
    EXPECT_EQ(row.find(",,"), std::string::npos) << row;
    EXPECT_NE(row.back(), ',');
  }
  // m1 bucket sums are around 0.02; m2 would show 0.5 cpu
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto fields = csv::split_line(rows[i]);
    EXPECT_LT(csv::parse_double(fields[1]).value(), 0.1);
  }
  // bucket 7 was empty and is interpolated between its neighbours
  const auto f6 = csv::split_line(rows[7]), f7 = csv::split_line(rows[8]),
             f8 = csv::split_line(rows[9]);
  EXPECT_NEAR(csv::parse_double(f7[1]).value(),
              0.5 * (csv::parse_double(f6[1]).value() + csv::parse_double(f8[1]).value()), 1e-15);
}

TEST_F(CliTest, PrepareDefaultsToBusiestMachine) {
  const auto r =
      run({"prepare", "--input", trace, "--schema", "simple", "--out", series});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("machine: m1"), std::string::npos);
}

TEST_F(CliTest, PrepareMissingInputExitsThree) {
  const auto r = run({"prepare", "--input", dir.file("nope.csv"), "--schema", "simple",
                      "--out", series});
  EXPECT_EQ(r.code, 3);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, TrainIsByteReproducible) {
  prepare();
  const auto a = train_small("a.model");
  const auto b = train_small("b.model");
  const auto c = train_small("c.model", "7");
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_NE(slurp(a), slurp(c));
  const auto net = model::load_model_file(a);
  EXPECT_EQ(net.hidden_widths(), (std::vector<std::size_t>{8, 8}));
  EXPECT_EQ(net.lookback, 6u);
  EXPECT_TRUE(net.scaler.has_value());
}

TEST_F(CliTest, TrainReportJson) {
  prepare();
  const auto report = dir.file("train.json");
  const auto r = run({"train", "--series", series, "--model", dir.file("m.model"),
                      "--hidden", "4", "--layers", "1", "--lookback", "3", "--epochs", "2",
                      "--report", report});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(report));
  EXPECT_EQ(j["epoch_losses"].size(), 2u);
  EXPECT_EQ(j["config"]["seed"].get<int>(), 42);
}

TEST_F(CliTest, ForecastHorizonAndUnits) {
  prepare();
  const auto model = train_small("m.model");
  const auto out = dir.file("fc.csv");
  const auto r = run({"forecast", "--model", model, "--series", series, "--steps", "3",
                      "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("900 s ahead"), std::string::npos) << r.out;
  const auto rows = lines(slurp(out));
  ASSERT_GT(rows.size(), 1u);
  EXPECT_EQ(rows[0], "timestamp,actual,predicted");
  // held-out origin: first forecast targets row floor(0.8 * 240) + 6 + 3 - 1
  const auto first = csv::split_line(rows[1]);
  EXPECT_EQ(csv::parse_int(first[0]).value(), (192 + 6 + 3 - 1) * 300);
  EXPECT_EQ(rows.size(), 1u + (240 - 192 - 6 - 3 + 1));
  // actual values are in original units (bucket sums near 0.02)
  EXPECT_LT(csv::parse_double(first[1]).value(), 0.1);
  EXPECT_GT(csv::parse_double(first[1]).value(), 0.0);
}

TEST_F(CliTest, ForecastEmptyRangeExitsThree) {
  prepare();
  const auto model = train_small("m.model");
  const auto r = run({"forecast", "--model", model, "--series", series, "--from", "239"});
  EXPECT_EQ(r.code, 3);
}

TEST_F(CliTest, GridSearchWritesTable) {
  prepare();
  const auto table = dir.file("grid.csv");
  const auto model = dir.file("best.model");
  const auto r = run({"gridsearch", "--series", series, "--model", model, "--table", table,
                      "--hidden", "4,6", "--layers", "1", "--lookback", "3,5", "--epochs",
                      "2", "--lr", "0.1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(table));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "hidden,layers,lookback,rmse,mae,params,seconds");
  const auto best = csv::split_line(rows[1]);
  const auto net = model::load_model_file(model);
  EXPECT_EQ(std::to_string(net.hidden_widths().front()), best[0]);
  EXPECT_EQ(std::to_string(net.lookback), best[2]);
}

TEST_F(CliTest, PruneVariants) {
  prepare();
  const auto model = train_small("m.model");
  const auto l1 = dir.file("l1.model"), r1 = dir.file("r1.model"),
             r2 = dir.file("r2.model"), zero = dir.file("zero.model");
  const auto report = dir.file("prune.json");
  ASSERT_EQ(run({"prune", "--model", model, "--out", l1, "--method", "l1", "--amount",
                 "0.25", "--report", report})
                .code,
            0);
  EXPECT_EQ(model::load_model_file(l1).hidden_widths(), (std::vector<std::size_t>{6, 6}));
  const auto j = nlohmann::json::parse(slurp(report));
  EXPECT_LT(j["flops_after"].get<std::int64_t>(), j["flops_before"].get<std::int64_t>());

  ASSERT_EQ(run({"prune", "--model", model, "--out", r1, "--method", "random", "--seed",
                 "7", "--amount", "0.25"})
                .code,
            0);
  ASSERT_EQ(run({"prune", "--model", model, "--out", r2, "--method", "random", "--seed",
                 "7", "--amount", "0.25"})
                .code,
            0);
  EXPECT_EQ(slurp(r1), slurp(r2));

  ASSERT_EQ(run({"prune", "--model", model, "--out", zero, "--amount", "0"}).code, 0);
  const auto fa = run({"forecast", "--model", model, "--series", series});
  const auto fb = run({"forecast", "--model", zero, "--series", series});
  EXPECT_EQ(fa.out, fb.out);
  EXPECT_EQ(run({"prune", "--model", model, "--out", zero, "--amount", "1.5"}).code, 2);
}

TEST_F(CliTest, PruneWithFinetune) {
  prepare();
  const auto model = train_small("m.model");
  const auto out = dir.file("ft.model");
  const auto r = run({"prune", "--model", model, "--out", out, "--amount", "0.25",
                      "--finetune-epochs", "2", "--series", series});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(model::load_model_file(out).hidden_widths(), (std::vector<std::size_t>{6, 6}));
}

TEST_F(CliTest, OnlineSummaryAndPerBatchFiles) {
  prepare();
  const auto model = train_small("m.model");
  const auto table = dir.file("online.csv");
  const auto per = dir.file("batches.csv");
  const auto r = run({"online", "--model", model, "--series", series, "--batch-sizes",
                      "32,64", "--optimizer", "gd", "--table", table, "--out", per,
                      "--with-static"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(table));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].rfind("batch_size,optimizer,adapt_epochs,cumulative_mae,"
                          "cumulative_rmse,batches",
                          0),
            0u);
  EXPECT_EQ(rows[1].rfind("32,gd,1,", 0), 0u);
  EXPECT_EQ(rows[2].rfind("64,gd,1,", 0), 0u);
  EXPECT_EQ(rows[3].rfind("32,none,0,", 0), 0u);
  const auto b32 = lines(slurp(dir.file("batches.b32.csv")));
  EXPECT_EQ(b32.size(), 1u + (240 - 6) / 32);
  EXPECT_EQ(b32[0], "batch_index,mae,rmse,adapt_seconds");
  EXPECT_TRUE(std::filesystem::exists(dir.file("batches.b64.csv")));
}

TEST_F(CliTest, OnlineStaticViaAdaptEpochsZero) {
  prepare();
  const auto model = train_small("m.model");
  const auto r = run({"online", "--model", model, "--series", series, "--batch-sizes",
                      "50", "--adapt-epochs", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(r.out).size(), 2u);
}

TEST_F(CliTest, BenchComparesModels) {
  prepare();
  const auto model = train_small("m.model");
  const auto pruned = dir.file("p.model");
  ASSERT_EQ(run({"prune", "--model", model, "--out", pruned, "--amount", "0.5"}).code, 0);
  const auto csvout = dir.file("bench.csv");
  const auto r = run({"bench", "--model", model + "," + pruned, "--series", series,
                      "--reps", "2", "--windows", "5", "--out", csvout, "--report",
                      dir.file("bench.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(dir.file("bench.json")));
  ASSERT_TRUE(j.is_array());
  EXPECT_EQ(j.size(), 2u);
  const auto rows = lines(slurp(csvout));
  ASSERT_EQ(rows.size(), 3u);
  const auto header = csv::split_line(rows[0]);
  const auto col = std::find(header.begin(), header.end(), "flops") - header.begin();
  ASSERT_LT(static_cast<std::size_t>(col), header.size());
  const auto full = csv::parse_int(csv::split_line(rows[1])[static_cast<std::size_t>(col)]).value();
  const auto small = csv::parse_int(csv::split_line(rows[2])[static_cast<std::size_t>(col)]).value();
  EXPECT_LT(small, full);
}

TEST_F(CliTest, ConfigPrecedence) {
  prepare();
  const auto env_cfg = dir.file("env.cfg");
  const auto file_cfg = dir.file("file.cfg");
  std::ofstream(env_cfg) << "# defaults for this test\nmodel.hidden = 3\nmodel.layers = 1\n"
                            "model.lookback = 4\ntrain.epochs = 1\n";
  std::ofstream(file_cfg) << "model.hidden = 5\n";
  setenv("LOADCAST_CONFIG", env_cfg.c_str(), 1);
  const auto m1 = dir.file("m1.model"), m2 = dir.file("m2.model"),
             m3 = dir.file("m3.model"), m4 = dir.file("m4.model");
  ASSERT_EQ(run({"train", "--series", series, "--model", m1}).code, 0);
  ASSERT_EQ(run({"--config", file_cfg, "train", "--series", series, "--model", m2}).code, 0);
  ASSERT_EQ(run({"--config", file_cfg, "--set", "model.hidden=6", "train", "--series",
                 series, "--model", m3})
                .code,
            0);
  ASSERT_EQ(run({"--config", file_cfg, "--set", "model.hidden=6", "train", "--series",
                 series, "--model", m4, "--hidden", "7"})
                .code,
            0);
  unsetenv("LOADCAST_CONFIG");
  EXPECT_EQ(model::load_model_file(m1).hidden_widths().front(), 3u);
  EXPECT_EQ(model::load_model_file(m2).hidden_widths().front(), 5u);
  EXPECT_EQ(model::load_model_file(m3).hidden_widths().front(), 6u);
  EXPECT_EQ(model::load_model_file(m4).hidden_widths().front(), 7u);
  EXPECT_EQ(model::load_model_file(m1).lookback, 4u);
}

TEST_F(CliTest, GenericKeyFlags) {
  prepare();
  const auto m = dir.file("g.model");
  const auto r = run({"train", "--series", series, "--model", m, "--model-hidden", "3",
                      "--model-layers", "1", "--model-lookback", "2",
                      "--train-epochs", "1", "--model-cell", "lstm"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto net = model::load_model_file(m);
  EXPECT_EQ(net.cell, model::CellKind::lstm);
  EXPECT_EQ(net.lookback, 2u);
}

TEST(Config, DefaultsResolve) {
  const auto cfg = config::resolve(config::KeyValues::defaults());
  EXPECT_EQ(cfg.shape.hidden, 64u);
  EXPECT_EQ(cfg.shape.layers, 3u);
  EXPECT_EQ(cfg.shape.lookback, 12u);
  EXPECT_EQ(cfg.horizon, 3u);
  EXPECT_EQ(cfg.grid.candidate_count(), 18u);
  EXPECT_EQ(cfg.interval_seconds, 300);
  EXPECT_DOUBLE_EQ(cfg.train_fraction, 0.8);
  EXPECT_EQ(cfg.online.batch_size, 128u);
  EXPECT_EQ(cfg.batch_sizes, (std::vector<std::size_t>{64, 128}));
}

TEST(Config, MergeParsesCommentsAndRejectsUnknown) {
  auto kv = config::KeyValues::defaults();
  std::istringstream good("# comment\n\ntrain.epochs = 7  # trailing\n");
  kv.merge(good, "test");
  EXPECT_EQ(kv.get("train.epochs"), "7");
  std::istringstream bad("nope.key = 1\n");
  EXPECT_THROW(kv.merge(bad, "test"), ConfigError);
  std::istringstream malformed("train.epochs 7\n");
  EXPECT_THROW(kv.merge(malformed, "test"), ConfigError);
}

TEST(Config, BadValuesRejected) {
  for (auto [key, value] : std::vector<std::pair<std::string, std::string>>{
           {"model.cell", "rnn"},
           {"train.optimizer", "adam"},
           {"prune.method", "l2"},
           {"series.train_fraction", "1.5"},
           {"model.hidden", "-3"},
           {"grid.hidden", "32,,64"},
           {"online.batch_sizes", "0"},
           {"data.schema", "other"}}) {
    auto kv = config::KeyValues::defaults();
    kv.set(key, value);
    EXPECT_THROW(config::resolve(kv), ConfigError) << key << "=" << value;
  }
}
