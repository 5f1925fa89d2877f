// SPDX-License-Identifier: Apache-2.0
#include "loadcast/prune.hpp"

#include "loadcast/error.hpp"
#include "loadcast/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace loadcast::prune {

std::string_view to_string(Method method) {
  return method == Method::l1 ? "l1" : "random";
}

Method parse_method(std::string_view text) {
  if (text == "l1" || text == "L1")
    return Method::l1;
  if (text == "random" || text == "RANDOM")
    return Method::random;
  throw ConfigError("unknown prune method '" + std::string(text) +
                    "' (expected l1 or random)");
}

void PruneSpec::validate() const {
  if (!(amount >= 0.0 && amount < 1.0))
    throw ConfigError("prune amount must lie in [0, 1)");
}

std::size_t removal_count(double amount, std::size_t hidden) {
  if (!(amount >= 0.0 && amount < 1.0))
    throw ConfigError("prune amount must lie in [0, 1)");
  const auto count =
      static_cast<std::size_t>(std::floor(amount * static_cast<double>(hidden)));
  if (count >= hidden)
    throw ConfigError("prune amount would remove every unit of a layer");
  return count;
}

Vector unit_l1_scores(const model::LayerParams &layer) {
  Vector scores = Vector::Zero(static_cast<Eigen::Index>(layer.hidden_width()));
  for (const auto &w : layer.input_weights)
    scores += w.cwiseAbs().rowwise().sum();
  for (const auto &u : layer.recurrent_weights)
    scores += u.cwiseAbs().rowwise().sum();
  for (const auto &b : layer.biases)
    scores += b.cwiseAbs();
  for (const auto &v : layer.peepholes)
    scores += v.cwiseAbs();
  return scores;
}

Vector unit_l1_scores(const model::Network &net, std::size_t layer) {
  if (layer >= net.layer_count())
    throw ConfigError("layer index out of range");
  return unit_l1_scores(net.params.layers[layer]);
}

std::vector<std::size_t> select_prune_units(const Vector &scores,
                                            const PruneSpec &spec) {
  const auto hidden = static_cast<std::size_t>(scores.size());
  const std::size_t count = removal_count(spec.amount, hidden);
  std::vector<std::size_t> order(hidden);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) < scores(static_cast<Eigen::Index>(b));
  });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::size_t> select_random_units(std::size_t hidden,
                                             const PruneSpec &spec,
                                             std::uint64_t rng_seed) {
  const std::size_t count = removal_count(spec.amount, hidden);
  std::vector<std::size_t> pool(hidden);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(rng_seed);
  // Partial Fisher-Yates: the first `count` slots become the sample.
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(hidden - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

namespace {

std::vector<Eigen::Index> kept_indices(std::size_t width,
                                       const std::vector<std::size_t> &removed) {
  std::vector<Eigen::Index> keep;
  std::size_t r = 0;
  for (std::size_t i = 0; i < width; ++i) {
    if (r < removed.size() && removed[r] == i) {
      ++r;
      continue;
    }
    keep.push_back(static_cast<Eigen::Index>(i));
  }
  return keep;
}

Matrix take_rows(const Matrix &m, const std::vector<Eigen::Index> &rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

Matrix take_cols(const Matrix &m, const std::vector<Eigen::Index> &cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i)
    out.col(static_cast<Eigen::Index>(i)) = m.col(cols[i]);
  return out;
}

Vector take(const Vector &v, const std::vector<Eigen::Index> &idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return out;
}

} // namespace

void remove_units(model::Network &net, std::size_t layer,
                  const std::vector<std::size_t> &units) {
  if (layer >= net.layer_count())
    throw InternalError("prune layer index out of range");
  auto &p = net.params.layers[layer];
  const std::size_t width = p.hidden_width();
  for (std::size_t i = 0; i < units.size(); ++i)
    if (units[i] >= width || (i > 0 && units[i] <= units[i - 1]))
      throw InternalError("prune unit list must be ascending, unique and in range");
  if (units.size() >= width)
    throw InternalError("prune would remove every unit of a layer");
  if (units.empty())
    return;
  const auto keep = kept_indices(width, units);
  for (auto &w : p.input_weights)
    w = take_rows(w, keep);
  for (auto &u : p.recurrent_weights)
    u = take_cols(take_rows(u, keep), keep);
  for (auto &b : p.biases)
    b = take(b, keep);
  for (auto &v : p.peepholes)
    v = take(v, keep);
  if (layer + 1 < net.layer_count()) {
    for (auto &w : net.params.layers[layer + 1].input_weights)
      w = take_cols(w, keep);
  } else {
    net.params.head_weights = take_cols(net.params.head_weights, keep);
  }
}

void sparsity_report(const model::Network &before, const model::Network &after,
                     PruneReport &report) {
  report.params_before = model::param_count(before);
  report.params_after = model::param_count(after);
  report.flops_before = model::flop_count_per_forecast(before).total();
  report.flops_after = model::flop_count_per_forecast(after).total();
}

PruneResult prune_network(const model::Network &net, const PruneSpec &spec) {
  spec.validate();
  net.validate();
  PruneResult result{net, {}};
  auto &report = result.report;
  report.method = spec.method;
  report.amount = spec.amount;
  report.seed = spec.seed;
  // Selection reads the original weights; later layers' input columns are
  // removed by compaction and do not feed their own scores.
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto &layer = net.params.layers[l];
    std::vector<std::size_t> units;
    if (spec.method == Method::l1)
      units = select_prune_units(unit_l1_scores(layer), spec);
    else
      units = select_random_units(layer.hidden_width(), spec, spec.seed + l);
    report.removed.push_back(std::move(units));
  }
  for (std::size_t l = 0; l < net.layer_count(); ++l)
    remove_units(result.network, l, report.removed[l]);
  result.network.validate();
  sparsity_report(net, result.network, report);
  return result;
}

void write_report_json(std::ostream &out, const PruneReport &report) {
  nlohmann::ordered_json j;
  j["method"] = std::string(to_string(report.method));
  j["amount"] = report.amount;
  if (report.method == Method::random)
    j["seed"] = report.seed;
  j["removed"] = report.removed;
  j["params_before"] = report.params_before;
  j["params_after"] = report.params_after;
  j["flops_before"] = report.flops_before;
  j["flops_after"] = report.flops_after;
  out << j.dump(2) << '\n';
}

} // namespace loadcast::prune
