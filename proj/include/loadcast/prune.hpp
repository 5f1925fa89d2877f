// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "loadcast/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace loadcast::prune {

enum class Method { l1, random };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);

struct PruneSpec {
  Method method = Method::l1;
  double amount = 0.0; // fraction of hidden units removed per layer, in [0, 1)
  std::uint64_t seed = 0;

  void validate() const;
};

struct PruneReport {
  Method method = Method::l1;
  double amount = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> removed; // per layer, ascending
  std::size_t params_before = 0;
  std::size_t params_after = 0;
  std::int64_t flops_before = 0;
  std::int64_t flops_after = 0;
};

/// floor(amount * hidden); throws ConfigError when that would remove every
/// unit or the amount is outside [0, 1).
std::size_t removal_count(double amount, std::size_t hidden);

/// L1 magnitude of every hidden unit of layer `layer`: the sum of absolute
/// values over all parameters that produce the unit's activation (its row in
/// every input and recurrent block, its bias entries and, for LSTM, its
/// peephole entries).
Vector unit_l1_scores(const model::Network &net, std::size_t layer);
Vector unit_l1_scores(const model::LayerParams &layer);

/// The floor(amount * H) lowest scores, ties to the lower index.
std::vector<std::size_t> select_prune_units(const Vector &scores,
                                            const PruneSpec &spec);

/// A uniform random subset of size floor(amount * H), drawn from `rng_seed`.
std::vector<std::size_t> select_random_units(std::size_t hidden,
                                             const PruneSpec &spec,
                                             std::uint64_t rng_seed);

/// Removes the given units (ascending, unique, < H) from one layer and the
/// matching input columns of whatever consumes that layer.
void remove_units(model::Network &net, std::size_t layer,
                  const std::vector<std::size_t> &units);

struct PruneResult {
  model::Network network;
  PruneReport report;
};

/// Structured per-layer pruning with physical compaction. The input network
/// is left untouched.
PruneResult prune_network(const model::Network &net, const PruneSpec &spec);

/// Fills the parameter and flop counts from the two networks.
void sparsity_report(const model::Network &before, const model::Network &after,
                     PruneReport &report);

void write_report_json(std::ostream &out, const PruneReport &report);

} // namespace loadcast::prune
