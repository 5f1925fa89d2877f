// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "loadcast/data.hpp"
#include "loadcast/model.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace loadcast::train {

/// Mean over all entries of the squared error.
double mse_loss(const Matrix &pred, const Matrix &target);

struct LossAndGradient {
  double loss = 0.0;
  model::GradientSet grads;
};

/// Exact gradient of the batch-mean next-step MSE (prediction vs the first
/// target row) by reverse accumulation through all steps and layers.
/// Throws NumericError naming the first offending sample on overflow.
LossAndGradient backprop(const model::Network &net,
                         std::span<const data::Sample> batch);

/// Batch-mean next-step MSE without gradients.
double batch_loss(const model::Network &net, std::span<const data::Sample> batch);

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
Vector finite_diff_grad(const std::function<double(const Vector &)> &objective,
                        const Vector &at, double epsilon);

/// Central-difference gradient of batch_loss for every parameter. Linear in
/// the parameter count; meant for small verification networks.
model::GradientSet finite_diff_grad(const model::Network &net,
                                    std::span<const data::Sample> batch,
                                    double epsilon);

/// weight <- weight - learning_rate * gradient, block by block.
void gd_step(model::Parameters &params, const model::GradientSet &grads,
             double learning_rate);

/// Scales the gradient down so its global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(model::GradientSet &grads, double max_norm);

// -- L-BFGS --------------------------------------------------------------------

/// Returns f(x) and writes the gradient into `grad` (already sized).
using Objective = std::function<double(const Vector &x, Vector &grad)>;

struct LbfgsOptions {
  std::size_t memory = 10;
  std::size_t max_iters = 100;
  double tolerance = 1e-8;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  std::size_t max_backtracks = 60;
};

enum class LbfgsStatus { converged, max_iterations, stalled };

struct LbfgsResult {
  Vector x;
  double value = 0.0;
  double gradient_norm = 0.0;
  std::vector<double> trace; // objective at the start and after every step
  std::size_t iterations = 0;
  LbfgsStatus status = LbfgsStatus::max_iterations;
};

/// Limited-memory BFGS: two-loop recursion over the last `memory` (s, y)
/// pairs, Armijo backtracking line search. A line search that cannot find
/// sufficient decrease ends the run with status `stalled` and the best
/// iterate found. Throws NumericError if the objective is non-finite at the
/// start point.
LbfgsResult lbfgs_minimize(const Objective &objective, Vector start,
                           const LbfgsOptions &options);

// -- training ------------------------------------------------------------------

enum class Optimizer { gd, lbfgs };

std::string_view to_string(Optimizer optimizer);
Optimizer parse_optimizer(std::string_view text);

struct TrainConfig {
  Optimizer optimizer = Optimizer::gd;
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;
  std::size_t lbfgs_memory = 10;
  std::size_t lbfgs_max_iters = 100;
  double convergence_tol = 1e-6;
  /// Global-norm gradient clip; 0 disables.
  double clip_norm = 5.0;
  /// Keep the cell-gate biases at zero (bias-free cell equations); the head
  /// bias still trains.
  bool freeze_biases = false;

  void validate() const;
};

struct TrainReport {
  std::vector<double> epoch_losses;
  double val_mae = 0.0;
  double val_rmse = 0.0;
  bool validated = false;
  double seconds = 0.0;
  std::uint64_t seed = 0;
  TrainConfig config;
};

/// GD: in-order mini-batches per epoch, backprop + clip + gd_step.
/// L-BFGS: one lbfgs_minimize run on the full-batch objective; epoch_losses
/// then holds the objective trace. Validation metrics are next-step MAE/RMSE
/// on the target feature in normalized units (skipped for an empty set).
TrainReport train_network(model::Network &net, const data::WindowedDataset &train_set,
                          const data::WindowedDataset &val_set,
                          const TrainConfig &config);

// -- grid search -----------------------------------------------------------------

struct GridSpec {
  std::set<std::size_t> hidden_sizes{32, 64};
  std::set<std::size_t> layer_counts{1, 3, 5};
  std::set<std::size_t> lookbacks{4, 8, 12};

  std::size_t candidate_count() const {
    return hidden_sizes.size() * layer_counts.size() * lookbacks.size();
  }
  void validate() const;
};

struct GridCandidate {
  std::size_t hidden = 0;
  std::size_t layers = 0;
  std::size_t lookback = 0;
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t params = 0;
  double seconds = 0.0;
  bool failed = false;
  std::string error;
};

struct GridResult {
  GridCandidate best;
  /// Successful candidates ranked best-first, failed ones appended.
  std::vector<GridCandidate> table;
  model::Network best_network;
};

struct GridSearchOptions {
  model::CellKind cell = model::CellKind::gru;
  double train_fraction = 0.8;
  std::size_t target_feature = 0;
  std::vector<std::string> feature_names;
  /// Called after every candidate (for progress output).
  std::function<void(const GridCandidate &)> on_candidate;
};

/// Trains one network per (hidden, layers, lookback) on the chronological
/// training split of `series` (already normalized, T x N) and ranks them by
/// validation RMSE; ties go to fewer parameters, then lower MAE.
GridResult grid_search(const GridSpec &space, const Matrix &series,
                       const TrainConfig &base_config,
                       const GridSearchOptions &options);

/// Ranking order used by grid_search.
bool ranks_before(const GridCandidate &a, const GridCandidate &b);

/// `hidden,layers,lookback,rmse,mae,params,seconds`
void write_grid_csv(std::ostream &out, const std::vector<GridCandidate> &table);

} // namespace loadcast::train
