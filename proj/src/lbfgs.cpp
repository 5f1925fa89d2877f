// SPDX-License-Identifier: Apache-2.0
#include "loadcast/train.hpp"

#include "loadcast/error.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace loadcast::train {

namespace {

struct CurvaturePair {
  Vector s;
  Vector y;
  double rho;
};

/// Two-loop recursion: returns H * g for the implicit inverse-Hessian
/// approximation built from `history` (oldest first).
Vector apply_inverse_hessian(const std::deque<CurvaturePair> &history,
                             const Vector &g) {
  Vector q = g;
  std::vector<double> alpha(history.size());
  for (std::size_t i = history.size(); i-- > 0;) {
    alpha[i] = history[i].rho * history[i].s.dot(q);
    q -= alpha[i] * history[i].y;
  }
  const auto &newest = history.back();
  const double gamma = newest.s.dot(newest.y) / newest.y.squaredNorm();
  Vector r = gamma * q;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const double beta = history[i].rho * history[i].y.dot(r);
    r += (alpha[i] - beta) * history[i].s;
  }
  return r;
}

} // namespace

LbfgsResult lbfgs_minimize(const Objective &objective, Vector start,
                           const LbfgsOptions &options) {
  if (options.memory < 1)
    throw ConfigError("L-BFGS memory must be >= 1");
  if (options.max_iters < 1)
    throw ConfigError("L-BFGS max_iters must be >= 1");
  if (!(options.tolerance > 0.0))
    throw ConfigError("L-BFGS tolerance must be positive");

  LbfgsResult result;
  result.x = std::move(start);
  Vector grad = Vector::Zero(result.x.size());
  result.value = objective(result.x, grad);
  if (!std::isfinite(result.value) || !grad.allFinite())
    throw NumericError("L-BFGS objective is not finite at the start point");
  result.trace.push_back(result.value);

  std::deque<CurvaturePair> history;
  Vector x_new(result.x.size());
  Vector g_new(result.x.size());
  for (;;) {
    result.gradient_norm = grad.norm();
    if (result.gradient_norm < options.tolerance) {
      result.status = LbfgsStatus::converged;
      break;
    }
    if (result.iterations >= options.max_iters) {
      result.status = LbfgsStatus::max_iterations;
      break;
    }

    Vector direction;
    double step = 1.0;
    if (!history.empty()) {
      direction = -apply_inverse_hessian(history, grad);
    }
    double slope = history.empty() ? 0.0 : direction.dot(grad);
    if (history.empty() || !(slope < 0.0)) {
      // No usable curvature: steepest descent with a unit-length first trial.
      history.clear();
      direction = -grad;
      slope = -result.gradient_norm * result.gradient_norm;
      step = std::min(1.0, 1.0 / result.gradient_norm);
    }

    bool accepted = false;
    double f_new = 0.0;
    for (std::size_t b = 0; b <= options.max_backtracks; ++b) {
      x_new = result.x + step * direction;
      g_new.setZero();
      f_new = objective(x_new, g_new);
      if (std::isfinite(f_new) && g_new.allFinite() &&
          f_new <= result.value + options.armijo_c * step * slope) {
        accepted = true;
        break;
      }
      step *= options.backtrack_factor;
    }
    if (!accepted) {
      result.status = LbfgsStatus::stalled;
      break;
    }

    CurvaturePair pair{x_new - result.x, g_new - grad, 0.0};
    const double sy = pair.s.dot(pair.y);
    if (sy > std::numeric_limits<double>::epsilon() * pair.y.squaredNorm()) {
      pair.rho = 1.0 / sy;
      history.push_back(std::move(pair));
      if (history.size() > options.memory)
        history.pop_front();
    }
    result.x = x_new;
    grad = g_new;
    result.value = f_new;
    result.trace.push_back(f_new);
    ++result.iterations;
  }
  return result;
}

} // namespace loadcast::train
