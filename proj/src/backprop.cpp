// SPDX-License-Identifier: Apache-2.0
#include "loadcast/train.hpp"

#include "loadcast/error.hpp"

#include <cmath>

namespace loadcast::train {

using model::CellKind;
using model::GradientSet;
using model::LayerParams;
using model::Network;

namespace {

struct StepGrad {
  Matrix dx;      // B x I (empty when not requested)
  Matrix dh_prev; // B x H
  Matrix dc_prev; // B x H, LSTM only
};

Matrix sigmoid_slope(const Matrix &s) {
  return (s.array() * (1.0 - s.array())).matrix();
}

Matrix tanh_slope(const Matrix &t) {
  return (1.0 - t.array().square()).matrix();
}

void accumulate_gate(LayerParams &g, std::size_t gate, const Matrix &da,
                     const Matrix &input, const Matrix &hidden) {
  add_transposed_product(g.input_weights[gate], da, input);
  add_transposed_product(g.recurrent_weights[gate], da, hidden);
  g.biases[gate] += da.colwise().sum().transpose();
}

StepGrad gru_backward(const LayerParams &p, const model::GruCache &c,
                      const Matrix &dh, LayerParams &g, bool need_dx) {
  namespace gate = model::gru_gate;
  const Matrix da_update = (dh.array() * (c.candidate - c.h_prev).array() *
                            sigmoid_slope(c.update).array())
                               .matrix();
  const Matrix da_candidate =
      (dh.array() * c.update.array() * tanh_slope(c.candidate).array()).matrix();
  const Matrix d_reset_hidden = da_candidate * p.recurrent_weights[gate::candidate];
  const Matrix da_reset = (d_reset_hidden.array() * c.h_prev.array() *
                           sigmoid_slope(c.reset).array())
                              .matrix();

  StepGrad out;
  out.dh_prev = (dh.array() * (1.0 - c.update.array()) +
                 d_reset_hidden.array() * c.reset.array())
                    .matrix();
  out.dh_prev.noalias() += da_update * p.recurrent_weights[gate::update];
  out.dh_prev.noalias() += da_reset * p.recurrent_weights[gate::reset];
  if (need_dx) {
    out.dx = da_update * p.input_weights[gate::update];
    out.dx.noalias() += da_reset * p.input_weights[gate::reset];
    out.dx.noalias() += da_candidate * p.input_weights[gate::candidate];
  }

  accumulate_gate(g, gate::update, da_update, c.input, c.h_prev);
  accumulate_gate(g, gate::reset, da_reset, c.input, c.h_prev);
  accumulate_gate(g, gate::candidate, da_candidate, c.input, c.reset_hidden);
  return out;
}

Matrix times_diag(const Matrix &m, const Vector &diag) {
  return (m.array().rowwise() * diag.transpose().array()).matrix();
}

StepGrad lstm_backward(const LayerParams &p, const model::LstmCache &c,
                       const Matrix &dh, const Matrix &dc_carry, LayerParams &g,
                       bool need_dx) {
  namespace peep = model::lstm_peephole;
  const Matrix da_output =
      (dh.array() * c.tanh_c.array() * sigmoid_slope(c.output).array()).matrix();
  Matrix dc = dc_carry;
  dc.array() += dh.array() * c.output.array() * tanh_slope(c.tanh_c).array();
  dc += times_diag(da_output, p.peepholes[peep::output]);

  const Matrix da_forget =
      (dc.array() * c.c_prev.array() * sigmoid_slope(c.forget).array()).matrix();
  const Matrix da_input = (dc.array() * c.candidate.array() *
                           sigmoid_slope(c.input_gate).array())
                              .matrix();
  const Matrix da_cell = (dc.array() * c.input_gate.array() *
                          tanh_slope(c.candidate).array())
                             .matrix();

  StepGrad out;
  out.dc_prev = dc.cwiseProduct(c.forget) +
                times_diag(da_forget, p.peepholes[peep::forget]) +
                times_diag(da_input, p.peepholes[peep::input]);
  // Indexed by gate slot: forget, input, cell, output.
  const Matrix *da[4] = {&da_forget, &da_input, &da_cell, &da_output};
  out.dh_prev = Matrix::Zero(dh.rows(), dh.cols());
  for (std::size_t k = 0; k < 4; ++k)
    out.dh_prev.noalias() += *da[k] * p.recurrent_weights[k];
  if (need_dx) {
    out.dx = Matrix::Zero(dh.rows(), static_cast<Eigen::Index>(p.input_width()));
    for (std::size_t k = 0; k < 4; ++k)
      out.dx.noalias() += *da[k] * p.input_weights[k];
  }

  for (std::size_t k = 0; k < 4; ++k)
    accumulate_gate(g, k, *da[k], c.input, c.h_prev);
  g.peepholes[peep::forget] +=
      da_forget.cwiseProduct(c.c_prev).colwise().sum().transpose();
  g.peepholes[peep::input] +=
      da_input.cwiseProduct(c.c_prev).colwise().sum().transpose();
  g.peepholes[peep::output] +=
      da_output.cwiseProduct(c.c).colwise().sum().transpose();
  return out;
}

struct BatchTensors {
  std::vector<Matrix> steps;
  Matrix targets;
};

BatchTensors gather(const Network &net, std::span<const data::Sample> batch) {
  if (batch.empty())
    throw DataError("empty training batch");
  std::vector<const Matrix *> windows;
  windows.reserve(batch.size());
  BatchTensors t;
  t.targets.resize(static_cast<Eigen::Index>(batch.size()),
                   static_cast<Eigen::Index>(net.feature_count()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto &s = batch[b];
    if (static_cast<std::size_t>(s.input.rows()) != net.lookback ||
        static_cast<std::size_t>(s.input.cols()) != net.feature_count() ||
        s.target.rows() < 1 ||
        static_cast<std::size_t>(s.target.cols()) != net.feature_count())
      throw ShapeError("sample " + std::to_string(b) +
                       " does not match the network shape");
    windows.push_back(&s.input);
    t.targets.row(static_cast<Eigen::Index>(b)) = s.target.row(0);
  }
  t.steps = model::to_steps(windows);
  return t;
}

void check_finite_rows(const Matrix &pred) {
  for (Eigen::Index b = 0; b < pred.rows(); ++b)
    if (!pred.row(b).allFinite())
      throw NumericError("non-finite prediction for sample " + std::to_string(b));
}

} // namespace

double mse_loss(const Matrix &pred, const Matrix &target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError("loss inputs differ in shape");
  if (pred.size() == 0)
    return 0.0;
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

double batch_loss(const Network &net, std::span<const data::Sample> batch) {
  auto t = gather(net, batch);
  const Matrix pred = model::forward_batch(net, t.steps);
  check_finite_rows(pred);
  return mse_loss(pred, t.targets);
}

LossAndGradient backprop(const Network &net, std::span<const data::Sample> batch) {
  auto t = gather(net, batch);
  model::ForwardTrace trace;
  const Matrix pred = model::forward_batch(net, t.steps, &trace);
  check_finite_rows(pred);

  LossAndGradient result;
  result.loss = mse_loss(pred, t.targets);
  result.grads = net.params.zeros_like();
  GradientSet &grads = result.grads;

  const Matrix d_pred = (pred - t.targets) * (2.0 / static_cast<double>(pred.size()));
  add_transposed_product(grads.head_weights, d_pred, trace.final_hidden);
  grads.head_bias += d_pred.colwise().sum().transpose();
  const Matrix dh_top = d_pred * net.params.head_weights;

  const std::size_t layers = net.layer_count();
  const std::size_t steps = net.lookback;
  const Eigen::Index rows = pred.rows();
  std::vector<Matrix> carry_h(layers);
  std::vector<Matrix> carry_c(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const auto width = static_cast<Eigen::Index>(net.params.layers[l].hidden_width());
    carry_h[l] = Matrix::Zero(rows, width);
    carry_c[l] = Matrix::Zero(rows, width);
  }

  for (std::size_t t_rev = 0; t_rev < steps; ++t_rev) {
    const std::size_t t = steps - 1 - t_rev;
    Matrix from_above;
    for (std::size_t l_rev = 0; l_rev < layers; ++l_rev) {
      const std::size_t l = layers - 1 - l_rev;
      Matrix dh = std::move(carry_h[l]);
      if (l + 1 == layers) {
        if (t + 1 == steps)
          dh += dh_top;
      } else {
        dh += from_above;
      }
      const bool need_dx = l > 0;
      StepGrad sg;
      if (net.cell == CellKind::gru) {
        sg = gru_backward(net.params.layers[l], trace.gru[t][l], dh,
                          grads.layers[l], need_dx);
      } else {
        sg = lstm_backward(net.params.layers[l], trace.lstm[t][l], dh, carry_c[l],
                           grads.layers[l], need_dx);
        carry_c[l] = std::move(sg.dc_prev);
      }
      carry_h[l] = std::move(sg.dh_prev);
      from_above = std::move(sg.dx);
    }
  }

  if (!std::isfinite(result.loss))
    throw NumericError("non-finite loss");
  bool finite = true;
  grads.for_each_block([&finite](const std::string &, const auto &block) {
    finite = finite && block.allFinite();
  });
  if (!finite)
    throw NumericError("non-finite gradient");
  return result;
}

Vector finite_diff_grad(const std::function<double(const Vector &)> &objective,
                        const Vector &at, double epsilon) {
  if (!(epsilon > 0.0))
    throw ConfigError("finite-difference step must be positive");
  Vector grad(at.size());
  Vector x = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    const double orig = x(i);
    x(i) = orig + epsilon;
    const double up = objective(x);
    x(i) = orig - epsilon;
    const double down = objective(x);
    x(i) = orig;
    grad(i) = (up - down) / (2.0 * epsilon);
  }
  return grad;
}

GradientSet finite_diff_grad(const Network &net, std::span<const data::Sample> batch,
                             double epsilon) {
  Network probe = net;
  const Vector flat = model::flatten(net.params);
  const Vector g = finite_diff_grad(
      [&](const Vector &x) {
        model::assign_flat(probe.params, x);
        return batch_loss(probe, batch);
      },
      flat, epsilon);
  GradientSet out = net.params.zeros_like();
  model::assign_flat(out, g);
  return out;
}

void gd_step(model::Parameters &params, const GradientSet &grads,
             double learning_rate) {
  // Walk both structures in lockstep through their flattened block lists.
  std::vector<Matrix *> pm;
  std::vector<Vector *> pv;
  params.for_each_block([&](const std::string &, auto &block) {
    using Block = std::decay_t<decltype(block)>;
    if constexpr (std::is_same_v<Block, Matrix>)
      pm.push_back(&block);
    else
      pv.push_back(&block);
  });
  std::size_t im = 0;
  std::size_t iv = 0;
  grads.for_each_block([&](const std::string &, const auto &block) {
    using Block = std::decay_t<decltype(block)>;
    if constexpr (std::is_same_v<Block, Matrix>) {
      if (im >= pm.size() || pm[im]->rows() != block.rows() ||
          pm[im]->cols() != block.cols())
        throw ShapeError("gradient is not congruent with parameters");
      *pm[im++] -= learning_rate * block;
    } else {
      if (iv >= pv.size() || pv[iv]->size() != block.size())
        throw ShapeError("gradient is not congruent with parameters");
      *pv[iv++] -= learning_rate * block;
    }
  });
  if (im != pm.size() || iv != pv.size())
    throw ShapeError("gradient is not congruent with parameters");
}

double clip_global_norm(GradientSet &grads, double max_norm) {
  double sq = 0.0;
  grads.for_each_block(
      [&sq](const std::string &, const auto &block) { sq += block.squaredNorm(); });
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    grads.for_each_block(
        [scale](const std::string &, auto &block) { block *= scale; });
  }
  return norm;
}

} // namespace loadcast::train
