// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "loadcast/data.hpp"
#include "loadcast/linalg.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace loadcast::model {

enum class CellKind { gru, lstm };

std::string_view to_string(CellKind kind);
/// Accepts "gru" / "lstm"; throws ConfigError otherwise.
CellKind parse_cell_kind(std::string_view text);

std::size_t gate_count(CellKind kind);
std::size_t peephole_count(CellKind kind);

// Gate slots inside LayerParams.
namespace gru_gate {
inline constexpr std::size_t update = 0;
inline constexpr std::size_t reset = 1;
inline constexpr std::size_t candidate = 2;
} // namespace gru_gate

namespace lstm_gate {
inline constexpr std::size_t forget = 0;
inline constexpr std::size_t input = 1;
inline constexpr std::size_t cell = 2;
inline constexpr std::size_t output = 3;
} // namespace lstm_gate

// Peephole (diagonal) slots for LSTM layers.
namespace lstm_peephole {
inline constexpr std::size_t forget = 0;
inline constexpr std::size_t input = 1;
inline constexpr std::size_t output = 2;
} // namespace lstm_peephole

/// Weights of one recurrent layer. Every gate g owns an H x I input block,
/// an H x H recurrent block and a length-H bias; LSTM layers also carry the
/// diagonal peephole weights as length-H vectors.
///
/// GRU slots: update (W_z, U_z), reset (W_r, U_r), candidate (W_h, U_h).
/// LSTM slots: forget, input, cell, output, peepholes V_f, V_i, V_o.
struct LayerParams {
  CellKind kind = CellKind::gru;
  std::vector<Matrix> input_weights;
  std::vector<Matrix> recurrent_weights;
  std::vector<Vector> peepholes;
  std::vector<Vector> biases;

  static LayerParams zeros(CellKind kind, std::size_t input_width,
                           std::size_t hidden_width);

  std::size_t hidden_width() const {
    return static_cast<std::size_t>(recurrent_weights.front().rows());
  }
  std::size_t input_width() const {
    return static_cast<std::size_t>(input_weights.front().cols());
  }

  /// Throws ShapeError unless every block agrees on (I, H).
  void validate() const;
};

/// All trainable blocks of a network. A GradientSet has exactly this shape.
struct Parameters {
  std::vector<LayerParams> layers;
  Matrix head_weights; // N x H_last
  Vector head_bias;    // N

  /// Visits every block in the declared serialization order with a stable
  /// name, e.g. "layer1.U.2" or "head.W". The callback receives Matrix& or
  /// Vector& (const-qualified for the const overload).
  template <class Fn> void for_each_block(Fn &&fn);
  template <class Fn> void for_each_block(Fn &&fn) const;

  std::size_t scalar_count() const;
  Parameters zeros_like() const;
};

using GradientSet = Parameters;

/// Flattens blocks in for_each_block order (row-major within a matrix).
Vector flatten(const Parameters &params);
void assign_flat(Parameters &params, const Vector &flat);

/// Stacked recurrent forecaster with a dense head that maps the last layer's
/// final hidden state to the next normalized feature vector.
struct Network {
  CellKind cell = CellKind::gru;
  std::size_t lookback = 1;
  std::vector<std::string> feature_names;
  std::size_t target_feature = 0;
  Parameters params;
  std::optional<data::ScalerParams> scaler;

  std::size_t feature_count() const {
    return static_cast<std::size_t>(params.head_bias.size());
  }
  std::size_t layer_count() const { return params.layers.size(); }
  std::vector<std::size_t> hidden_widths() const;

  void validate() const;
};

struct NetworkShape {
  CellKind cell = CellKind::gru;
  std::size_t features = 4;
  std::size_t hidden = 64;
  std::size_t layers = 3;
  std::size_t lookback = 12;
};

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)) per block, biases zero.
/// Peephole vectors are treated as H x H diagonal blocks for the bound.
Network make_network(const NetworkShape &shape, std::uint64_t seed,
                     std::vector<std::string> feature_names = {});

/// Same shape, every parameter zero.
Network make_zero_network(const NetworkShape &shape);

enum class Activation { sigmoid, tanh };

Vector activation(const Vector &x, Activation kind);

// -- cells ------------------------------------------------------------------
// Batched forms take one sample per row (B x I inputs, B x H states).

struct GruCache {
  Matrix input;
  Matrix h_prev;
  Matrix update;
  Matrix reset;
  Matrix candidate;
  Matrix reset_hidden; // reset ⊙ h_prev
};

struct GruStep {
  Matrix h;
  GruCache cache;
};

GruStep gru_cell_forward(const LayerParams &params, const Matrix &input,
                         const Matrix &h_prev);

struct GruVectorStep {
  Vector h;
  GruCache cache;
};

GruVectorStep gru_cell_forward(const LayerParams &params, const Vector &input,
                               const Vector &h_prev);

struct LstmCache {
  Matrix input;
  Matrix h_prev;
  Matrix c_prev;
  Matrix forget;
  Matrix input_gate;
  Matrix candidate;
  Matrix c;
  Matrix output;
  Matrix tanh_c;
};

struct LstmStep {
  Matrix h;
  Matrix c;
  LstmCache cache;
};

LstmStep lstm_cell_forward(const LayerParams &params, const Matrix &input,
                           const Matrix &h_prev, const Matrix &c_prev);

struct LstmVectorStep {
  Vector h;
  Vector c;
  LstmCache cache;
};

LstmVectorStep lstm_cell_forward(const LayerParams &params, const Vector &input,
                                 const Vector &h_prev, const Vector &c_prev);

// -- network ----------------------------------------------------------------

/// Per-step, per-layer caches retained for backpropagation through time.
struct ForwardTrace {
  std::vector<std::vector<GruCache>> gru;   // [step][layer]
  std::vector<std::vector<LstmCache>> lstm; // [step][layer]
  Matrix final_hidden;                      // B x H_last
};

/// `steps[t]` holds the t-th row of every window in the batch (B x N).
/// Returns the B x N next-step predictions.
Matrix forward_batch(const Network &net, const std::vector<Matrix> &steps,
                     ForwardTrace *trace = nullptr);

/// Regroups windows (each k x N) into step-major B x N blocks.
std::vector<Matrix> to_steps(const std::vector<const Matrix *> &windows);

struct ForwardResult {
  Vector prediction;
  ForwardTrace trace;
};

ForwardResult network_forward(const Network &net, const Matrix &window);

/// Next-step predictions for many windows at once, one row per window.
Matrix predict_next(const Network &net,
                    const std::vector<const Matrix *> &windows);

/// Recursive multistep forecast: predict, append the prediction, drop the
/// oldest row, repeat. Returns m x N in normalized units.
Matrix forecast_multistep(const Network &net, const Matrix &window,
                          std::size_t steps);

std::size_t param_count(const Network &net);

/// Multiply-accumulate counts of one k-step forecast.
struct FlopCount {
  std::int64_t input = 0;     // k * sum_l G * H_l * I_l
  std::int64_t recurrent = 0; // k * sum_l G * H_l^2
  std::int64_t peephole = 0;  // k * sum_l 3 * H_l (LSTM only)
  std::int64_t head = 0;      // N * H_last
  std::int64_t total() const { return input + recurrent + peephole + head; }
};

FlopCount flop_count_per_forecast(const Network &net);

// -- serialization ------------------------------------------------------------

/// Text model format; see docs/model_format.md. Doubles are written as
/// hexadecimal floating point so a load/save cycle is bit-exact.
void save_model(std::ostream &out, const Network &net);
Network load_model(std::istream &in);

/// Writes to `<path>.tmp` then renames, so a failed save never leaves a
/// partial model behind.
void save_model_file(const std::string &path, const Network &net);
Network load_model_file(const std::string &path);

// -- template definitions ---------------------------------------------------

namespace detail {
inline std::string block_name(std::size_t layer, const char *kind,
                              std::size_t slot) {
  return "layer" + std::to_string(layer) + "." + kind + "." +
         std::to_string(slot);
}
} // namespace detail

template <class Self, class Fn> void for_each_block_impl(Self &self, Fn &&fn) {
  for (std::size_t l = 0; l < self.layers.size(); ++l) {
    auto &layer = self.layers[l];
    for (std::size_t g = 0; g < layer.input_weights.size(); ++g)
      fn(detail::block_name(l, "W", g), layer.input_weights[g]);
    for (std::size_t g = 0; g < layer.recurrent_weights.size(); ++g)
      fn(detail::block_name(l, "U", g), layer.recurrent_weights[g]);
    for (std::size_t p = 0; p < layer.peepholes.size(); ++p)
      fn(detail::block_name(l, "V", p), layer.peepholes[p]);
    for (std::size_t g = 0; g < layer.biases.size(); ++g)
      fn(detail::block_name(l, "b", g), layer.biases[g]);
  }
  fn(std::string("head.W"), self.head_weights);
  fn(std::string("head.b"), self.head_bias);
}

template <class Fn> void Parameters::for_each_block(Fn &&fn) {
  for_each_block_impl(*this, fn);
}

template <class Fn> void Parameters::for_each_block(Fn &&fn) const {
  for_each_block_impl(*this, fn);
}

} // namespace loadcast::model
