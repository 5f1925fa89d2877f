// SPDX-License-Identifier: Apache-2.0
#include "loadcast/model.hpp"

#include "loadcast/error.hpp"
#include "loadcast/random.hpp"

#include <cmath>

namespace loadcast::model {

std::string_view to_string(CellKind kind) {
  return kind == CellKind::gru ? "gru" : "lstm";
}

CellKind parse_cell_kind(std::string_view text) {
  if (text == "gru" || text == "GRU")
    return CellKind::gru;
  if (text == "lstm" || text == "LSTM")
    return CellKind::lstm;
  throw ConfigError("unknown cell kind '" + std::string(text) +
                    "' (expected gru or lstm)");
}

std::size_t gate_count(CellKind kind) { return kind == CellKind::gru ? 3 : 4; }

std::size_t peephole_count(CellKind kind) {
  return kind == CellKind::gru ? 0 : 3;
}

LayerParams LayerParams::zeros(CellKind kind, std::size_t input_width,
                               std::size_t hidden_width) {
  const auto in = static_cast<Eigen::Index>(input_width);
  const auto hid = static_cast<Eigen::Index>(hidden_width);
  LayerParams p;
  p.kind = kind;
  for (std::size_t g = 0; g < gate_count(kind); ++g) {
    p.input_weights.push_back(Matrix::Zero(hid, in));
    p.recurrent_weights.push_back(Matrix::Zero(hid, hid));
    p.biases.push_back(Vector::Zero(hid));
  }
  for (std::size_t v = 0; v < peephole_count(kind); ++v)
    p.peepholes.push_back(Vector::Zero(hid));
  return p;
}

void LayerParams::validate() const {
  const std::size_t gates = gate_count(kind);
  if (input_weights.size() != gates || recurrent_weights.size() != gates ||
      biases.size() != gates || peepholes.size() != peephole_count(kind))
    throw ShapeError("layer has the wrong number of gate blocks");
  const auto hid = recurrent_weights.front().rows();
  const auto in = input_weights.front().cols();
  if (hid < 1 || in < 1)
    throw ShapeError("layer widths must be positive");
  for (std::size_t g = 0; g < gates; ++g) {
    if (input_weights[g].rows() != hid || input_weights[g].cols() != in ||
        recurrent_weights[g].rows() != hid ||
        recurrent_weights[g].cols() != hid || biases[g].size() != hid)
      throw ShapeError("inconsistent gate block shapes in layer");
  }
  for (const auto &v : peepholes)
    if (v.size() != hid)
      throw ShapeError("inconsistent peephole length in layer");
}

std::size_t Parameters::scalar_count() const {
  std::size_t n = 0;
  for_each_block([&n](const std::string &, const auto &block) {
    n += static_cast<std::size_t>(block.size());
  });
  return n;
}

Parameters Parameters::zeros_like() const {
  Parameters out = *this;
  out.for_each_block([](const std::string &, auto &block) { block.setZero(); });
  return out;
}

Vector flatten(const Parameters &params) {
  Vector flat(static_cast<Eigen::Index>(params.scalar_count()));
  Eigen::Index pos = 0;
  params.for_each_block([&](const std::string &, const auto &block) {
    using Block = std::decay_t<decltype(block)>;
    if constexpr (std::is_same_v<Block, Matrix>) {
      for (Eigen::Index r = 0; r < block.rows(); ++r)
        for (Eigen::Index c = 0; c < block.cols(); ++c)
          flat(pos++) = block(r, c);
    } else {
      for (Eigen::Index i = 0; i < block.size(); ++i)
        flat(pos++) = block(i);
    }
  });
  return flat;
}

void assign_flat(Parameters &params, const Vector &flat) {
  if (static_cast<std::size_t>(flat.size()) != params.scalar_count())
    throw ShapeError("flat parameter vector has the wrong length");
  Eigen::Index pos = 0;
  params.for_each_block([&](const std::string &, auto &block) {
    using Block = std::decay_t<decltype(block)>;
    if constexpr (std::is_same_v<Block, Matrix>) {
      for (Eigen::Index r = 0; r < block.rows(); ++r)
        for (Eigen::Index c = 0; c < block.cols(); ++c)
          block(r, c) = flat(pos++);
    } else {
      for (Eigen::Index i = 0; i < block.size(); ++i)
        block(i) = flat(pos++);
    }
  });
}

std::vector<std::size_t> Network::hidden_widths() const {
  std::vector<std::size_t> widths;
  for (const auto &layer : params.layers)
    widths.push_back(layer.hidden_width());
  return widths;
}

void Network::validate() const {
  if (params.layers.empty())
    throw ShapeError("network has no recurrent layers");
  if (lookback < 1)
    throw ShapeError("network lookback must be >= 1");
  std::size_t width = feature_count();
  if (width < 1)
    throw ShapeError("network has no output features");
  for (const auto &layer : params.layers) {
    if (layer.kind != cell)
      throw ShapeError("layer cell kind differs from network cell kind");
    layer.validate();
    if (layer.input_width() != width)
      throw ShapeError("layer input width does not match the layer below");
    width = layer.hidden_width();
  }
  if (static_cast<std::size_t>(params.head_weights.cols()) != width ||
      params.head_weights.rows() != params.head_bias.size())
    throw ShapeError("head shape does not match the last layer");
  if (static_cast<std::size_t>(params.layers.front().input_width()) !=
      feature_count())
    throw ShapeError("first layer input width must equal the feature count");
  if (!feature_names.empty() && feature_names.size() != feature_count())
    throw ShapeError("feature name count does not match the feature count");
  if (target_feature >= feature_count())
    throw ShapeError("target feature index out of range");
  if (scaler && scaler->feature_count() != feature_count())
    throw ShapeError("scaler feature count does not match the network");
}

namespace {

void fill_uniform(Matrix &m, double bound, Rng &rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = rng.uniform(-bound, bound);
}

void fill_uniform(Vector &v, double bound, Rng &rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = rng.uniform(-bound, bound);
}

double glorot(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

} // namespace

Network make_zero_network(const NetworkShape &shape) {
  if (shape.features < 1 || shape.hidden < 1 || shape.layers < 1 ||
      shape.lookback < 1)
    throw ConfigError("network dimensions must all be >= 1");
  Network net;
  net.cell = shape.cell;
  net.lookback = shape.lookback;
  std::size_t width = shape.features;
  for (std::size_t l = 0; l < shape.layers; ++l) {
    net.params.layers.push_back(LayerParams::zeros(shape.cell, width, shape.hidden));
    width = shape.hidden;
  }
  net.params.head_weights = Matrix::Zero(static_cast<Eigen::Index>(shape.features),
                                         static_cast<Eigen::Index>(shape.hidden));
  net.params.head_bias = Vector::Zero(static_cast<Eigen::Index>(shape.features));
  return net;
}

Network make_network(const NetworkShape &shape, std::uint64_t seed,
                     std::vector<std::string> feature_names) {
  Network net = make_zero_network(shape);
  if (!feature_names.empty() && feature_names.size() != shape.features)
    throw ConfigError("feature name count does not match the feature count");
  net.feature_names = std::move(feature_names);
  Rng rng(seed);
  for (auto &layer : net.params.layers) {
    const std::size_t in = layer.input_width();
    const std::size_t hid = layer.hidden_width();
    for (auto &w : layer.input_weights)
      fill_uniform(w, glorot(in, hid), rng);
    for (auto &u : layer.recurrent_weights)
      fill_uniform(u, glorot(hid, hid), rng);
    for (auto &v : layer.peepholes)
      fill_uniform(v, glorot(hid, hid), rng);
  }
  fill_uniform(net.params.head_weights, glorot(shape.hidden, shape.features), rng);
  return net;
}

Vector activation(const Vector &x, Activation kind) {
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    out(i) = kind == Activation::sigmoid ? sigmoid(x(i)) : std::tanh(x(i));
  return out;
}

namespace {

Matrix gate_preactivation(const LayerParams &p, std::size_t gate,
                          const Matrix &input, const Matrix &hidden) {
  Matrix a = p.biases[gate].transpose().replicate(input.rows(), 1);
  add_product_transposed(a, input, p.input_weights[gate]);
  add_product_transposed(a, hidden, p.recurrent_weights[gate]);
  return a;
}

void add_peephole(Matrix &a, const Vector &diag, const Matrix &state) {
  a.array() += state.array().rowwise() * diag.transpose().array();
  MacCounter::add(state.size());
}

void check_step_shapes(const LayerParams &p, const Matrix &input,
                       const Matrix &h_prev) {
  if (static_cast<std::size_t>(input.cols()) != p.input_width() ||
      static_cast<std::size_t>(h_prev.cols()) != p.hidden_width() ||
      input.rows() != h_prev.rows())
    throw ShapeError("cell input/state shape does not match layer weights");
}

} // namespace

GruStep gru_cell_forward(const LayerParams &p, const Matrix &input,
                         const Matrix &h_prev) {
  if (p.kind != CellKind::gru)
    throw ShapeError("gru_cell_forward given non-GRU parameters");
  check_step_shapes(p, input, h_prev);
  GruStep step;
  auto &c = step.cache;
  c.input = input;
  c.h_prev = h_prev;
  c.update = gate_preactivation(p, gru_gate::update, input, h_prev);
  sigmoid_inplace(c.update);
  c.reset = gate_preactivation(p, gru_gate::reset, input, h_prev);
  sigmoid_inplace(c.reset);
  c.reset_hidden = c.reset.cwiseProduct(h_prev);
  c.candidate = gate_preactivation(p, gru_gate::candidate, input, c.reset_hidden);
  tanh_inplace(c.candidate);
  step.h = (1.0 - c.update.array()) * h_prev.array() +
           c.update.array() * c.candidate.array();
  return step;
}

GruVectorStep gru_cell_forward(const LayerParams &p, const Vector &input,
                               const Vector &h_prev) {
  auto step = gru_cell_forward(p, Matrix(input.transpose()),
                               Matrix(h_prev.transpose()));
  return {step.h.row(0).transpose(), std::move(step.cache)};
}

LstmStep lstm_cell_forward(const LayerParams &p, const Matrix &input,
                           const Matrix &h_prev, const Matrix &c_prev) {
  if (p.kind != CellKind::lstm)
    throw ShapeError("lstm_cell_forward given non-LSTM parameters");
  check_step_shapes(p, input, h_prev);
  if (c_prev.rows() != h_prev.rows() || c_prev.cols() != h_prev.cols())
    throw ShapeError("LSTM memory shape does not match hidden state");
  LstmStep step;
  auto &k = step.cache;
  k.input = input;
  k.h_prev = h_prev;
  k.c_prev = c_prev;
  k.forget = gate_preactivation(p, lstm_gate::forget, input, h_prev);
  add_peephole(k.forget, p.peepholes[lstm_peephole::forget], c_prev);
  sigmoid_inplace(k.forget);
  k.input_gate = gate_preactivation(p, lstm_gate::input, input, h_prev);
  add_peephole(k.input_gate, p.peepholes[lstm_peephole::input], c_prev);
  sigmoid_inplace(k.input_gate);
  k.candidate = gate_preactivation(p, lstm_gate::cell, input, h_prev);
  tanh_inplace(k.candidate);
  k.c = k.forget.cwiseProduct(c_prev) + k.input_gate.cwiseProduct(k.candidate);
  k.output = gate_preactivation(p, lstm_gate::output, input, h_prev);
  add_peephole(k.output, p.peepholes[lstm_peephole::output], k.c);
  sigmoid_inplace(k.output);
  k.tanh_c = k.c;
  tanh_inplace(k.tanh_c);
  step.h = k.output.cwiseProduct(k.tanh_c);
  step.c = k.c;
  return step;
}

LstmVectorStep lstm_cell_forward(const LayerParams &p, const Vector &input,
                                 const Vector &h_prev, const Vector &c_prev) {
  auto step = lstm_cell_forward(p, Matrix(input.transpose()),
                                Matrix(h_prev.transpose()),
                                Matrix(c_prev.transpose()));
  return {step.h.row(0).transpose(), step.c.row(0).transpose(),
          std::move(step.cache)};
}

Matrix forward_batch(const Network &net, const std::vector<Matrix> &steps,
                     ForwardTrace *trace) {
  if (steps.size() != net.lookback)
    throw ShapeError("window has " + std::to_string(steps.size()) +
                     " rows, network lookback is " +
                     std::to_string(net.lookback));
  const Eigen::Index batch = steps.front().rows();
  for (const auto &s : steps)
    if (static_cast<std::size_t>(s.cols()) != net.feature_count() ||
        s.rows() != batch)
      throw ShapeError("window feature count does not match the network");

  const std::size_t layers = net.layer_count();
  std::vector<Matrix> h(layers);
  std::vector<Matrix> c(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const auto width = static_cast<Eigen::Index>(net.params.layers[l].hidden_width());
    h[l] = Matrix::Zero(batch, width);
    if (net.cell == CellKind::lstm)
      c[l] = Matrix::Zero(batch, width);
  }
  if (trace) {
    trace->gru.clear();
    trace->lstm.clear();
  }
  for (const auto &x : steps) {
    const Matrix *input = &x;
    if (trace) {
      if (net.cell == CellKind::gru)
        trace->gru.emplace_back();
      else
        trace->lstm.emplace_back();
    }
    for (std::size_t l = 0; l < layers; ++l) {
      const auto &p = net.params.layers[l];
      if (net.cell == CellKind::gru) {
        auto step = gru_cell_forward(p, *input, h[l]);
        h[l] = std::move(step.h);
        if (trace)
          trace->gru.back().push_back(std::move(step.cache));
      } else {
        auto step = lstm_cell_forward(p, *input, h[l], c[l]);
        h[l] = std::move(step.h);
        c[l] = std::move(step.c);
        if (trace)
          trace->lstm.back().push_back(std::move(step.cache));
      }
      input = &h[l];
    }
  }
  Matrix prediction = net.params.head_bias.transpose().replicate(batch, 1);
  add_product_transposed(prediction, h.back(), net.params.head_weights);
  if (trace)
    trace->final_hidden = h.back();
  return prediction;
}

std::vector<Matrix> to_steps(const std::vector<const Matrix *> &windows) {
  if (windows.empty())
    throw ShapeError("no windows to regroup");
  const Eigen::Index k = windows.front()->rows();
  const Eigen::Index n = windows.front()->cols();
  std::vector<Matrix> steps(static_cast<std::size_t>(k),
                            Matrix(static_cast<Eigen::Index>(windows.size()), n));
  for (std::size_t b = 0; b < windows.size(); ++b) {
    const Matrix &w = *windows[b];
    if (w.rows() != k || w.cols() != n)
      throw ShapeError("windows in a batch must share one shape");
    for (Eigen::Index t = 0; t < k; ++t)
      steps[static_cast<std::size_t>(t)].row(static_cast<Eigen::Index>(b)) = w.row(t);
  }
  return steps;
}

ForwardResult network_forward(const Network &net, const Matrix &window) {
  if (static_cast<std::size_t>(window.rows()) != net.lookback ||
      static_cast<std::size_t>(window.cols()) != net.feature_count())
    throw ShapeError("window must be " + std::to_string(net.lookback) + " x " +
                     std::to_string(net.feature_count()));
  ForwardResult result;
  Matrix pred = forward_batch(net, to_steps({&window}), &result.trace);
  result.prediction = pred.row(0).transpose();
  return result;
}

Matrix predict_next(const Network &net,
                    const std::vector<const Matrix *> &windows) {
  if (windows.empty())
    return Matrix(0, static_cast<Eigen::Index>(net.feature_count()));
  return forward_batch(net, to_steps(windows));
}

Matrix forecast_multistep(const Network &net, const Matrix &window,
                          std::size_t steps) {
  if (steps < 1)
    throw ConfigError("forecast horizon must be >= 1");
  if (static_cast<std::size_t>(window.rows()) != net.lookback ||
      static_cast<std::size_t>(window.cols()) != net.feature_count())
    throw ShapeError("window must be " + std::to_string(net.lookback) + " x " +
                     std::to_string(net.feature_count()));
  const auto k = window.rows();
  Matrix out(static_cast<Eigen::Index>(steps), window.cols());
  Matrix current = window;
  for (std::size_t s = 0; s < steps; ++s) {
    Matrix pred = forward_batch(net, to_steps({&current}));
    out.row(static_cast<Eigen::Index>(s)) = pred.row(0);
    if (k > 1)
      current.topRows(k - 1) = Matrix(current.bottomRows(k - 1));
    current.row(k - 1) = pred.row(0);
  }
  return out;
}

std::size_t param_count(const Network &net) { return net.params.scalar_count(); }

FlopCount flop_count_per_forecast(const Network &net) {
  FlopCount f;
  const auto k = static_cast<std::int64_t>(net.lookback);
  const auto gates = static_cast<std::int64_t>(gate_count(net.cell));
  const auto peep = static_cast<std::int64_t>(peephole_count(net.cell));
  for (const auto &layer : net.params.layers) {
    const auto hid = static_cast<std::int64_t>(layer.hidden_width());
    const auto in = static_cast<std::int64_t>(layer.input_width());
    f.input += k * gates * hid * in;
    f.recurrent += k * gates * hid * hid;
    f.peephole += k * peep * hid;
  }
  f.head = static_cast<std::int64_t>(net.params.head_weights.size());
  return f;
}

} // namespace loadcast::model
