// SPDX-License-Identifier: Apache-2.0
// Scalar-loop reference forward pass used as an oracle against the batched
// Eigen implementation. Deliberately written element by element in long
// double with no shared code from the library.
#pragma once

#include "loadcast/model.hpp"

#include <cmath>
#include <vector>

namespace loadcast::fixtures {

using Real = long double;
using RVec = std::vector<Real>;

inline Real ref_sigmoid(Real x) { return 1.0L / (1.0L + std::exp(-x)); }

/// sum_j W(r, j) * v[j]
inline Real dot_row(const Matrix &w, Eigen::Index r, const RVec &v) {
  Real s = 0;
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    s += static_cast<Real>(w(r, j)) * v[static_cast<std::size_t>(j)];
  return s;
}

/// Optional per-layer masks: mask[l][u] == false forces unit u of layer l
/// to zero after every step (both h and, for LSTM, c).
using UnitMask = std::vector<std::vector<bool>>;

inline Vector reference_forward(const model::Network &net, const Matrix &window,
                                 const UnitMask *mask = nullptr) {
  const auto &layers = net.params.layers;
  std::vector<RVec> h(layers.size()), c(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h[l].assign(layers[l].hidden_width(), 0);
    c[l].assign(layers[l].hidden_width(), 0);
  }
  for (Eigen::Index t = 0; t < window.rows(); ++t) {
    RVec x(static_cast<std::size_t>(window.cols()));
    for (Eigen::Index j = 0; j < window.cols(); ++j)
      x[static_cast<std::size_t>(j)] = window(t, j);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto &p = layers[l];
      const std::size_t H = p.hidden_width();
      RVec next(H), next_c(H);
      if (p.kind == model::CellKind::gru) {
        RVec z(H), r(H), rh(H);
        for (std::size_t u = 0; u < H; ++u) {
          const auto ui = static_cast<Eigen::Index>(u);
          z[u] = ref_sigmoid(dot_row(p.input_weights[0], ui, x) +
                             dot_row(p.recurrent_weights[0], ui, h[l]) + p.biases[0](ui));
          r[u] = ref_sigmoid(dot_row(p.input_weights[1], ui, x) +
                             dot_row(p.recurrent_weights[1], ui, h[l]) + p.biases[1](ui));
        }
        for (std::size_t u = 0; u < H; ++u)
          rh[u] = r[u] * h[l][u];
        for (std::size_t u = 0; u < H; ++u) {
          const auto ui = static_cast<Eigen::Index>(u);
          const Real cand = std::tanh(dot_row(p.input_weights[2], ui, x) +
                                      dot_row(p.recurrent_weights[2], ui, rh) +
                                      p.biases[2](ui));
          next[u] = (1 - z[u]) * h[l][u] + z[u] * cand;
        }
      } else {
        for (std::size_t u = 0; u < H; ++u) {
          const auto ui = static_cast<Eigen::Index>(u);
          const auto pre = [&](std::size_t g) {
            return dot_row(p.input_weights[g], ui, x) +
                   dot_row(p.recurrent_weights[g], ui, h[l]) +
                   static_cast<Real>(p.biases[g](ui));
          };
          const Real f = ref_sigmoid(pre(0) + p.peepholes[0](ui) * c[l][u]);
          const Real i = ref_sigmoid(pre(1) + p.peepholes[1](ui) * c[l][u]);
          const Real g = std::tanh(pre(2));
          next_c[u] = f * c[l][u] + i * g;
          const Real o = ref_sigmoid(pre(3) + p.peepholes[2](ui) * next_c[u]);
          next[u] = o * std::tanh(next_c[u]);
        }
        c[l] = next_c;
      }
      h[l] = next;
      if (mask)
        for (std::size_t u = 0; u < H; ++u)
          if (!(*mask)[l][u]) {
            h[l][u] = 0;
            c[l][u] = 0;
          }
      x = h[l];
    }
  }
  const auto &W = net.params.head_weights;
  Vector out(W.rows());
  for (Eigen::Index r = 0; r < W.rows(); ++r)
    out(r) = static_cast<double>(dot_row(W, r, h.back()) + net.params.head_bias(r));
  return out;
}

} // namespace loadcast::fixtures
