// SPDX-License-Identifier: Apache-2.0
#include "loadcast/linalg.hpp"
#include "loadcast/random.hpp"

#include <cmath>

namespace loadcast {

thread_local std::int64_t MacCounter::count_ = 0;

void add_product_transposed(Matrix &out, const Matrix &lhs, const Matrix &rhs) {
  out.noalias() += lhs * rhs.transpose();
  MacCounter::add(static_cast<std::int64_t>(lhs.rows()) * lhs.cols() *
                  rhs.rows());
}

void add_product(Matrix &out, const Matrix &lhs, const Matrix &rhs) {
  out.noalias() += lhs * rhs;
  MacCounter::add(static_cast<std::int64_t>(lhs.rows()) * lhs.cols() *
                  rhs.cols());
}

void add_transposed_product(Matrix &out, const Matrix &lhs, const Matrix &rhs) {
  out.noalias() += lhs.transpose() * rhs;
}

double sigmoid(double v) noexcept {
  // Branching keeps exp() from overflowing for large |v|.
  if (v >= 0.0)
    return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

void sigmoid_inplace(Matrix &m) noexcept {
  m = m.unaryExpr([](double v) { return sigmoid(v); });
}

void tanh_inplace(Matrix &m) noexcept { m = m.array().tanh().matrix(); }

bool all_finite(const Matrix &m) noexcept { return m.allFinite(); }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0)
    u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

} // namespace loadcast
