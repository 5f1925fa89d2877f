// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace loadcast {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Multiply-accumulate counter fed by the kernels below. It is thread local so
/// concurrent forecasts never share it; tests reset it around a forward pass
/// to compare against the closed-form flop count.
class MacCounter {
public:
  static void reset() noexcept { count_ = 0; }
  static std::int64_t value() noexcept { return count_; }
  static void add(std::int64_t n) noexcept { count_ += n; }

private:
  static thread_local std::int64_t count_;
};

/// out += lhs * rhs^T, with lhs B x K and rhs R x K (rows are samples, the
/// weight block is stored output-major as in the cell equations).
void add_product_transposed(Matrix &out, const Matrix &lhs, const Matrix &rhs);

/// out += lhs * rhs, with lhs B x R and rhs R x K.
void add_product(Matrix &out, const Matrix &lhs, const Matrix &rhs);

/// out += lhs^T * rhs (gradient accumulation; not counted as forecast work).
void add_transposed_product(Matrix &out, const Matrix &lhs, const Matrix &rhs);

double sigmoid(double v) noexcept;

/// Elementwise logistic function, in place.
void sigmoid_inplace(Matrix &m) noexcept;
void tanh_inplace(Matrix &m) noexcept;

bool all_finite(const Matrix &m) noexcept;

} // namespace loadcast
