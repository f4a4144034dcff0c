// Copyright 2026 The tocomm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TOCOMM_TENSOR_HPP_
#define TOCOMM_TENSOR_HPP_

// Minimal reverse-mode automatic differentiation over dense matrices.
//
// A Tensor is a shared handle to a graph node holding a value matrix and,
// when it participates in differentiation, a gradient of the same shape.
// Rows index the batch and columns index features throughout the library.
// Operations record a closure that pushes the output gradient into their
// inputs; backward() walks the graph in reverse topological order.

#include <Eigen/Dense>

#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <vector>

namespace tocomm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Rng = std::mt19937_64;

namespace nn {

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;

  // Leaf that never receives a gradient.
  static Tensor constant(Matrix value);
  // Leaf that accumulates a gradient (trainable weights, split-graph inputs).
  static Tensor parameter(Matrix value);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const;
  Matrix& mutable_value();
  // Zero matrix of the right shape if nothing has been accumulated yet.
  const Matrix& grad() const;
  bool requires_grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double item() const;

  void zero_grad();
  // Seeds d(self)/d(self) = 1; self must be 1x1.
  void backward() const;
  // Seeds an explicit upstream gradient of the same shape as value().
  void backward(const Matrix& seed) const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend Tensor make_result(Matrix, std::initializer_list<Tensor>,
                            std::function<void(const Matrix&)>);
  friend void accumulate_grad(const Tensor&, const Matrix&);
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;
};

// Builds an op output. `grad_fn` receives the output gradient and must route
// it into the inputs with accumulate_grad(). It is only recorded (and only
// ever called) when some input requires a gradient.
Tensor make_result(Matrix value, std::initializer_list<Tensor> inputs,
                   std::function<void(const Matrix&)> grad_fn);
void accumulate_grad(const Tensor& t, const Matrix& g);

Tensor detach(const Tensor& a);

// Arithmetic. Binary ops require equal shapes unless stated.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// a (r x c) + row (1 x c) broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
// a (r x c) * row (1 x c) broadcast over rows.
Tensor mul_row(const Tensor& a, const Tensor& row);
// a (r x c) * col (r x 1) broadcast over columns.
Tensor mul_col(const Tensor& a, const Tensor& col);

// Elementwise nonlinearities.
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
// Gradient is zero where the input was clipped.
Tensor clamp(const Tensor& a, double lo, double hi);

// Reductions.
Tensor sum(const Tensor& a);        // 1 x 1
Tensor mean(const Tensor& a);       // 1 x 1
Tensor row_sums(const Tensor& a);   // r x 1
Tensor col_means(const Tensor& a);  // 1 x c

// Shape manipulation.
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count);
// Reinterprets a (r x c) matrix in row-major order as (rows x cols).
Tensor reshape_rowmajor(const Tensor& a, Eigen::Index rows, Eigen::Index cols);

// Row-wise softmax family.
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
// Mean negative log-likelihood of integer labels under softmax(scores).
Tensor cross_entropy(const Tensor& scores, const std::vector<int>& labels);
// Each row scaled to unit Euclidean norm (rows with norm < eps left unscaled).
Tensor normalize_rows(const Tensor& a, double eps = 1e-12);

// Forward value `hard`, backward gradient passed straight to `soft`.
Tensor straight_through(const Matrix& hard, const Tensor& soft);

struct ConvGeometry {
  int in_channels = 1;
  int in_height = 1;
  int in_width = 1;
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int padding = 0;

  int out_height() const { return (in_height + 2 * padding - kernel) / stride + 1; }
  int out_width() const { return (in_width + 2 * padding - kernel) / stride + 1; }
  int in_size() const { return in_channels * in_height * in_width; }
  int out_size() const { return out_channels * out_height() * out_width(); }
  int patch_size() const { return in_channels * kernel * kernel; }
};

// 2-D convolution over CHW-flattened rows. weight: patch_size x out_channels,
// bias: 1 x out_channels. Output rows are CHW-flattened as well.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const ConvGeometry& geom);

// Operator sugar for the common cases.
inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

}  // namespace nn
}  // namespace tocomm

#endif  // TOCOMM_TENSOR_HPP_
