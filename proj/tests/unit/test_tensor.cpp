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

#include "tocomm/tensor.hpp"

#include <cmath>
#include <functional>

#include "gtest/gtest.h"
#include "tocomm/channel.hpp"
#include "tocomm/errors.hpp"
#include "tocomm/layers.hpp"
#include "tocomm/mi.hpp"

namespace tocomm::nn {
namespace {

using Fn = std::function<Tensor(const Tensor&)>;

Matrix random_matrix(int r, int c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Max relative disagreement between the tape gradient and central differences.
double gradient_error(const Fn& f, const Matrix& at, double h = 1e-6) {
  Tensor p = Tensor::parameter(at);
  f(p).backward();
  const Matrix g = p.grad();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    Matrix plus = at, minus = at;
    plus.data()[i] += h;
    minus.data()[i] -= h;
    const double fd = (f(Tensor::constant(plus)).item() - f(Tensor::constant(minus)).item()) / (2 * h);
    const double err = std::abs(g.data()[i] - fd) / std::max({std::abs(fd), std::abs(g.data()[i]), 1e-4});
    worst = std::max(worst, err);
  }
  return worst;
}

constexpr double kRel = 1e-3;

TEST(TensorGradTest, ElementwiseOps) {
  const Matrix x = random_matrix(3, 4, 1, 0.2, 1.5);
  EXPECT_LT(gradient_error([](const Tensor& a) { return sum(tanh(a)); }, x), kRel);
  EXPECT_LT(gradient_error([](const Tensor& a) { return sum(exp(a)); }, x), kRel);
  EXPECT_LT(gradient_error([](const Tensor& a) { return sum(log(a)); }, x), kRel);
  EXPECT_LT(gradient_error([](const Tensor& a) { return mean(square(a)); }, x), kRel);
  EXPECT_LT(gradient_error([](const Tensor& a) { return sum(relu(add_scalar(a, -0.7))); }, x), kRel);
  EXPECT_LT(gradient_error([](const Tensor& a) { return sum(clamp(a, 0.0, 2.0)); }, x), kRel);
}

TEST(TensorGradTest, LinearAlgebra) {
  const Matrix x = random_matrix(3, 4, 2);
  const Matrix w = random_matrix(4, 5, 3);
  const Matrix row = random_matrix(1, 4, 4);
  const Matrix col = random_matrix(3, 1, 5);
  EXPECT_LT(gradient_error([&](const Tensor& a) { return sum(square(matmul(a, Tensor::constant(w)))); }, x), kRel);
  EXPECT_LT(gradient_error([&](const Tensor& b) { return sum(square(matmul(Tensor::constant(x), b))); }, w), kRel);
  EXPECT_LT(gradient_error([&](const Tensor& r) { return sum(square(add_row(Tensor::constant(x), r))); }, row), kRel);
  EXPECT_LT(gradient_error([&](const Tensor& r) { return sum(square(mul_row(Tensor::constant(x), r))); }, row), kRel);
  EXPECT_LT(gradient_error([&](const Tensor& c) { return sum(square(mul_col(Tensor::constant(x), c))); }, col), kRel);
  EXPECT_LT(gradient_error([](const Tensor& a) { return sum(square(transpose(a))); }, x), kRel);
}

TEST(TensorGradTest, Reductions) {
  const Matrix x = random_matrix(4, 3, 6);
  EXPECT_LT(gradient_error([](const Tensor& a) { return sum(square(row_sums(a))); }, x), kRel);
  EXPECT_LT(gradient_error([](const Tensor& a) { return sum(square(col_means(a))); }, x), kRel);
}

TEST(TensorGradTest, Reshaping) {
  const Matrix x = random_matrix(4, 6, 7);
  EXPECT_LT(gradient_error([](const Tensor& a) { return sum(square(slice_cols(a, 1, 3))); }, x), kRel);
  EXPECT_LT(gradient_error([](const Tensor& a) { return sum(square(slice_rows(a, 1, 2))); }, x), kRel);
  EXPECT_LT(gradient_error([](const Tensor& a) { return sum(square(concat_cols(a, tanh(a)))); }, x), kRel);
  EXPECT_LT(gradient_error([](const Tensor& a) { return sum(tanh(reshape_rowmajor(a, 8, 3)) * 2.0); }, x), kRel);
}

TEST(TensorGradTest, SoftmaxFamily) {
  const Matrix x = random_matrix(5, 4, 8, -2.0, 2.0);
  const std::vector<int> y{0, 3, 1, 2, 3};
  const Matrix w = random_matrix(5, 4, 9);
  EXPECT_LT(gradient_error([&](const Tensor& a) { return sum(mul(softmax_rows(a), Tensor::constant(w))); }, x), kRel);
  EXPECT_LT(gradient_error([&](const Tensor& a) { return sum(mul(log_softmax_rows(a), Tensor::constant(w))); }, x),
            kRel);
  EXPECT_LT(gradient_error([&](const Tensor& a) { return cross_entropy(a, y); }, x), kRel);
  EXPECT_LT(gradient_error([&](const Tensor& a) { return sum(mul(normalize_rows(a), Tensor::constant(w))); }, x),
            kRel);
}

TEST(TensorGradTest, Convolution) {
  ConvGeometry g;
  g.in_channels = 2;
  g.in_height = 5;
  g.in_width = 5;
  g.out_channels = 3;
  g.kernel = 3;
  g.stride = 2;
  g.padding = 1;
  const Matrix x = random_matrix(2, g.in_size(), 10);
  const Matrix w = random_matrix(g.patch_size(), g.out_channels, 11);
  const Matrix b = random_matrix(1, g.out_channels, 12);
  auto loss = [&](const Tensor& xi, const Tensor& wi, const Tensor& bi) { return sum(tanh(conv2d(xi, wi, bi, g))); };
  EXPECT_LT(gradient_error([&](const Tensor& a) { return loss(a, Tensor::constant(w), Tensor::constant(b)); }, x), kRel);
  EXPECT_LT(gradient_error([&](const Tensor& a) { return loss(Tensor::constant(x), a, Tensor::constant(b)); }, w), kRel);
  EXPECT_LT(gradient_error([&](const Tensor& a) { return loss(Tensor::constant(x), Tensor::constant(w), a); }, b), kRel);
}

TEST(TensorGradTest, ChannelAndRate) {
  const Matrix z = random_matrix(4, 3, 13);
  const Matrix w = random_matrix(4, 3, 14);
  EXPECT_LT(
      gradient_error([&](const Tensor& a) { return sum(mul(channel::normalize_power(a), Tensor::constant(w))); }, z),
      kRel);
  const Matrix lv = random_matrix(4, 3, 15);
  EXPECT_LT(gradient_error([&](const Tensor& m) { return mean(mi::kl_gauss_to_std(m, Tensor::constant(lv))); }, z),
            kRel);
  EXPECT_LT(gradient_error([&](const Tensor& l) { return mean(mi::kl_gauss_to_std(Tensor::constant(z), l)); }, lv),
            kRel);
}

TEST(TensorGradTest, StraightThroughPassesSoftGradient) {
  Tensor soft = Tensor::parameter(Matrix::Constant(2, 2, 0.3));
  const Matrix hard = Matrix::Ones(2, 2);
  Tensor out = straight_through(hard, soft);
  EXPECT_EQ(out.value(), hard);
  sum(scale(out, 3.0)).backward();
  EXPECT_TRUE(soft.grad().isApprox(Matrix::Constant(2, 2, 3.0)));
}

TEST(TensorGradTest, SharedSubgraphAccumulates) {
  const Matrix x = random_matrix(2, 3, 16);
  EXPECT_LT(gradient_error([](const Tensor& a) { return sum(mul(tanh(a), tanh(a)) + a * 3.0); }, x), kRel);
}

TEST(TensorTest, ShapeErrors) {
  Tensor a = Tensor::constant(Matrix::Ones(2, 3));
  Tensor b = Tensor::constant(Matrix::Ones(2, 3));
  EXPECT_THROW(matmul(a, b), ShapeError);
  EXPECT_THROW(a.item(), ShapeError);
  EXPECT_THROW(slice_cols(a, 2, 2), ShapeError);
  EXPECT_THROW(cross_entropy(a, {0}), ShapeError);
}

TEST(ParameterListTest, FlattenAssignRoundTrip) {
  Rng rng(3);
  Mlp mlp({4, 5, 2}, Activation::kRelu, rng);
  ParameterList params = mlp.parameters();
  EXPECT_EQ(params.scalar_count(), 4u * 5 + 5 + 5 * 2 + 2);
  std::vector<double> flat = params.flatten();
  for (double& v : flat) v += 1.0;
  params.assign(flat);
  EXPECT_EQ(params.flatten(), flat);
  flat.pop_back();
  EXPECT_THROW(params.assign(flat), ShapeError);
}

TEST(AdamTest, MinimizesQuadratic) {
  Tensor w = Tensor::parameter(Matrix::Constant(1, 3, 5.0));
  Adam opt(ParameterList({w}), {.lr = 0.1});
  for (int i = 0; i < 500; ++i) {
    sum(square(add_scalar(w, -1.0))).backward();
    opt.step();
  }
  EXPECT_NEAR((w.value().array() - 1.0).abs().maxCoeff(), 0.0, 1e-3);
}

}  // namespace
}  // namespace tocomm::nn
