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

#include "tocomm/layers.hpp"

#include <cmath>

#include "tocomm/errors.hpp"

namespace tocomm::nn {

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  // Fill row by row so the draw order does not depend on storage order.
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

}  // namespace

void ParameterList::append(const ParameterList& other) {
  params_.insert(params_.end(), other.params_.begin(), other.params_.end());
}

std::size_t ParameterList::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : params_) n += static_cast<std::size_t>(t.value().size());
  return n;
}

void ParameterList::zero_grad() {
  for (Tensor& t : params_) t.zero_grad();
}

std::vector<double> ParameterList::flatten() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const Tensor& t : params_) {
    const Matrix& v = t.value();
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) out.push_back(v(r, c));
    }
  }
  return out;
}

std::vector<double> ParameterList::flatten_grad() const {
  std::vector<double> out;
  out.reserve(scalar_count());
  for (const Tensor& t : params_) {
    const Matrix& g = t.grad();
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      for (Eigen::Index c = 0; c < g.cols(); ++c) out.push_back(g(r, c));
    }
  }
  return out;
}

void ParameterList::assign(std::span<const double> flat) {
  if (flat.size() != scalar_count()) {
    throw ShapeError("parameter vector has " + std::to_string(flat.size()) +
                     " scalars, model expects " + std::to_string(scalar_count()));
  }
  std::size_t i = 0;
  for (Tensor& t : params_) {
    Matrix& v = t.mutable_value();
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) v(r, c) = flat[i++];
    }
  }
}

Linear::Linear(int in, int out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = Tensor::parameter(uniform_matrix(in, out, bound, rng));
  bias_ = Tensor::parameter(uniform_matrix(1, out, bound, rng));
}

Tensor Linear::forward(const Tensor& x) const { return add_row(matmul(x, weight_), bias_); }

Conv2d::Conv2d(const ConvGeometry& geom, Rng& rng) : geom_(geom) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(geom.patch_size()));
  weight_ = Tensor::parameter(uniform_matrix(geom.patch_size(), geom.out_channels, bound, rng));
  bias_ = Tensor::parameter(uniform_matrix(1, geom.out_channels, bound, rng));
}

Tensor Conv2d::forward(const Tensor& x) const { return conv2d(x, weight_, bias_, geom_); }

Tensor activate(const Tensor& x, Activation act) {
  return act == Activation::kRelu ? relu(x) : tanh(x);
}

Mlp::Mlp(std::vector<int> sizes, Activation act, Rng& rng) : act_(act) {
  if (sizes.size() < 2) throw InvalidArgument("Mlp needs at least input and output sizes");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) layers_.emplace_back(sizes[i], sizes[i + 1], rng);
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size()) h = activate(h, act_);
  }
  return h;
}

ParameterList Mlp::parameters() const {
  ParameterList p;
  for (const Linear& l : layers_) p.append(l.parameters());
  return p;
}

Adam::Adam(ParameterList params, Options opts) : params_(std::move(params)), opts_(opts) {
  for (const Tensor& t : params_.tensors()) {
    m_.push_back(Matrix::Zero(t.rows(), t.cols()));
    v_.push_back(Matrix::Zero(t.rows(), t.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  auto& tensors = params_.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Tensor& p = tensors[i];
    const Matrix& g = p.grad();
    m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * g;
    v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * g.cwiseProduct(g);
    Matrix update = (m_[i] / bc1).array() / ((v_[i] / bc2).array().sqrt() + opts_.eps);
    Matrix& w = p.mutable_value();
    if (opts_.weight_decay > 0.0) w *= (1.0 - opts_.lr * opts_.weight_decay);
    w -= opts_.lr * update;
    p.zero_grad();
  }
}

void Sgd::step() {
  for (Tensor& p : params_.tensors()) {
    p.mutable_value() -= lr_ * p.grad();
    p.zero_grad();
  }
}

}  // namespace tocomm::nn
