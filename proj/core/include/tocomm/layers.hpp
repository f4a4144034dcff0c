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

#ifndef TOCOMM_LAYERS_HPP_
#define TOCOMM_LAYERS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "tocomm/tensor.hpp"

namespace tocomm::nn {

// Ordered view over the trainable tensors of a model.
class ParameterList {
 public:
  ParameterList() = default;
  explicit ParameterList(std::vector<Tensor> params) : params_(std::move(params)) {}

  void append(const Tensor& t) { params_.push_back(t); }
  void append(const ParameterList& other);

  std::size_t size() const { return params_.size(); }
  // Total number of scalars across all tensors.
  std::size_t scalar_count() const;
  const std::vector<Tensor>& tensors() const { return params_; }
  std::vector<Tensor>& tensors() { return params_; }

  void zero_grad();
  std::vector<double> flatten() const;
  std::vector<double> flatten_grad() const;
  void assign(std::span<const double> flat);

 private:
  std::vector<Tensor> params_;
};

class Linear {
 public:
  Linear() = default;
  // Uniform(-1/sqrt(in), 1/sqrt(in)) initialization.
  Linear(int in, int out, Rng& rng);

  Tensor forward(const Tensor& x) const;
  int in_features() const { return static_cast<int>(weight_.rows()); }
  int out_features() const { return static_cast<int>(weight_.cols()); }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  ParameterList parameters() const { return ParameterList({weight_, bias_}); }

 private:
  Tensor weight_;
  Tensor bias_;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const ConvGeometry& geom, Rng& rng);

  Tensor forward(const Tensor& x) const;
  const ConvGeometry& geometry() const { return geom_; }
  ParameterList parameters() const { return ParameterList({weight_, bias_}); }

 private:
  ConvGeometry geom_;
  Tensor weight_;
  Tensor bias_;
};

enum class Activation { kRelu, kTanh };

// Stack of Linear layers with an activation between them (none after the last).
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> sizes, Activation act, Rng& rng);

  Tensor forward(const Tensor& x) const;
  int in_features() const { return layers_.front().in_features(); }
  int out_features() const { return layers_.back().out_features(); }
  std::vector<Linear>& layers() { return layers_; }
  ParameterList parameters() const;

 private:
  std::vector<Linear> layers_;
  Activation act_ = Activation::kRelu;
};

Tensor activate(const Tensor& x, Activation act);

// Adam with optional decoupled weight decay.
class Adam {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  Adam() = default;
  Adam(ParameterList params, Options opts);

  // Applies one update from the accumulated gradients, then zeroes them.
  void step();
  void set_lr(double lr) { opts_.lr = lr; }
  double lr() const { return opts_.lr; }
  const ParameterList& parameters() const { return params_; }

 private:
  ParameterList params_;
  Options opts_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

// Plain stochastic gradient descent, used where bit-level reasoning about
// the update path is easier than with Adam's moment estimates.
class Sgd {
 public:
  Sgd(ParameterList params, double lr) : params_(std::move(params)), lr_(lr) {}
  void step();

 private:
  ParameterList params_;
  double lr_;
};

}  // namespace tocomm::nn

#endif  // TOCOMM_LAYERS_HPP_
