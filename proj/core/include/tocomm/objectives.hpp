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

#ifndef TOCOMM_OBJECTIVES_HPP_
#define TOCOMM_OBJECTIVES_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tocomm/channel.hpp"
#include "tocomm/mi.hpp"
#include "tocomm/tensor.hpp"
#include "tocomm/transceiver.hpp"

namespace tocomm::objectives {

using nn::Tensor;

// A scalar training loss with its named parts. `loss` is the differentiable
// total; `total` equals sum_i weights[i] * components[i].
struct LossReport {
  Tensor loss;
  double total = 0.0;
  std::vector<std::pair<std::string, double>> components;
  std::vector<std::pair<std::string, double>> weights;

  double component(const std::string& name) const;
  double weight(const std::string& name) const;
  bool has(const std::string& name) const;
  double weighted_sum() const;
};

// cross_entropy(scores, y) + beta * mean KL(q(z|x) || N(0, I)).
LossReport vib_loss(const Tensor& scores, const std::vector<int>& y, const Tensor& mu, const Tensor& logvar,
                    double beta);

struct EnvBatch {
  Tensor scores;
  std::vector<int> y;
  Tensor mu;
  Tensor logvar;
};

// Squared derivative of CE(w * scores, y) at w = 1 (dummy-classifier
// invariance penalty for one environment).
Tensor invariance_penalty(const Tensor& scores, const std::vector<int>& y);

// Mean VIB loss over environments plus lambda_inv times the summed penalties.
LossReport ife_loss(const std::vector<EnvBatch>& per_env, double beta, double lambda_inv);

// cross_entropy(scores, y) + beta * I(Z; Zhat) under the batch's empirical
// symbol frequencies. Throws ModeError without modulated symbols.
LossReport rib_loss(const Tensor& scores, const std::vector<int>& y,
                    const std::optional<transceiver::Modulated>& symbols, const mi::Constellation& constellation,
                    const channel::ChannelSpec& spec, double beta, std::size_t mc_samples, Rng& rng);

struct DeviceOutput {
  Tensor mu;
  Tensor logvar;
};

// Joint CE on the fused scores plus beta times each device's mean KL rate.
LossReport dib_loss(const std::vector<DeviceOutput>& devices, const Tensor& fused_scores, const std::vector<int>& y,
                    double beta);

// Contrastive loss over cosine similarities; row i of z1 and z2 are positives.
LossReport infonce_loss(const Tensor& z1, const Tensor& z2, double tau);

struct PruneMask {
  std::vector<bool> keep;
  Vector rate_per_dim;  // average per-dimension KL over the calibration set

  std::size_t kept() const;
  std::size_t pruned() const { return keep.size() - kept(); }
};

// Prunes dimension j when its average KL rate is below `threshold` nats.
PruneMask prune_latents(const transceiver::Encoder& enc, const Matrix& calibration_x, double threshold);

// Zeroes the pruned columns.
Matrix apply_mask(const Matrix& z, const PruneMask& mask);

}  // namespace tocomm::objectives

#endif  // TOCOMM_OBJECTIVES_HPP_
