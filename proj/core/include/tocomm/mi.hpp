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

#ifndef TOCOMM_MI_HPP_
#define TOCOMM_MI_HPP_

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tocomm/channel.hpp"
#include "tocomm/tensor.hpp"

namespace tocomm::mi {

enum class EstimateKind { kExact, kLower, kUpper, kSurrogate };

std::string to_string(EstimateKind kind);

// A mutual-information value in nats. The kind is fixed at construction.
class MIEstimate {
 public:
  MIEstimate(double nats, EstimateKind kind, std::optional<double> stderr_nats = std::nullopt);

  double nats() const { return nats_; }
  double bits() const;
  EstimateKind kind() const { return kind_; }
  const std::optional<double>& stderr_nats() const { return stderr_; }

 private:
  double nats_;
  EstimateKind kind_;
  std::optional<double> stderr_;
};

// Closed form for independent Gaussian coordinate pairs: sum -1/2 ln(1 - rho^2).
MIEstimate gaussian_mi_analytic(std::span<const double> rho);

// Per-row KL( N(mu, diag exp(logvar)) || N(0, I) ).
Vector kl_gauss_to_std(const Matrix& mu, const Matrix& logvar);
// Differentiable variant, r x 1.
nn::Tensor kl_gauss_to_std(const nn::Tensor& mu, const nn::Tensor& logvar);

// Scalar critic T(u, v): an MLP over the concatenated pair.
struct CriticSpec {
  int hidden = 64;
  int depth = 2;
  int batch = 512;
  double lr = 1e-3;
  // Moving-average rate for the log-partition gradient correction.
  double ema_rate = 0.01;
  // Shuffles of v used for the marginal term in the final evaluation.
  int eval_permutations = 4;
};

// Donsker-Varadhan lower bound E_joint[T] - log E_marginal[e^T] with the
// critic trained on minibatches whose marginal samples come from in-batch
// permutation. Final value is evaluated on the full sample set.
MIEstimate mine_estimate(const Matrix& u, const Matrix& v, const CriticSpec& critic, std::size_t steps, Rng& rng);

// Diagonal Gaussian q(v | u) with MLP mean and log-variance heads.
struct ConditionalSpec {
  int hidden = 32;
  int batch = 512;
  double lr = 3e-3;
};

// Contrastive log-ratio upper bound. q is fit by maximum likelihood first,
// then E_joint[log q] - E_marginal[log q] is evaluated; the marginal
// expectation is exact over all n^2 pairs via the moments of v.
MIEstimate club_estimate(const Matrix& u, const Matrix& v, const ConditionalSpec& cond, std::size_t steps, Rng& rng);

// Symbol alphabet with prior probabilities. Real alphabets occupy one real
// dimension per symbol, complex ones two (I/Q), each carrying unit noise
// variance scaling sigma^2.
struct Constellation {
  std::vector<std::complex<double>> points;
  std::vector<double> probs;
  bool is_complex = false;

  static Constellation bpsk();
  // 4-PAM {-3,-1,1,3}/sqrt(5): unit average energy.
  static Constellation pam4();
  static Constellation qpsk();
  static Constellation qam16();
  static Constellation single(double value);
  static Constellation from_name(const std::string& name);

  std::size_t size() const { return points.size(); }
  double entropy_nats() const;
  // Probabilities sum to 1 within 1e-9, none negative, non-empty.
  void validate() const;
  Constellation with_probs(std::vector<double> p) const;
};

// Monte-Carlo I(Z; Zhat) for a discrete input through the channel with a
// Gaussian transition density. Expectation over symbols is exact (stratified),
// over noise by sampling; stderr from batch means.
MIEstimate discrete_channel_mi(const Constellation& constellation, const channel::ChannelSpec& spec,
                               std::size_t mc_samples, Rng& rng);

// Same quantity as a differentiable function of the 1 x K symbol
// distribution `probs` (the points are taken from `constellation`).
nn::Tensor discrete_channel_mi(const nn::Tensor& probs, const Constellation& constellation,
                               const channel::ChannelSpec& spec, std::size_t mc_samples, Rng& rng);

}  // namespace tocomm::mi

#endif  // TOCOMM_MI_HPP_
