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

#include "tocomm/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "tocomm/errors.hpp"

namespace tocomm::objectives {

namespace {

double lookup(const std::vector<std::pair<std::string, double>>& v, const std::string& name) {
  for (const auto& [k, x] : v) {
    if (k == name) return x;
  }
  throw InvalidArgument("loss report has no component '" + name + "'");
}

// Assembles a report from (name, weight, differentiable value) triples.
struct Term {
  std::string name;
  double weight;
  Tensor value;
};

LossReport assemble(const std::vector<Term>& terms) {
  LossReport r;
  Tensor total;
  for (const Term& t : terms) {
    r.components.emplace_back(t.name, t.value.item());
    r.weights.emplace_back(t.name, t.weight);
    if (t.weight == 0.0) continue;
    Tensor part = t.weight == 1.0 ? t.value : nn::scale(t.value, t.weight);
    total = total.defined() ? nn::add(total, part) : part;
  }
  if (!total.defined()) total = nn::scale(terms.front().value, 0.0);
  r.loss = total;
  r.total = total.item();
  return r;
}

void check_coefficient(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(name) + " must be finite and >= 0");
}

Tensor mean_rate(const Tensor& mu, const Tensor& logvar) {
  if (!logvar.defined()) throw ModeError("rate term needs a stochastic encoder (no log-variance)");
  return nn::mean(mi::kl_gauss_to_std(mu, logvar));
}

}  // namespace

double LossReport::component(const std::string& name) const { return lookup(components, name); }

double LossReport::weight(const std::string& name) const { return lookup(weights, name); }

bool LossReport::has(const std::string& name) const {
  return std::any_of(components.begin(), components.end(), [&](const auto& c) { return c.first == name; });
}

double LossReport::weighted_sum() const {
  double s = 0.0;
  for (std::size_t i = 0; i < components.size(); ++i) s += weights[i].second * components[i].second;
  return s;
}

LossReport vib_loss(const Tensor& scores, const std::vector<int>& y, const Tensor& mu, const Tensor& logvar,
                    double beta) {
  check_coefficient(beta, "beta");
  if (scores.rows() != mu.rows()) throw ShapeError("vib_loss: scores and mu batch sizes differ");
  return assemble({{"task_ce", 1.0, nn::cross_entropy(scores, y)}, {"rate", beta, mean_rate(mu, logvar)}});
}

Tensor invariance_penalty(const Tensor& scores, const std::vector<int>& y) {
  Matrix onehot = Matrix::Zero(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < y.size(); ++i) onehot(static_cast<Eigen::Index>(i), y[i]) = 1.0;
  Tensor resid = nn::sub(nn::softmax_rows(scores), Tensor::constant(onehot));
  Tensor grad_w = nn::mean(nn::row_sums(nn::mul(resid, scores)));
  return nn::square(grad_w);
}

LossReport ife_loss(const std::vector<EnvBatch>& per_env, double beta, double lambda_inv) {
  if (per_env.size() < 2) throw InvalidArgument("ife_loss: invariance penalty needs at least 2 environments");
  check_coefficient(beta, "beta");
  check_coefficient(lambda_inv, "lambda_inv");
  const double inv_e = 1.0 / static_cast<double>(per_env.size());
  Tensor vib, penalty;
  double ce = 0.0, rate = 0.0;
  auto acc = [](Tensor& into, const Tensor& t) { into = into.defined() ? nn::add(into, t) : t; };
  for (const EnvBatch& e : per_env) {
    if (e.scores.rows() != static_cast<Eigen::Index>(e.y.size())) throw ShapeError("ife_loss: labels/scores mismatch");
    const LossReport v = vib_loss(e.scores, e.y, e.mu, e.logvar, beta);
    acc(vib, v.loss);
    ce += v.component("task_ce");
    rate += v.component("rate");
    acc(penalty, invariance_penalty(e.scores, e.y));
  }
  // Mean VIB loss first so lambda_inv = 0 reproduces it exactly.
  LossReport r;
  r.loss = nn::scale(vib, inv_e);
  if (lambda_inv != 0.0) r.loss = nn::add(r.loss, nn::scale(penalty, lambda_inv));
  r.total = r.loss.item();
  r.components = {{"task_ce", ce * inv_e}, {"rate", rate * inv_e}, {"penalty", penalty.item()}};
  r.weights = {{"task_ce", 1.0}, {"rate", beta}, {"penalty", lambda_inv}};
  return r;
}

LossReport rib_loss(const Tensor& scores, const std::vector<int>& y,
                    const std::optional<transceiver::Modulated>& symbols, const mi::Constellation& constellation,
                    const channel::ChannelSpec& spec, double beta, std::size_t mc_samples, Rng& rng) {
  if (!symbols) throw ModeError("rib_loss requires digital transmission (modulated symbols)");
  check_coefficient(beta, "beta");
  Tensor ce = nn::cross_entropy(scores, y);
  Tensor channel_mi = mi::discrete_channel_mi(symbols->frequencies, constellation, spec, mc_samples, rng);
  return assemble({{"task_ce", 1.0, ce}, {"channel_mi", beta, channel_mi}});
}

LossReport dib_loss(const std::vector<DeviceOutput>& devices, const Tensor& fused_scores, const std::vector<int>& y,
                    double beta) {
  if (devices.size() != 2) throw InvalidArgument("dib_loss supports exactly two devices");
  check_coefficient(beta, "beta");
  return assemble({{"task_ce", 1.0, nn::cross_entropy(fused_scores, y)},
                   {"rate_device0", beta, mean_rate(devices[0].mu, devices[0].logvar)},
                   {"rate_device1", beta, mean_rate(devices[1].mu, devices[1].logvar)}});
}

LossReport infonce_loss(const Tensor& z1, const Tensor& z2, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("infonce_loss: tau must be > 0");
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) throw ShapeError("infonce_loss: view shapes differ");
  if (z1.rows() < 2) throw InvalidArgument("infonce_loss: batch of 1 has no negatives");
  Tensor sim = nn::scale(nn::matmul(nn::normalize_rows(z1), nn::transpose(nn::normalize_rows(z2))), 1.0 / tau);
  std::vector<int> diag(static_cast<std::size_t>(z1.rows()));
  for (std::size_t i = 0; i < diag.size(); ++i) diag[i] = static_cast<int>(i);
  return assemble({{"infonce", 1.0, nn::cross_entropy(sim, diag)}});
}

std::size_t PruneMask::kept() const { return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true)); }

PruneMask prune_latents(const transceiver::Encoder& enc, const Matrix& calibration_x, double threshold) {
  if (!(threshold >= 0.0)) throw InvalidArgument("prune_latents: threshold must be >= 0");
  if (!enc.stochastic()) throw ModeError("prune_latents needs a stochastic encoder");
  if (calibration_x.rows() < 1) throw InvalidArgument("prune_latents: empty calibration set");
  const auto out = enc.forward(Tensor::constant(calibration_x));
  const Matrix& mu = out.mu.value();
  const Matrix& lv = out.logvar.value();
  const Matrix kl = 0.5 * (mu.array().square() + lv.array().exp() - 1.0 - lv.array());
  PruneMask m;
  m.rate_per_dim = kl.colwise().mean().transpose();
  m.keep.resize(static_cast<std::size_t>(mu.cols()));
  for (Eigen::Index j = 0; j < mu.cols(); ++j) {
    m.keep[static_cast<std::size_t>(j)] = !(m.rate_per_dim(j) < threshold);
  }
  return m;
}

Matrix apply_mask(const Matrix& z, const PruneMask& mask) {
  if (static_cast<std::size_t>(z.cols()) != mask.keep.size()) throw ShapeError("apply_mask: dimension mismatch");
  Matrix out = z;
  for (std::size_t j = 0; j < mask.keep.size(); ++j) {
    if (!mask.keep[j]) out.col(static_cast<Eigen::Index>(j)).setZero();
  }
  return out;
}

}  // namespace tocomm::objectives
