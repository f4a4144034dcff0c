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

#include "tocomm/mi.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "tocomm/datasets.hpp"
#include "tocomm/errors.hpp"
#include "tocomm/layers.hpp"

namespace tocomm::mi {

namespace {

constexpr int kStderrBatches = 20;

// Standard error of the mean of `values` estimated from contiguous batch means.
double batch_means_stderr(const std::vector<double>& values, int batches) {
  const std::size_t n = values.size();
  const auto b = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(batches), n));
  if (b < 2) return 0.0;
  std::vector<double> means(b, 0.0);
  for (std::size_t j = 0; j < b; ++j) {
    const std::size_t lo = j * n / b;
    const std::size_t hi = (j + 1) * n / b;
    for (std::size_t i = lo; i < hi; ++i) means[j] += values[i];
    means[j] /= static_cast<double>(hi - lo);
  }
  const double m = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(b);
  double var = 0.0;
  for (double x : means) var += (x - m) * (x - m);
  var /= static_cast<double>(b - 1);
  return std::sqrt(var / static_cast<double>(b));
}

void check_pairs(const Matrix& u, const Matrix& v, std::size_t steps) {
  if (u.rows() != v.rows()) throw ShapeError("paired samples must have equal row counts");
  if (u.rows() < 2) throw InvalidArgument("MI estimation needs at least 2 samples");
  if (steps < 1) throw InvalidArgument("MI estimation needs at least 1 training step");
}

Matrix take_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(idx[r]));
  return out;
}

class Critic {
 public:
  Critic(int in, const CriticSpec& spec, Rng& rng) {
    std::vector<int> sizes{in};
    for (int i = 0; i < spec.depth; ++i) sizes.push_back(spec.hidden);
    sizes.push_back(1);
    net_ = nn::Mlp(sizes, nn::Activation::kRelu, rng);
  }
  nn::Tensor operator()(const Matrix& u, const Matrix& v) const {
    Matrix uv(u.rows(), u.cols() + v.cols());
    uv << u, v;
    return net_.forward(nn::Tensor::constant(std::move(uv)));
  }
  nn::ParameterList parameters() const { return net_.parameters(); }

 private:
  nn::Mlp net_;
};

// Minibatch cursor over a fresh permutation per epoch.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch) : n_(n), batch_(std::min(batch, n)) {}
  std::vector<std::size_t> next(Rng& rng) {
    if (pos_ + batch_ > order_.size()) {
      order_ = data::shuffled_indices(n_, rng);
      pos_ = 0;
    }
    std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(pos_ + batch_));
    pos_ += batch_;
    return out;
  }

 private:
  std::size_t n_;
  std::size_t batch_;
  std::size_t pos_ = 0;
  std::vector<std::size_t> order_;
};

double log_mean_exp(const Matrix& t) {
  const double m = t.maxCoeff();
  return m + std::log((t.array() - m).exp().mean());
}

struct ChannelSample {
  std::vector<double> per_draw;  // value of the stratified integrand per noise draw
  std::vector<double> grad;      // d/dp_m of the mean, size K
};

// Core of the discrete-channel MI estimator.
ChannelSample discrete_mi_samples(const std::vector<std::complex<double>>& pts, const std::vector<double>& probs,
                                  bool is_complex, double sigma, channel::ChannelKind kind, std::size_t draws,
                                  Rng& rng) {
  const std::size_t k = pts.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  ChannelSample out{std::vector<double>(draws, 0.0), std::vector<double>(k, 0.0)};
  std::vector<double> log_p(k);
  for (std::size_t j = 0; j < k; ++j) log_p[j] = probs[j] > 0.0 ? std::log(probs[j]) : -INFINITY;
  std::vector<double> expo(k);
  for (std::size_t s = 0; s < draws; ++s) {
    double s_eff = sigma;
    if (kind == channel::ChannelKind::kRayleigh) {
      const double a = normal(rng) / std::sqrt(2.0);
      const double b = normal(rng) / std::sqrt(2.0);
      s_eff = sigma / std::max(std::sqrt(a * a + b * b), 1e-12);
    }
    const std::complex<double> n(normal(rng), is_complex ? normal(rng) : 0.0);
    const double inv2s2 = 1.0 / (2.0 * s_eff * s_eff);
    for (std::size_t m = 0; m < k; ++m) {
      // Received point when symbol m was sent with this noise draw.
      const std::complex<double> r = pts[m] + s_eff * n;
      double mx = -INFINITY;
      for (std::size_t j = 0; j < k; ++j) {
        expo[j] = log_p[j] - std::norm(r - pts[j]) * inv2s2;
        mx = std::max(mx, expo[j]);
      }
      double denom = 0.0;
      for (std::size_t j = 0; j < k; ++j) denom += std::exp(expo[j] - mx);
      const double lse = mx + std::log(denom);
      const double term = -std::norm(n) / 2.0 - lse;
      if (probs[m] > 0.0) out.per_draw[s] += probs[m] * term;
      out.grad[m] += term;
      // Posterior weights p(ẑ|z_j) / sum_i p_i p(ẑ|z_i) contribute -p_m * w_j.
      if (probs[m] > 0.0) {
        for (std::size_t j = 0; j < k; ++j) {
          const double w = std::exp(-std::norm(r - pts[j]) * inv2s2 - lse);
          out.grad[j] -= probs[m] * w;
        }
      }
    }
  }
  for (double& g : out.grad) g /= static_cast<double>(draws);
  return out;
}

}  // namespace

std::string to_string(EstimateKind kind) {
  switch (kind) {
    case EstimateKind::kExact:
      return "exact";
    case EstimateKind::kLower:
      return "lower";
    case EstimateKind::kUpper:
      return "upper";
    case EstimateKind::kSurrogate:
      return "surrogate";
  }
  return "unknown";
}

MIEstimate::MIEstimate(double nats, EstimateKind kind, std::optional<double> stderr_nats)
    : nats_(nats), kind_(kind), stderr_(stderr_nats) {
  if (kind == EstimateKind::kExact && nats < 0.0) throw InvalidArgument("exact MI must be non-negative");
  if (stderr_ && *stderr_ < 0.0) throw InvalidArgument("stderr must be non-negative");
}

double MIEstimate::bits() const { return nats_ / std::numbers::ln2; }

MIEstimate gaussian_mi_analytic(std::span<const double> rho) {
  double total = 0.0;
  for (double r : rho) {
    if (!(std::abs(r) < 1.0)) throw InvalidArgument("gaussian_mi_analytic: |rho| must be < 1");
    total += -0.5 * std::log1p(-r * r);
  }
  return MIEstimate(total, EstimateKind::kExact, 0.0);
}

Vector kl_gauss_to_std(const Matrix& mu, const Matrix& logvar) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols()) throw ShapeError("kl_gauss_to_std: shape mismatch");
  return 0.5 * (mu.array().square() + logvar.array().exp() - 1.0 - logvar.array()).rowwise().sum().matrix();
}

nn::Tensor kl_gauss_to_std(const nn::Tensor& mu, const nn::Tensor& logvar) {
  using namespace nn;
  Tensor inner = sub(add(square(mu), exp(logvar)), add_scalar(logvar, 1.0));
  return scale(row_sums(inner), 0.5);
}

MIEstimate mine_estimate(const Matrix& u, const Matrix& v, const CriticSpec& spec, std::size_t steps, Rng& rng) {
  check_pairs(u, v, steps);
  const auto n = static_cast<std::size_t>(u.rows());
  Critic critic(static_cast<int>(u.cols() + v.cols()), spec, rng);
  nn::Adam opt(critic.parameters(), {.lr = spec.lr});
  BatchSampler sampler(n, static_cast<std::size_t>(spec.batch));
  double ema = 1.0;
  bool ema_init = false;
  for (std::size_t step = 0; step < steps; ++step) {
    std::vector<std::size_t> idx = sampler.next(rng);
    std::vector<std::size_t> perm = idx;
    std::shuffle(perm.begin(), perm.end(), rng);
    const Matrix ub = take_rows(u, idx);
    nn::Tensor t_joint = critic(ub, take_rows(v, idx));
    nn::Tensor t_marg = critic(ub, take_rows(v, perm));
    nn::Tensor e_marg = nn::mean(nn::exp(t_marg));
    const double batch_e = e_marg.item();
    ema = ema_init ? (1.0 - spec.ema_rate) * ema + spec.ema_rate * batch_e : batch_e;
    ema_init = true;
    // Gradient of log E[e^T] is replaced by grad E[e^T] / EMA(E[e^T]).
    nn::Tensor loss = nn::sub(nn::scale(e_marg, 1.0 / ema), nn::mean(t_joint));
    if (!std::isfinite(loss.item()) || !std::isfinite(batch_e)) {
      throw TrainingFailure("MINE critic diverged (non-finite loss)", step);
    }
    loss.backward();
    opt.step();
  }

  // Final evaluation over the full sample set.
  const Matrix tj = critic(u, v).value();
  std::vector<double> joint(tj.data(), tj.data() + tj.size());
  const int perms = std::max(1, spec.eval_permutations);
  Matrix tm(u.rows(), perms);
  for (int p = 0; p < perms; ++p) {
    std::vector<std::size_t> perm = data::shuffled_indices(n, rng);
    tm.col(p) = critic(u, take_rows(v, perm)).value().col(0);
  }
  const double est = tj.mean() - log_mean_exp(tm);
  if (!std::isfinite(est)) throw TrainingFailure("MINE evaluation produced a non-finite value", steps);
  // Batch means of the DV statistic over contiguous row chunks.
  std::vector<double> chunks;
  for (int b = 0; b < kStderrBatches; ++b) {
    const Eigen::Index lo = b * u.rows() / kStderrBatches;
    const Eigen::Index hi = (b + 1) * u.rows() / kStderrBatches;
    if (hi - lo < 1) continue;
    chunks.push_back(tj.middleRows(lo, hi - lo).mean() - log_mean_exp(tm.middleRows(lo, hi - lo)));
  }
  double se = 0.0;
  if (chunks.size() >= 2) {
    const double m = std::accumulate(chunks.begin(), chunks.end(), 0.0) / static_cast<double>(chunks.size());
    double var = 0.0;
    for (double c : chunks) var += (c - m) * (c - m);
    var /= static_cast<double>(chunks.size() - 1);
    se = std::sqrt(var / static_cast<double>(chunks.size()));
  }
  return MIEstimate(est, EstimateKind::kLower, se);
}

MIEstimate club_estimate(const Matrix& u, const Matrix& v, const ConditionalSpec& spec, std::size_t steps, Rng& rng) {
  check_pairs(u, v, steps);
  const auto n = static_cast<std::size_t>(u.rows());
  const int du = static_cast<int>(u.cols());
  const int dv = static_cast<int>(v.cols());
  nn::Mlp mean_head({du, spec.hidden, dv}, nn::Activation::kRelu, rng);
  nn::Mlp logvar_head({du, spec.hidden, dv}, nn::Activation::kRelu, rng);
  auto predict = [&](const Matrix& ub) {
    nn::Tensor in = nn::Tensor::constant(ub);
    return std::pair{mean_head.forward(in), nn::scale(nn::tanh(logvar_head.forward(in)), 10.0)};
  };
  nn::ParameterList params = mean_head.parameters();
  params.append(logvar_head.parameters());
  nn::Adam opt(params, {.lr = spec.lr});
  BatchSampler sampler(n, static_cast<std::size_t>(spec.batch));
  for (std::size_t step = 0; step < steps; ++step) {
    std::vector<std::size_t> idx = sampler.next(rng);
    auto [mu, lv] = predict(take_rows(u, idx));
    nn::Tensor diff = nn::sub(nn::Tensor::constant(take_rows(v, idx)), mu);
    // Negative log-likelihood up to the constant 1/2 log(2 pi).
    nn::Tensor nll = nn::scale(nn::mean(nn::add(nn::mul(nn::square(diff), nn::exp(nn::scale(lv, -1.0))), lv)), 0.5);
    if (!std::isfinite(nll.item())) throw TrainingFailure("CLUB conditional model diverged (non-finite loss)", step);
    nll.backward();
    opt.step();
  }

  auto [mu_t, lv_t] = predict(u);
  const Matrix& mu = mu_t.value();
  const Matrix& lv = lv_t.value();
  const Matrix inv_var = (-lv.array()).exp();
  const RowVector v_mean = v.colwise().mean();
  const RowVector v_sq = v.array().square().colwise().mean();
  // Per-row positive minus negative term; log-variance and constants cancel.
  std::vector<double> diff_rows(n);
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      const double m = mu(i, j);
      const double pos = (v(i, j) - m) * (v(i, j) - m);
      const double neg = v_sq(j) - 2.0 * m * v_mean(j) + m * m;
      acc += 0.5 * inv_var(i, j) * (neg - pos);
    }
    diff_rows[static_cast<std::size_t>(i)] = acc;
  }
  const double est = std::accumulate(diff_rows.begin(), diff_rows.end(), 0.0) / static_cast<double>(n);
  if (!std::isfinite(est)) throw TrainingFailure("CLUB evaluation produced a non-finite value", steps);
  return MIEstimate(est, EstimateKind::kUpper, batch_means_stderr(diff_rows, kStderrBatches));
}

Constellation Constellation::bpsk() { return {{-1.0, 1.0}, {0.5, 0.5}, false}; }

Constellation Constellation::pam4() {
  const double s = std::sqrt(5.0);
  return {{-3.0 / s, -1.0 / s, 1.0 / s, 3.0 / s}, {0.25, 0.25, 0.25, 0.25}, false};
}

Constellation Constellation::qpsk() {
  const double a = 1.0 / std::sqrt(2.0);
  return {{{a, a}, {-a, a}, {-a, -a}, {a, -a}}, std::vector<double>(4, 0.25), true};
}

Constellation Constellation::qam16() {
  Constellation c;
  c.is_complex = true;
  const double s = std::sqrt(10.0);
  for (int i : {-3, -1, 1, 3}) {
    for (int q : {-3, -1, 1, 3}) c.points.emplace_back(i / s, q / s);
  }
  c.probs.assign(16, 1.0 / 16.0);
  return c;
}

Constellation Constellation::single(double value) { return {{value}, {1.0}, false}; }

Constellation Constellation::from_name(const std::string& name) {
  if (name == "bpsk") return bpsk();
  if (name == "pam4") return pam4();
  if (name == "qpsk") return qpsk();
  if (name == "qam16") return qam16();
  throw InvalidArgument("unknown constellation '" + name + "'");
}

double Constellation::entropy_nats() const {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

void Constellation::validate() const {
  if (points.empty()) throw InvalidArgument("constellation is empty");
  if (probs.size() != points.size()) throw InvalidArgument("constellation probability count mismatch");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw InvalidArgument("constellation probability is negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("constellation probabilities do not sum to 1");
}

Constellation Constellation::with_probs(std::vector<double> p) const {
  Constellation c = *this;
  c.probs = std::move(p);
  return c;
}

MIEstimate discrete_channel_mi(const Constellation& c, const channel::ChannelSpec& spec, std::size_t mc_samples,
                               Rng& rng) {
  c.validate();
  spec.validate();
  if (mc_samples < 1000) throw InvalidArgument("discrete_channel_mi: mc_samples must be >= 1000");
  const double sigma = spec.sigma();
  if (sigma == 0.0) return MIEstimate(c.entropy_nats(), EstimateKind::kExact, 0.0);
  ChannelSample s = discrete_mi_samples(c.points, c.probs, c.is_complex, sigma, spec.kind, mc_samples, rng);
  const double est = std::accumulate(s.per_draw.begin(), s.per_draw.end(), 0.0) / static_cast<double>(mc_samples);
  // Clipped at the data-processing limits; the raw MC value can stray past
  // them by a fraction of its stderr.
  const double clipped = std::clamp(est, 0.0, c.entropy_nats());
  return MIEstimate(clipped, EstimateKind::kExact, batch_means_stderr(s.per_draw, kStderrBatches));
}

nn::Tensor discrete_channel_mi(const nn::Tensor& probs, const Constellation& c, const channel::ChannelSpec& spec,
                               std::size_t mc_samples, Rng& rng) {
  if (probs.rows() != 1 || probs.cols() != static_cast<Eigen::Index>(c.size())) {
    throw ShapeError("discrete_channel_mi: probs must be 1 x constellation size");
  }
  spec.validate();
  std::vector<double> p(c.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = probs.value()(0, static_cast<Eigen::Index>(k));
  const double sigma = spec.sigma();
  Matrix value(1, 1);
  Matrix grad(1, static_cast<Eigen::Index>(p.size()));
  if (sigma == 0.0) {
    double h = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      h -= p[k] > 0.0 ? p[k] * std::log(p[k]) : 0.0;
      grad(0, static_cast<Eigen::Index>(k)) = p[k] > 0.0 ? -std::log(p[k]) - 1.0 : 0.0;
    }
    value(0, 0) = h;
  } else {
    ChannelSample s = discrete_mi_samples(c.points, p, c.is_complex, sigma, spec.kind, mc_samples, rng);
    value(0, 0) = std::accumulate(s.per_draw.begin(), s.per_draw.end(), 0.0) / static_cast<double>(mc_samples);
    for (std::size_t k = 0; k < p.size(); ++k) grad(0, static_cast<Eigen::Index>(k)) = s.grad[k];
  }
  return nn::make_result(std::move(value), {probs},
                         [probs, grad](const Matrix& g) { nn::accumulate_grad(probs, grad * g(0, 0)); });
}

}  // namespace tocomm::mi
