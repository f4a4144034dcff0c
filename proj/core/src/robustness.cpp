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

#include "tocomm/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tocomm/errors.hpp"
#include "tocomm/mi.hpp"

namespace tocomm::robustness {

namespace {

constexpr Eigen::Index kChunk = 500;

std::vector<double> sorted_copy(std::span<const double> s) {
  std::vector<double> v(s.begin(), s.end());
  std::sort(v.begin(), v.end());
  return v;
}

// Linear interpolation between order statistics.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

Vector ood_score(const Matrix& x, const transceiver::Encoder& enc) {
  if (!enc.stochastic()) throw ModeError("ood_score needs a stochastic encoder (no log-variance head)");
  Vector out(x.rows());
  for (Eigen::Index lo = 0; lo < x.rows(); lo += kChunk) {
    const Eigen::Index n = std::min(kChunk, x.rows() - lo);
    const auto o = enc.forward(nn::Tensor::constant(x.middleRows(lo, n)));
    out.segment(lo, n) = mi::kl_gauss_to_std(o.mu.value(), o.logvar.value());
  }
  return out;
}

Vector entropy_score(const Matrix& x, const transceiver::Transceiver& pair) {
  Vector out(x.rows());
  for (Eigen::Index lo = 0; lo < x.rows(); lo += kChunk) {
    const Eigen::Index n = std::min(kChunk, x.rows() - lo);
    const Matrix codes = pair.infer_codes(x.middleRows(lo, n));
    const Matrix p = transceiver::softmax(pair.receive_side(nn::Tensor::constant(codes)).value());
    out.segment(lo, n) = -(p.array() * p.array().max(1e-300).log()).rowwise().sum().matrix();
  }
  return out;
}

double calibrate_threshold(std::span<const double> id_scores, double tpr) {
  if (!(tpr > 0.0 && tpr < 1.0)) throw InvalidArgument("calibrate_threshold: tpr must lie in (0, 1)");
  if (id_scores.size() < 20) throw InvalidArgument("calibrate_threshold: need at least 20 ID scores");
  const std::vector<double> s = sorted_copy(id_scores);
  // Guard against tpr * n landing a hair above an integer.
  const double target = tpr * static_cast<double>(s.size());
  auto k = static_cast<std::size_t>(std::ceil(target - 1e-9));
  k = std::clamp<std::size_t>(k, 1, s.size());
  return s[k - 1];
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  if (id_scores.empty() || ood_scores.empty()) throw InvalidArgument("auroc: both score sets must be non-empty");
  // Rank-sum with midranks for ties.
  struct Item {
    double v;
    bool ood;
  };
  std::vector<Item> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double v : id_scores) all.push_back({v, false});
  for (double v : ood_scores) all.push_back({v, true});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.v < b.v; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (all[t].ood) rank_sum += mid;
    }
    i = j;
  }
  const auto n1 = static_cast<double>(ood_scores.size());
  const auto n0 = static_cast<double>(id_scores.size());
  return (rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);
}

ScoreSummary summarize(std::span<const double> scores) {
  if (scores.empty()) throw InvalidArgument("summarize: empty score set");
  const std::vector<double> s = sorted_copy(scores);
  ScoreSummary out;
  for (std::size_t i = 0; i < kQuantileLevels.size(); ++i) out.quantiles[i] = quantile(s, kQuantileLevels[i]);
  out.mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  return out;
}

OodReport ood_metrics(std::span<const double> id_scores, std::span<const double> ood_scores) {
  OodReport r;
  r.auroc = auroc(id_scores, ood_scores);
  if (id_scores.size() >= 20) {
    r.threshold = calibrate_threshold(id_scores, 0.95);
  } else {
    // Too few for calibration proper: fall back to the largest ID score.
    r.threshold = *std::max_element(id_scores.begin(), id_scores.end());
  }
  const auto accepted = std::count_if(ood_scores.begin(), ood_scores.end(), [&](double v) { return v <= r.threshold; });
  r.fpr_at_95tpr = static_cast<double>(accepted) / static_cast<double>(ood_scores.size());
  r.id_summary = summarize(id_scores);
  r.ood_summary = summarize(ood_scores);
  return r;
}

}  // namespace tocomm::robustness
