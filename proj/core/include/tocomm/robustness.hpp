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

#ifndef TOCOMM_ROBUSTNESS_HPP_
#define TOCOMM_ROBUSTNESS_HPP_

#include <array>
#include <span>
#include <string>
#include <vector>

#include "tocomm/transceiver.hpp"

namespace tocomm::robustness {

// Per-example KL rate of the encoder posterior (nats); higher is more anomalous.
Vector ood_score(const Matrix& x, const transceiver::Encoder& enc);

// Entropy of the receiver's class posterior on noiseless codes, for comparison.
Vector entropy_score(const Matrix& x, const transceiver::Transceiver& pair);

// The tpr-quantile of the ID scores: sorted[ceil(tpr * n) - 1]. Scores at or
// below it are accepted.
double calibrate_threshold(std::span<const double> id_scores, double tpr = 0.95);

struct ScoreSummary {
  // Quantiles at kQuantileLevels.
  std::array<double, 5> quantiles{};
  double mean = 0.0;
};
inline constexpr std::array<double, 5> kQuantileLevels{0.05, 0.25, 0.5, 0.75, 0.95};

struct OodReport {
  double auroc = 0.5;
  double fpr_at_95tpr = 1.0;
  double threshold = 0.0;
  ScoreSummary id_summary;
  ScoreSummary ood_summary;
};

// Mann-Whitney AUROC with ties counted 1/2 (OoD is the positive class).
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

OodReport ood_metrics(std::span<const double> id_scores, std::span<const double> ood_scores);

ScoreSummary summarize(std::span<const double> scores);

}  // namespace tocomm::robustness

#endif  // TOCOMM_ROBUSTNESS_HPP_
