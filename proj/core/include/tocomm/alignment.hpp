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

#ifndef TOCOMM_ALIGNMENT_HPP_
#define TOCOMM_ALIGNMENT_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tocomm/channel.hpp"
#include "tocomm/datasets.hpp"
#include "tocomm/tensor.hpp"

namespace tocomm::transceiver {
class Transceiver;
}

namespace tocomm::alignment {

enum class MapMethod { kLs, kMmse, kLearned };
std::string to_string(MapMethod method);

// Linear map between two latent spaces: aligned = zhat * weight + bias.
struct AlignmentMap {
  Matrix weight;  // source_dim x target_dim
  std::optional<RowVector> bias;
  MapMethod method = MapMethod::kLs;
  // Frobenius norm of the anchor fit error.
  double fit_residual = 0.0;

  int source_dim() const { return static_cast<int>(weight.rows()); }
  int target_dim() const { return static_cast<int>(weight.cols()); }
};

// Cosine similarity of every row of z to every anchor row: B x k.
Matrix relative_encode(const Matrix& z, const Matrix& anchor_feats);
nn::Tensor relative_encode(const nn::Tensor& z, const nn::Tensor& anchor_feats);

// Ridge least squares W = (A^T A + ridge m I)^-1 A^T B. The bias column, when
// enabled, is not penalized. ridge = 0 with a rank-deficient design throws
// RankDeficientError.
AlignmentMap fit_ls(const Matrix& src, const Matrix& tgt, double ridge, bool bias = true);

// Linear MMSE map under a unit-variance prior on its entries:
// W = (A^T A + noise_var I)^-1 A^T B.
AlignmentMap fit_mmse(const Matrix& src_noisy, const Matrix& tgt, double noise_var, bool bias = true);

struct LearnedOptions {
  // <= 0 selects 1 / L from a power-iteration estimate of the curvature.
  double lr = 0.0;
  bool bias = true;
};

// Full-batch gradient descent on the mean squared fit error from W = 0.
AlignmentMap fit_learned(const Matrix& src, const Matrix& tgt, std::size_t steps, Rng& rng,
                         const LearnedOptions& opts = {});

Matrix apply_map(const Matrix& zhat, const AlignmentMap& map);

// Anchor fit error of `map` (same definition as fit_residual).
double residual(const Matrix& src, const Matrix& tgt, const AlignmentMap& map);

enum class CrossMode { kNone, kReceiverLs, kReceiverMmse, kReceiverLearned, kRelative };
CrossMode parse_cross_mode(const std::string& name);
std::string to_string(CrossMode mode);

struct CrossOptions {
  // Noisy anchor transmissions averaged per anchor when fitting receiver maps.
  int transmissions_per_anchor = 16;
  double ridge = 0.0;
  std::size_t learned_steps = 2000;
  bool bias = true;
};

// Accuracy of transmitter i decoded by receiver j.
struct AccuracyMatrix {
  CrossMode mode = CrossMode::kNone;
  std::vector<std::string> names;
  Matrix accuracy;
  // Entries whose code and decoder dimensions differ (accuracy recorded as 0).
  std::vector<std::vector<bool>> incompatible;

  double mean_diagonal() const;
  double mean_off_diagonal() const;
  // Mean over off-diagonal (i, j) of accuracy(j, j) - accuracy(i, j).
  double mean_aligned_gap() const;
  // Header row/column are pair names; cells have 4 decimals.
  std::string to_csv() const;
};

AccuracyMatrix cross_matrix(const std::vector<const transceiver::Transceiver*>& pairs, const data::Dataset& testset,
                            const channel::ChannelSpec& spec, CrossMode mode, const data::AnchorSet& anchors,
                            Rng& rng, const CrossOptions& opts = {});

}  // namespace tocomm::alignment

#endif  // TOCOMM_ALIGNMENT_HPP_
