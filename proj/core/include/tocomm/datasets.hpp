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

#ifndef TOCOMM_DATASETS_HPP_
#define TOCOMM_DATASETS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tocomm/tensor.hpp"

namespace tocomm::data {

struct TensorShape {
  int channels = 1;
  int height = 1;
  int width = 1;

  int size() const { return channels * height * width; }
  bool operator==(const TensorShape&) const = default;
};

// One labelled input. `x` is CHW-flattened with entries in [0, 1].
struct Example {
  std::vector<double> x;
  int y = 0;
  int d = 0;
  // Generator-known class the label was derived from (the digit behind a
  // Colored-MNIST binary label); -1 when there is none.
  int source_class = -1;

  bool operator==(const Example&) const = default;
};

class Dataset {
 public:
  Dataset() = default;
  // Validates every invariant: non-empty, common shape, labels in range,
  // environments in range, finite inputs.
  Dataset(TensorShape shape, int class_count, int env_count, std::vector<Example> examples);

  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  const TensorShape& shape() const { return shape_; }
  int class_count() const { return class_count_; }
  int env_count() const { return env_count_; }
  const std::vector<Example>& examples() const { return examples_; }
  const Example& operator[](std::size_t i) const { return examples_[i]; }

  // Batch matrix (rows = examples) for the given indices.
  Matrix inputs(std::span<const std::size_t> indices) const;
  std::vector<int> labels(std::span<const std::size_t> indices) const;
  Matrix all_inputs() const;
  std::vector<int> all_labels() const;

  Dataset subset(std::span<const std::size_t> indices) const;
  // Examples of one environment; env ids are preserved.
  Dataset environment(int env) const;

  // FNV-1a over shape, labels, environments and input bytes.
  std::uint64_t content_hash() const;

  bool operator==(const Dataset&) const = default;

 private:
  TensorShape shape_;
  int class_count_ = 0;
  int env_count_ = 0;
  std::vector<Example> examples_;
};

struct DigitOptions {
  int size = 12;
  double pixel_noise = 0.15;
  // Digits never generated (held-out-class experiments).
  std::vector<int> exclude_classes;
};

// Procedural 10-class grayscale digit glyphs with random affine jitter,
// stroke intensity and pixel noise. Classes are balanced (round robin).
Dataset make_synthetic_digits(std::size_t n, std::uint64_t seed, const DigitOptions& opts = {});

// Two-channel Colored-MNIST: y = (digit < 5), flipped with probability
// `label_flip`; the digit is drawn in channel y with probability
// env_correlations[d] and in the other channel otherwise. Examples are
// shuffled and split evenly across the environments.
Dataset make_colored_mnist(const Dataset& base_digits, std::span<const double> env_correlations,
                           double label_flip, std::uint64_t seed);

struct GaussianPairs {
  Matrix u;  // n x dim
  Matrix v;  // n x dim
};

// Coordinate pairs (u_i, v_i) jointly Gaussian, unit variance, correlation rho,
// independent across coordinates.
GaussianPairs make_synthetic_gaussian(int dim, double rho, std::size_t n, std::uint64_t seed);

// Class-conditional isotropic blobs squashed into [0, 1]; shape (1, 1, dim).
Dataset make_gaussian_blobs(std::size_t n, int dim, int classes, double spread, std::uint64_t seed);

enum class AnchorStrategy { kUniform, kPerClass };

struct AnchorSet {
  std::vector<std::size_t> indices;  // sorted, distinct
  std::vector<Example> examples;
  std::uint64_t hash = 0;

  std::size_t k() const { return indices.size(); }
  Matrix inputs() const;
};

AnchorStrategy parse_anchor_strategy(const std::string& name);

AnchorSet select_anchors(const Dataset& dataset, std::size_t k, AnchorStrategy strategy,
                         std::uint64_t seed);

// MNIST-layout IDX pair (images magic 0x00000803, labels magic 0x00000801).
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
// CSV with a header row. `label_column` names the label; an optional "env"
// column supplies environment ids; every other column is an input feature.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column);
// Writes header "y,env,x0,...". Values are printed with 17 significant digits.
void save_csv(const Dataset& dataset, const std::filesystem::path& path);

// Shuffled index permutation of [0, n).
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

}  // namespace tocomm::data

#endif  // TOCOMM_DATASETS_HPP_
