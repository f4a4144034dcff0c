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

#include "tocomm/alignment.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "tocomm/errors.hpp"
#include "tocomm/transceiver.hpp"

namespace tocomm::alignment {

namespace {

Matrix with_bias_column(const Matrix& a) {
  Matrix out(a.rows(), a.cols() + 1);
  out << a, Matrix::Ones(a.rows(), 1);
  return out;
}

AlignmentMap split_solution(const Matrix& sol, bool bias, MapMethod method) {
  AlignmentMap m;
  m.method = method;
  if (bias) {
    m.weight = sol.topRows(sol.rows() - 1);
    m.bias = sol.bottomRows(1);
  } else {
    m.weight = sol;
  }
  return m;
}

AlignmentMap ridge_solve(const Matrix& src, const Matrix& tgt, double ridge, bool bias, MapMethod method) {
  if (src.rows() != tgt.rows()) throw ShapeError("alignment: source/target anchor counts differ");
  if (src.rows() < 2) throw InvalidArgument("alignment: need at least 2 anchors");
  if (!(ridge >= 0.0)) throw InvalidArgument("alignment: regularization must be >= 0");
  const Matrix design = bias ? with_bias_column(src) : src;
  const auto m = static_cast<double>(src.rows());
  Matrix sol;
  if (ridge == 0.0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    if (qr.rank() < design.cols()) {
      throw RankDeficientError(static_cast<std::size_t>(qr.rank()), static_cast<std::size_t>(design.cols()));
    }
    sol = qr.solve(tgt);
  } else {
    Matrix normal = design.transpose() * design;
    for (Eigen::Index i = 0; i < src.cols(); ++i) normal(i, i) += ridge * m;
    sol = normal.ldlt().solve(design.transpose() * tgt);
  }
  AlignmentMap map = split_solution(sol, bias, method);
  map.fit_residual = residual(src, tgt, map);
  return map;
}

double accuracy_of(const Matrix& scores, std::span<const int> labels) {
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    scores.row(r).maxCoeff(&best);
    if (best == labels[static_cast<std::size_t>(r)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.rows());
}

constexpr Eigen::Index kEvalChunk = 500;

// Codes of the whole test set, normalized chunk by chunk as at inference.
Matrix codes_in_chunks(const transceiver::Transceiver& tx, const Matrix& x) {
  Matrix out(x.rows(), tx.code_dim());
  for (Eigen::Index lo = 0; lo < x.rows(); lo += kEvalChunk) {
    const Eigen::Index n = std::min(kEvalChunk, x.rows() - lo);
    out.middleRows(lo, n) = tx.infer_codes(x.middleRows(lo, n));
  }
  return out;
}

double decode_accuracy(const transceiver::Transceiver& rx, const Matrix& received, std::span<const int> labels) {
  Matrix scores = rx.receive_side(nn::Tensor::constant(received)).value();
  return accuracy_of(scores, labels);
}

}  // namespace

std::string to_string(MapMethod method) {
  switch (method) {
    case MapMethod::kLs:
      return "ls";
    case MapMethod::kMmse:
      return "mmse";
    case MapMethod::kLearned:
      return "learned";
  }
  return "unknown";
}

Matrix relative_encode(const Matrix& z, const Matrix& anchor_feats) {
  if (z.cols() != anchor_feats.cols()) throw ShapeError("relative_encode: code/anchor dimension mismatch");
  if (anchor_feats.rows() < 2) throw InvalidArgument("relative_encode: need k >= 2 anchors");
  const Vector zn = z.rowwise().norm();
  const Vector an = anchor_feats.rowwise().norm();
  if ((zn.array() <= 0.0).any() || (an.array() <= 0.0).any()) {
    throw InvalidArgument("relative_encode: degenerate angle (zero-norm code or anchor)");
  }
  Matrix sim = (z.array().colwise() / zn.array()).matrix() *
               (anchor_feats.array().colwise() / an.array()).matrix().transpose();
  return sim.cwiseMax(-1.0).cwiseMin(1.0);
}

nn::Tensor relative_encode(const nn::Tensor& z, const nn::Tensor& anchor_feats) {
  if (z.cols() != anchor_feats.cols()) throw ShapeError("relative_encode: code/anchor dimension mismatch");
  if (anchor_feats.rows() < 2) throw InvalidArgument("relative_encode: need k >= 2 anchors");
  if ((z.value().rowwise().norm().array() <= 0.0).any() ||
      (anchor_feats.value().rowwise().norm().array() <= 0.0).any()) {
    throw InvalidArgument("relative_encode: degenerate angle (zero-norm code or anchor)");
  }
  return nn::matmul(nn::normalize_rows(z), nn::transpose(nn::normalize_rows(anchor_feats)));
}

AlignmentMap fit_ls(const Matrix& src, const Matrix& tgt, double ridge, bool bias) {
  return ridge_solve(src, tgt, ridge, bias, MapMethod::kLs);
}

AlignmentMap fit_mmse(const Matrix& src_noisy, const Matrix& tgt, double noise_var, bool bias) {
  if (!(noise_var >= 0.0)) throw InvalidArgument("fit_mmse: noise_var must be >= 0");
  if (src_noisy.rows() < 2) throw InvalidArgument("alignment: need at least 2 anchors");
  // Unit-variance prior on the map: (A^T A + noise_var I)^-1 A^T B.
  return ridge_solve(src_noisy, tgt, noise_var / static_cast<double>(src_noisy.rows()), bias, MapMethod::kMmse);
}

AlignmentMap fit_learned(const Matrix& src, const Matrix& tgt, std::size_t steps, Rng& rng,
                         const LearnedOptions& opts) {
  if (steps < 1) throw InvalidArgument("fit_learned: steps must be >= 1");
  if (src.rows() != tgt.rows()) throw ShapeError("alignment: source/target anchor counts differ");
  const Matrix design = opts.bias ? with_bias_column(src) : src;
  const auto m = static_cast<double>(src.rows());
  const Matrix gram = design.transpose() * design / m;
  double lr = opts.lr;
  if (lr <= 0.0) {
    // Power iteration for the largest eigenvalue of the (scaled) Gram matrix.
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector x(gram.rows());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = normal(rng);
    double lambda = 1.0;
    for (int it = 0; it < 200; ++it) {
      Vector y = gram * x;
      lambda = y.norm();
      if (lambda <= 0.0) break;
      x = y / lambda;
    }
    lr = 1.0 / std::max(lambda, 1e-12);
  }
  Matrix w = Matrix::Zero(design.cols(), tgt.cols());
  const Matrix cross = design.transpose() * tgt / m;
  const double start = (design * w - tgt).norm();
  // Nesterov-accelerated gradient on 1/(2m) ||A W - B||^2.
  Matrix prev = w;
  for (std::size_t s = 0; s < steps; ++s) {
    const double momentum = static_cast<double>(s) / static_cast<double>(s + 3);
    Matrix look = w + momentum * (w - prev);
    prev = w;
    w = look - lr * (gram * look - cross);
    if (s % 64 == 0 || s + 1 == steps) {
      const double r = (design * w - tgt).norm();
      if (!std::isfinite(r) || r > 10.0 * std::max(start, 1e-300)) {
        throw InvalidArgument("fit_learned: step size too large, residual diverged at step " + std::to_string(s));
      }
    }
  }
  AlignmentMap map = split_solution(w, opts.bias, MapMethod::kLearned);
  map.fit_residual = residual(src, tgt, map);
  return map;
}

Matrix apply_map(const Matrix& zhat, const AlignmentMap& map) {
  if (zhat.cols() != map.weight.rows()) throw ShapeError("apply_map: code dimension does not match map");
  Matrix out = zhat * map.weight;
  if (map.bias) out.rowwise() += *map.bias;
  return out;
}

double residual(const Matrix& src, const Matrix& tgt, const AlignmentMap& map) {
  return (apply_map(src, map) - tgt).norm();
}

CrossMode parse_cross_mode(const std::string& name) {
  if (name == "none") return CrossMode::kNone;
  if (name == "receiver-ls") return CrossMode::kReceiverLs;
  if (name == "receiver-mmse") return CrossMode::kReceiverMmse;
  if (name == "receiver-learned") return CrossMode::kReceiverLearned;
  if (name == "relative") return CrossMode::kRelative;
  throw InvalidArgument("unknown alignment mode '" + name + "'");
}

std::string to_string(CrossMode mode) {
  switch (mode) {
    case CrossMode::kNone:
      return "none";
    case CrossMode::kReceiverLs:
      return "receiver-ls";
    case CrossMode::kReceiverMmse:
      return "receiver-mmse";
    case CrossMode::kReceiverLearned:
      return "receiver-learned";
    case CrossMode::kRelative:
      return "relative";
  }
  return "unknown";
}

double AccuracyMatrix::mean_diagonal() const { return accuracy.diagonal().mean(); }

double AccuracyMatrix::mean_off_diagonal() const {
  const Eigen::Index n = accuracy.rows();
  if (n < 2) return 0.0;
  return (accuracy.sum() - accuracy.diagonal().sum()) / static_cast<double>(n * (n - 1));
}

double AccuracyMatrix::mean_aligned_gap() const {
  const Eigen::Index n = accuracy.rows();
  if (n < 2) return 0.0;
  double gap = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) gap += accuracy(j, j) - accuracy(i, j);
    }
  }
  return gap / static_cast<double>(n * (n - 1));
}

std::string AccuracyMatrix::to_csv() const {
  std::ostringstream out;
  out << "tx\\rx";
  for (const std::string& n : names) out << ',' << n;
  out << '\n';
  char cell[32];
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << names[i];
    for (std::size_t j = 0; j < names.size(); ++j) {
      std::snprintf(cell, sizeof(cell), "%.4f",
                    accuracy(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      out << ',' << cell;
    }
    out << '\n';
  }
  return out.str();
}

AccuracyMatrix cross_matrix(const std::vector<const transceiver::Transceiver*>& pairs, const data::Dataset& testset,
                            const channel::ChannelSpec& spec, CrossMode mode, const data::AnchorSet& anchors,
                            Rng& rng, const CrossOptions& opts) {
  using transceiver::TransmissionMode;
  if (pairs.empty()) throw InvalidArgument("cross_matrix: no transceiver pairs");
  if (testset.empty()) throw InvalidArgument("cross_matrix: empty test set");
  spec.validate();
  const Matrix anchor_x = anchors.inputs();
  for (const auto* p : pairs) {
    const bool relative = p->mode() == TransmissionMode::kRelative;
    if (mode == CrossMode::kRelative && !relative) {
      throw ConfigError("relative cross-matrix requires pairs trained on relative codes ('" + p->name() + "' is not)");
    }
    if (mode != CrossMode::kRelative && relative) {
      throw ConfigError("pair '" + p->name() + "' transmits relative codes; use mode 'relative'");
    }
    if (relative && (p->anchors().rows() != anchor_x.rows() || !p->anchors().isApprox(anchor_x, 0.0))) {
      throw ConfigError("pair '" + p->name() + "' was trained with a different anchor set");
    }
    if (p->decoder().config().classes != pairs.front()->decoder().config().classes) {
      throw ConfigError("cross_matrix: pairs disagree on the class count");
    }
  }

  const std::size_t n = pairs.size();
  AccuracyMatrix out;
  out.mode = mode;
  out.accuracy = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  out.incompatible.assign(n, std::vector<bool>(n, false));
  for (const auto* p : pairs) out.names.push_back(p->name());

  const Matrix test_x = testset.all_inputs();
  const std::vector<int> labels = testset.all_labels();
  std::vector<Matrix> test_codes;
  std::vector<Matrix> anchor_codes;
  for (const auto* p : pairs) {
    test_codes.push_back(codes_in_chunks(*p, test_x));
    anchor_codes.push_back(mode == CrossMode::kRelative ? Matrix() : p->infer_codes(anchor_x));
  }
  // One independent stream per entry, drawn up front in row-major order.
  std::vector<std::uint64_t> seeds(n * n);
  for (auto& s : seeds) s = rng();

  const double noise_var = spec.sigma() * spec.sigma();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Rng entry_rng(seeds[i * n + j]);
      const auto& tx = *pairs[i];
      const auto& rx = *pairs[j];
      const bool receiver_mode = mode == CrossMode::kReceiverLs || mode == CrossMode::kReceiverMmse ||
                                 mode == CrossMode::kReceiverLearned;
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      if (i == j || !receiver_mode) {
        if (tx.code_dim() != rx.decoder().config().input_dim) {
          out.incompatible[i][j] = true;
          continue;
        }
        Matrix received = channel::transmit(test_codes[i], spec, entry_rng);
        out.accuracy(ii, jj) = decode_accuracy(rx, received, labels);
        continue;
      }
      // Receiver-side alignment: the receiver sees only channel outputs of
      // the transmitter's anchor codes and knows its own native anchor codes.
      Matrix src = Matrix::Zero(anchor_codes[i].rows(), anchor_codes[i].cols());
      const int reps = std::max(1, opts.transmissions_per_anchor);
      for (int r = 0; r < reps; ++r) src += channel::transmit(anchor_codes[i], spec, entry_rng);
      src /= static_cast<double>(reps);
      const Matrix& tgt = anchor_codes[j];
      AlignmentMap map;
      switch (mode) {
        case CrossMode::kReceiverLs:
          map = fit_ls(src, tgt, opts.ridge, opts.bias);
          break;
        case CrossMode::kReceiverMmse:
          map = fit_mmse(src, tgt, noise_var / static_cast<double>(reps), opts.bias);
          break;
        default:
          map = fit_learned(src, tgt, opts.learned_steps, entry_rng, {.lr = 0.0, .bias = opts.bias});
          break;
      }
      Matrix received = channel::transmit(test_codes[i], spec, entry_rng);
      out.accuracy(ii, jj) = decode_accuracy(rx, apply_map(received, map), labels);
    }
  }
  return out;
}

}  // namespace tocomm::alignment
