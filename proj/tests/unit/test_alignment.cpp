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
#include <numeric>
#include <sstream>

#include "gtest/gtest.h"
#include "tocomm/datasets.hpp"
#include "tocomm/errors.hpp"
#include "tocomm/training.hpp"
#include "tocomm/transceiver.hpp"

namespace tocomm::alignment {
namespace {

Matrix gaussian(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Matrix orthogonal(int d, std::uint64_t seed) {
  const Eigen::HouseholderQR<Matrix> qr(gaussian(d, d, seed));
  return qr.householderQ();
}

TEST(RelativeEncodeTest, CosineExamples) {
  Matrix anchors(2, 2);
  anchors << 1, 0, 0, 2;
  Matrix z(2, 2);
  z << 3, 0, 1, 1;
  const Matrix r = relative_encode(z, anchors);
  EXPECT_NEAR(r(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(r(0, 1), 0.0, 1e-12);
  EXPECT_NEAR(r(1, 0), std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(r(1, 1), std::sqrt(0.5), 1e-12);
}

TEST(RelativeEncodeTest, InvariantToRotationAndScale) {
  const Matrix z = gaussian(30, 8, 1), a = gaussian(10, 8, 2);
  const Matrix q = orthogonal(8, 3);
  const Matrix base = relative_encode(z, a);
  EXPECT_LE((relative_encode(z * q, a * q) - base).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE((relative_encode(4.0 * z, 4.0 * a) - base).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(base.cwiseAbs().maxCoeff(), 1.0);
}

TEST(RelativeEncodeTest, TensorPathMatchesMatrixPath) {
  const Matrix z = gaussian(5, 4, 4), a = gaussian(3, 4, 5);
  const Matrix t = relative_encode(nn::Tensor::constant(z), nn::Tensor::constant(a)).value();
  EXPECT_LE((t - relative_encode(z, a)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RelativeEncodeTest, RejectsDegenerateInputs) {
  EXPECT_THROW(relative_encode(gaussian(3, 4, 1), gaussian(1, 4, 2)), InvalidArgument);
  EXPECT_THROW(relative_encode(gaussian(3, 4, 1), gaussian(3, 5, 2)), ShapeError);
  Matrix z = gaussian(3, 4, 1);
  z.row(1).setZero();
  EXPECT_THROW(relative_encode(z, gaussian(3, 4, 2)), InvalidArgument);
}

TEST(FitLsTest, IdentityOnIdenticalSpaces) {
  const Matrix s = gaussian(40, 6, 1);
  const AlignmentMap m = fit_ls(s, s, 0.0);
  EXPECT_LE((m.weight - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(m.bias->cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(m.method, MapMethod::kLs);
}

TEST(FitLsTest, RecoversPlantedAffineMap) {
  const int d = 8;
  const Matrix s = gaussian(4 * d, d, 2);
  const Matrix w = gaussian(d, d, 3);
  const RowVector b = gaussian(1, d, 4);
  const Matrix t = (s * w).rowwise() + b;
  const AlignmentMap m = fit_ls(s, t, 0.0);
  EXPECT_LE((m.weight - w).norm() / w.norm(), 1e-5);
  EXPECT_LE((*m.bias - b).norm(), 1e-5);
  EXPECT_LE(m.fit_residual, 1e-8);
}

TEST(FitLsTest, LargeRidgeShrinksToZero) {
  const Matrix s = gaussian(30, 4, 5), t = gaussian(30, 4, 6);
  EXPECT_LE(fit_ls(s, t, 1e12, false).weight.norm(), 1e-9);
}

TEST(FitLsTest, RankDeficientAnchorsThrow) {
  Matrix s = gaussian(20, 4, 7);
  s.col(3) = s.col(0);
  EXPECT_THROW(fit_ls(s, gaussian(20, 4, 8), 0.0), RankDeficientError);
  EXPECT_THROW(fit_ls(gaussian(3, 4, 9), gaussian(3, 4, 10), 0.0), RankDeficientError);
  EXPECT_NO_THROW(fit_ls(s, gaussian(20, 4, 8), 1e-3));
  EXPECT_THROW(fit_ls(gaussian(20, 4, 1), gaussian(19, 4, 2), 0.0), ShapeError);
  EXPECT_THROW(fit_ls(gaussian(20, 4, 1), gaussian(20, 4, 2), -1.0), InvalidArgument);
}

TEST(FitLsTest, ResidualIsMinimal) {
  const Matrix s = gaussian(50, 5, 11), t = gaussian(50, 3, 12);
  const AlignmentMap m = fit_ls(s, t, 0.0);
  Rng rng(13);
  std::normal_distribution<double> n(0.0, 1e-3);
  for (int trial = 0; trial < 20; ++trial) {
    AlignmentMap p = m;
    for (Eigen::Index i = 0; i < p.weight.size(); ++i) p.weight.data()[i] += n(rng);
    EXPECT_GE(residual(s, t, p), m.fit_residual);
  }
}

TEST(FitMmseTest, ZeroNoiseEqualsLs) {
  const Matrix s = gaussian(40, 5, 1), t = gaussian(40, 5, 2);
  const AlignmentMap ls = fit_ls(s, t, 0.0);
  const AlignmentMap mm = fit_mmse(s, t, 0.0);
  EXPECT_LE((ls.weight - mm.weight).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(mm.method, MapMethod::kMmse);
}

TEST(FitMmseTest, ContinuousAtZeroNoise) {
  const Matrix s = gaussian(40, 5, 3), t = gaussian(40, 5, 4);
  const Matrix w0 = fit_ls(s, t, 0.0).weight;
  double prev = 1e300;
  for (double v : {1e-1, 1e-3, 1e-6}) {
    const double gap = (fit_mmse(s, t, v).weight - w0).norm();
    EXPECT_LT(gap, prev);
    prev = gap;
  }
  EXPECT_LE(prev, 1e-4);
}

TEST(FitMmseTest, HugeNoiseShrinksToZeroAndNegativeThrows) {
  const Matrix s = gaussian(40, 5, 5), t = gaussian(40, 5, 6);
  EXPECT_LE(fit_mmse(s, t, 1e12, false).weight.norm(), 1e-9);
  EXPECT_THROW(fit_mmse(s, t, -1e-3), InvalidArgument);
}

// Anchors seen through noise: MMSE generalizes at least as well as LS on
// average.
TEST(FitMmseTest, NoMoreTestErrorThanLsOnAverage) {
  const int d = 8;
  const double var = 0.1;
  double ls_err = 0.0, mmse_err = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix w = orthogonal(d, 100 + seed);
    const Matrix clean = gaussian(8 * d, d, 200 + seed);
    const Matrix noisy = clean + gaussian(8 * d, d, 300 + seed, std::sqrt(var));
    const Matrix test_clean = gaussian(2000, d, 400 + seed);
    const Matrix test_noisy = test_clean + gaussian(2000, d, 500 + seed, std::sqrt(var));
    const Matrix truth = test_clean * w;
    ls_err += (apply_map(test_noisy, fit_ls(noisy, clean * w, 0.0)) - truth).squaredNorm();
    mmse_err += (apply_map(test_noisy, fit_mmse(noisy, clean * w, var)) - truth).squaredNorm();
  }
  EXPECT_LE(mmse_err, ls_err);
}

TEST(FitLearnedTest, ConvergesToLsSolution) {
  const Matrix s = gaussian(64, 6, 1);
  const Matrix t = s * gaussian(6, 4, 2) + gaussian(64, 4, 3, 0.1);
  const AlignmentMap ls = fit_ls(s, t, 0.0);
  Rng rng(4);
  const AlignmentMap gd = fit_learned(s, t, 2000, rng);
  EXPECT_LE(gd.fit_residual, 1.01 * ls.fit_residual);
  EXPECT_EQ(gd.method, MapMethod::kLearned);
}

TEST(FitLearnedTest, DeterministicAndValidated) {
  const Matrix s = gaussian(32, 3, 5), t = gaussian(32, 3, 6);
  Rng a(7), b(7);
  EXPECT_EQ(fit_learned(s, t, 100, a).weight, fit_learned(s, t, 100, b).weight);
  EXPECT_THROW(fit_learned(s, t, 0, a), InvalidArgument);
  EXPECT_THROW(fit_learned(s, t, 500, a, {.lr = 1e3}), InvalidArgument);
}

TEST(ApplyMapTest, IdentityZeroAndLinearity) {
  AlignmentMap m;
  m.weight = Matrix::Identity(3, 3);
  const Matrix z = gaussian(5, 3, 1), y = gaussian(5, 3, 2);
  EXPECT_EQ(apply_map(z, m), z);
  m.weight = gaussian(3, 2, 3);
  EXPECT_TRUE(apply_map(Matrix::Zero(4, 3), m).isZero());
  EXPECT_LE((apply_map(2.0 * z + y, m) - 2.0 * apply_map(z, m) - apply_map(y, m)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(apply_map(gaussian(5, 4, 1), m), ShapeError);
}

TEST(CrossModeTest, NamesRoundTrip) {
  for (const char* n : {"none", "receiver-ls", "receiver-mmse", "receiver-learned", "relative"}) {
    EXPECT_EQ(to_string(parse_cross_mode(n)), n);
  }
  EXPECT_THROW(parse_cross_mode("sender"), InvalidArgument);
}

class CrossMatrixTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const data::Dataset all = data::make_gaussian_blobs(2100, 8, 4, 0.08, 1);
    std::vector<std::size_t> tr(1500), te(600);
    std::iota(tr.begin(), tr.end(), 0);
    std::iota(te.begin(), te.end(), 1500);
    train_ = new data::Dataset(all.subset(tr));
    test_ = new data::Dataset(all.subset(te));
    for (int i = 0; i < 2; ++i) {
      Rng rng(10 + i);
      auto pc = transceiver::family_config("mlp-small", train_->shape(), 6, 4);
      pc.name = "p" + std::to_string(i);
      pairs_.push_back(new transceiver::Transceiver(pc, rng));
      training::TrainConfig cfg;
      cfg.epochs = 4;
      cfg.seed = 20 + i;
      training::train_local(*pairs_.back(), *train_, cfg);
    }
  }
  static void TearDownTestSuite() {
    for (auto* p : pairs_) delete p;
    pairs_.clear();
    delete train_;
    delete test_;
  }

  static std::vector<const transceiver::Transceiver*> ptrs() { return {pairs_.begin(), pairs_.end()}; }

  static data::Dataset* train_;
  static data::Dataset* test_;
  static std::vector<transceiver::Transceiver*> pairs_;
};

data::Dataset* CrossMatrixTest::train_ = nullptr;
data::Dataset* CrossMatrixTest::test_ = nullptr;
std::vector<transceiver::Transceiver*> CrossMatrixTest::pairs_;

TEST_F(CrossMatrixTest, DiagonalMatchesEvaluateOnCleanChannel) {
  const auto anchors = data::select_anchors(*train_, 32, data::AnchorStrategy::kUniform, 3);
  const auto spec = channel::ChannelSpec::noiseless();
  Rng rng(4);
  const AccuracyMatrix m = cross_matrix(ptrs(), *test_, spec, CrossMode::kNone, anchors, rng);
  for (int i = 0; i < 2; ++i) {
    Rng r(5);
    EXPECT_DOUBLE_EQ(m.accuracy(i, i), training::evaluate(*pairs_[static_cast<std::size_t>(i)], *test_, spec, r));
  }
}

TEST_F(CrossMatrixTest, ReceiverAlignmentRecoversAccuracy) {
  const auto anchors = data::select_anchors(*train_, 64, data::AnchorStrategy::kUniform, 3);
  const auto spec = channel::ChannelSpec::awgn_snr(20);
  Rng a(6), b(6);
  const AccuracyMatrix none = cross_matrix(ptrs(), *test_, spec, CrossMode::kNone, anchors, a);
  const AccuracyMatrix ls = cross_matrix(ptrs(), *test_, spec, CrossMode::kReceiverLs, anchors, b);
  EXPECT_LT(ls.mean_aligned_gap(), none.mean_aligned_gap());
  EXPECT_GT(ls.mean_off_diagonal(), none.mean_off_diagonal());
  Rng c(6);
  EXPECT_EQ(cross_matrix(ptrs(), *test_, spec, CrossMode::kReceiverLs, anchors, c).accuracy, ls.accuracy);
}

TEST_F(CrossMatrixTest, CsvLayout) {
  const auto anchors = data::select_anchors(*train_, 16, data::AnchorStrategy::kUniform, 3);
  Rng rng(7);
  const AccuracyMatrix m =
      cross_matrix(ptrs(), *test_, channel::ChannelSpec::awgn_snr(10), CrossMode::kReceiverMmse, anchors, rng);
  std::istringstream in(m.to_csv());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "tx\\rx,p0,p1");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("p0,", 0), 0u);
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 2);
  EXPECT_NE(line.find('.'), std::string::npos);
}

TEST_F(CrossMatrixTest, RelativeModeCannotBeMixed) {
  const auto anchors = data::select_anchors(*train_, 8, data::AnchorStrategy::kUniform, 3);
  auto pc = transceiver::family_config("mlp-small", train_->shape(), 6, 4);
  pc.mode = transceiver::TransmissionMode::kRelative;
  pc.decoder.input_dim = 8;
  Rng rng(8);
  transceiver::Transceiver rel(pc, rng);
  rel.set_anchors(anchors.inputs());
  const auto spec = channel::ChannelSpec::awgn_snr(10);
  EXPECT_THROW(cross_matrix({pairs_[0], &rel}, *test_, spec, CrossMode::kNone, anchors, rng), ConfigError);
  EXPECT_THROW(cross_matrix(ptrs(), *test_, spec, CrossMode::kRelative, anchors, rng), ConfigError);
  EXPECT_NO_THROW(cross_matrix({&rel, &rel}, *test_, spec, CrossMode::kRelative, anchors, rng));
  const auto other = data::select_anchors(*train_, 8, data::AnchorStrategy::kUniform, 99);
  EXPECT_THROW(cross_matrix({&rel}, *test_, spec, CrossMode::kRelative, other, rng), ConfigError);
}

TEST_F(CrossMatrixTest, ClassCountMismatchIsConfigError) {
  Rng rng(9);
  transceiver::Transceiver five(transceiver::family_config("mlp-small", train_->shape(), 6, 5), rng);
  const auto anchors = data::select_anchors(*train_, 8, data::AnchorStrategy::kUniform, 3);
  EXPECT_THROW(cross_matrix({pairs_[0], &five}, *test_, channel::ChannelSpec::awgn_snr(10), CrossMode::kNone,
                            anchors, rng),
               ConfigError);
}

TEST(AccuracyMatrixTest, Summaries) {
  AccuracyMatrix m;
  m.accuracy.resize(2, 2);
  m.accuracy << 0.9, 0.2, 0.4, 0.8;
  EXPECT_NEAR(m.mean_diagonal(), 0.85, 1e-12);
  EXPECT_NEAR(m.mean_off_diagonal(), 0.3, 1e-12);
  // (0.8 - 0.2 + 0.9 - 0.4) / 2
  EXPECT_NEAR(m.mean_aligned_gap(), 0.55, 1e-12);
}

}  // namespace
}  // namespace tocomm::alignment
