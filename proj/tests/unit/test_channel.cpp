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

#include "tocomm/channel.hpp"

#include <cmath>
#include <limits>

#include "gtest/gtest.h"
#include "tocomm/errors.hpp"

namespace tocomm::channel {
namespace {

Matrix unit_power_codes(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g;
  Matrix z(n, d);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = g(rng);
  return normalize_power(z);
}

TEST(SigmaTest, SnrConversions) {
  EXPECT_NEAR(snr_to_sigma(10.0), 0.316228, 1e-6);
  EXPECT_NEAR(std::pow(snr_to_sigma(10.0), 2), 0.1, 1e-12);
  EXPECT_DOUBLE_EQ(snr_to_sigma(0.0), 1.0);
  EXPECT_NEAR(std::pow(snr_to_sigma(20.0), 2), 0.01, 1e-12);
}

TEST(SigmaTest, PsnrConversions) {
  EXPECT_NEAR(psnr_to_sigma(15.0, 1.0), 0.177828, 1e-6);
  EXPECT_NEAR(std::pow(psnr_to_sigma(15.0, 1.0), 2), 0.0316228, 1e-7);
  EXPECT_DOUBLE_EQ(psnr_to_sigma(0.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(psnr_to_sigma(0.0, 2.0), 2.0);
  EXPECT_THROW(psnr_to_sigma(0.0, 0.0), InvalidArgument);
}

TEST(SigmaTest, StrictlyDecreasing) {
  for (double db = -20.0; db < 40.0; db += 2.5) {
    EXPECT_GT(snr_to_sigma(db), snr_to_sigma(db + 0.5));
    EXPECT_GT(psnr_to_sigma(db, 1.0), psnr_to_sigma(db + 0.5, 1.0));
  }
}

TEST(NormalizePowerTest, Examples) {
  const Matrix twos = Matrix::Constant(3, 4, 2.0);
  EXPECT_TRUE(normalize_power(twos).isApprox(Matrix::Ones(3, 4)));
  const Matrix z = unit_power_codes(50, 8, 1);
  EXPECT_NEAR(batch_power(z), 1.0, 1e-12);
  EXPECT_TRUE(normalize_power(z).isApprox(z, 1e-12));
  const Matrix raw = 3.0 * unit_power_codes(20, 5, 2) + Matrix::Constant(20, 5, 0.5);
  const Matrix once = normalize_power(raw);
  EXPECT_NEAR(batch_power(once), 1.0, 1e-6);
  EXPECT_TRUE(normalize_power(once).isApprox(once, 1e-12));
  // One factor for the whole batch: ratios between entries survive.
  EXPECT_NEAR(once(0, 0) / once(3, 2), raw(0, 0) / raw(3, 2), 1e-9);
  EXPECT_THROW(normalize_power(Matrix::Zero(2, 2)), InvalidArgument);
}

TEST(ChannelSpecTest, Validation) {
  ChannelSpec s;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s.snr_db = 10.0;
  EXPECT_NO_THROW(s.validate());
  s.psnr_db = 15.0;
  EXPECT_THROW(s.validate(), InvalidArgument);
  EXPECT_THROW(ChannelSpec::awgn_psnr(15.0, -1.0).validate(), InvalidArgument);
  EXPECT_THROW(parse_channel_kind("rician"), InvalidArgument);
  EXPECT_EQ(parse_channel_kind(to_string(ChannelKind::kRayleigh)), ChannelKind::kRayleigh);
  EXPECT_DOUBLE_EQ(ChannelSpec::noiseless().sigma(), 0.0);
  const ChannelSpec p = ChannelSpec::awgn_psnr(15.0).with_snr(3.0);
  EXPECT_FALSE(p.psnr_db.has_value());
  EXPECT_DOUBLE_EQ(*p.snr_db, 3.0);
}

TEST(TransmitTest, NoiselessIsIdentity) {
  const Matrix z = unit_power_codes(10, 4, 3);
  Rng rng(1);
  EXPECT_EQ(transmit(z, ChannelSpec::noiseless(), rng), z);
  ChannelSpec inf;
  inf.snr_db = std::numeric_limits<double>::infinity();
  EXPECT_EQ(transmit(z, inf, rng), z);
}

TEST(TransmitTest, AwgnNoiseVariance) {
  const Matrix z = unit_power_codes(25000, 4, 4);
  Rng rng(5);
  const Matrix zhat = transmit(z, ChannelSpec::awgn_snr(10.0), rng);
  const double var = (zhat - z).squaredNorm() / static_cast<double>(z.size());
  EXPECT_NEAR(var, 0.1, 0.005);
}

TEST(TransmitTest, PsnrNoiseVariance) {
  const Matrix z = unit_power_codes(25000, 4, 6);
  Rng rng(7);
  const Matrix zhat = transmit(z, ChannelSpec::awgn_psnr(15.0), rng);
  const double var = (zhat - z).squaredNorm() / static_cast<double>(z.size());
  EXPECT_NEAR(var, std::pow(10.0, -1.5), 0.05 * std::pow(10.0, -1.5));
}

TEST(TransmitTest, Deterministic) {
  const Matrix z = unit_power_codes(30, 4, 8);
  Rng a(9), b(9);
  EXPECT_EQ(transmit(z, ChannelSpec::awgn_snr(5.0), a), transmit(z, ChannelSpec::awgn_snr(5.0), b));
  Rng c(9), d(9);
  const auto ray = ChannelSpec::rayleigh_snr(5.0);
  EXPECT_EQ(transmit(z, ray, c), transmit(z, ray, d));
}

TEST(TransmitTest, AwgnIsAdditiveInTheInput) {
  const Matrix z = unit_power_codes(30, 4, 10);
  const Matrix shifted = z.array() + 0.25;
  Rng a(11), b(11);
  const Matrix out_z = transmit(z, ChannelSpec::awgn_snr(10.0), a);
  const Matrix out_s = transmit(shifted, ChannelSpec::awgn_snr(10.0), b);
  EXPECT_NEAR(((out_s - out_z).array() - 0.25).abs().maxCoeff(), 0.0, 1e-12);
}

TEST(TransmitTest, RayleighEqualizedNoiseIsPerExampleScaled) {
  const Matrix z = unit_power_codes(20000, 2, 12);
  Rng rng(13);
  const Matrix zhat = transmit(z, ChannelSpec::rayleigh_snr(10.0, true), rng);
  ASSERT_TRUE(zhat.allFinite());
  // Equalized noise n/h has the same sign structure as AWGN but heavy tails:
  // its median magnitude stays close to the AWGN one.
  std::vector<double> mags;
  for (Eigen::Index i = 0; i < zhat.size(); ++i) mags.push_back(std::abs(zhat.data()[i] - z.data()[i]));
  std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
  EXPECT_GT(mags[mags.size() / 2], 0.5 * 0.6745 * snr_to_sigma(10.0));
}

TEST(TransmitTest, RayleighWithoutEqualizationScalesRows) {
  Matrix z = Matrix::Ones(2000, 3);
  z = normalize_power(z);
  Rng rng(14);
  ChannelSpec s = ChannelSpec::rayleigh_snr(1000.0, false);
  const Matrix zhat = transmit(z, s, rng);
  // Noise is negligible: every row is h * z with one scalar per row, E[h^2] = 1.
  double power = 0.0;
  for (Eigen::Index i = 0; i < zhat.rows(); ++i) {
    EXPECT_NEAR(zhat(i, 0), zhat(i, 2), 1e-6);
    power += zhat(i, 0) * zhat(i, 0);
  }
  EXPECT_NEAR(power / zhat.rows(), 1.0, 0.1);
}

TEST(TransmitTest, TensorPathMatchesMatrixPath) {
  const Matrix z = unit_power_codes(12, 3, 15);
  Rng a(16), b(16);
  const Matrix m = transmit(z, ChannelSpec::awgn_snr(7.0), a);
  const nn::Tensor t = transmit(nn::Tensor::constant(z), ChannelSpec::awgn_snr(7.0), b);
  EXPECT_TRUE(t.value().isApprox(m, 1e-12));
}

}  // namespace
}  // namespace tocomm::channel
