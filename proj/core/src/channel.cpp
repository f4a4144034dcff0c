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

#include "tocomm/errors.hpp"

namespace tocomm::channel {

namespace {

struct Draw {
  Matrix noise;  // already scaled by sigma
  Vector gain;   // per-row fading gain (ones for AWGN)
};

Draw draw_channel(Eigen::Index rows, Eigen::Index cols, const ChannelSpec& spec, Rng& rng) {
  spec.validate();
  const double sigma = spec.sigma();
  std::normal_distribution<double> normal(0.0, 1.0);
  Draw d{Matrix(rows, cols), Vector::Ones(rows)};
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (spec.kind == ChannelKind::kRayleigh) {
      // |h| ~ Rayleigh(1/sqrt(2)), so E[h^2] = 1.
      const double a = normal(rng) / std::sqrt(2.0);
      const double b = normal(rng) / std::sqrt(2.0);
      d.gain(r) = std::max(std::sqrt(a * a + b * b), 1e-12);
    }
    for (Eigen::Index c = 0; c < cols; ++c) d.noise(r, c) = sigma * normal(rng);
  }
  return d;
}

}  // namespace

ChannelKind parse_channel_kind(const std::string& name) {
  if (name == "awgn") return ChannelKind::kAwgn;
  if (name == "rayleigh") return ChannelKind::kRayleigh;
  throw InvalidArgument("unsupported channel kind '" + name + "'");
}

std::string to_string(ChannelKind kind) { return kind == ChannelKind::kAwgn ? "awgn" : "rayleigh"; }

ChannelSpec ChannelSpec::awgn_snr(double snr_db) {
  ChannelSpec s;
  s.snr_db = snr_db;
  return s;
}

ChannelSpec ChannelSpec::awgn_psnr(double psnr_db, double peak) {
  ChannelSpec s;
  s.psnr_db = psnr_db;
  s.peak = peak;
  return s;
}

ChannelSpec ChannelSpec::rayleigh_snr(double snr_db, bool equalize) {
  ChannelSpec s;
  s.kind = ChannelKind::kRayleigh;
  s.snr_db = snr_db;
  s.equalize = equalize;
  return s;
}

ChannelSpec ChannelSpec::noiseless() { return awgn_snr(std::numeric_limits<double>::infinity()); }

void ChannelSpec::validate() const {
  if (snr_db.has_value() == psnr_db.has_value()) {
    throw InvalidArgument("channel: exactly one of snr_db / psnr_db must be set");
  }
  if (!(peak > 0.0)) throw InvalidArgument("channel: peak must be > 0");
  const double db = snr_db ? *snr_db : *psnr_db;
  if (std::isnan(db)) throw InvalidArgument("channel: dB value is NaN");
}

double ChannelSpec::sigma() const {
  return snr_db ? snr_to_sigma(*snr_db) : psnr_to_sigma(*psnr_db, peak);
}

ChannelSpec ChannelSpec::with_snr(double snr) const {
  ChannelSpec s = *this;
  s.snr_db = snr;
  s.psnr_db.reset();
  return s;
}

double snr_to_sigma(double snr_db) { return std::sqrt(std::pow(10.0, -snr_db / 10.0)); }

double psnr_to_sigma(double psnr_db, double peak) {
  if (!(peak > 0.0)) throw InvalidArgument("psnr_to_sigma: peak must be > 0");
  return peak * std::sqrt(std::pow(10.0, -psnr_db / 10.0));
}

double batch_power(const Matrix& z) {
  if (z.size() == 0) return 0.0;
  return z.squaredNorm() / static_cast<double>(z.size());
}

Matrix normalize_power(const Matrix& z) {
  const double p = batch_power(z);
  if (!(p > 0.0)) throw InvalidArgument("normalize_power: degenerate (all-zero) batch");
  return z / std::sqrt(p);
}

nn::Tensor normalize_power(const nn::Tensor& z) {
  const double n = static_cast<double>(z.value().size());
  const double p = batch_power(z.value());
  if (!(p > 0.0)) throw InvalidArgument("normalize_power: degenerate (all-zero) batch");
  const double s = std::sqrt(p);
  return nn::make_result(z.value() / s, {z}, [z, s, n](const Matrix& g) {
    const double dot = g.cwiseProduct(z.value()).sum();
    nn::accumulate_grad(z, g / s - z.value() * (dot / (n * s * s * s)));
  });
}

Matrix transmit(const Matrix& z, const ChannelSpec& spec, Rng& rng) {
  return transmit(nn::Tensor::constant(z), spec, rng).value();
}

nn::Tensor transmit(const nn::Tensor& z, const ChannelSpec& spec, Rng& rng) {
  Draw d = draw_channel(z.rows(), z.cols(), spec, rng);
  if (spec.kind == ChannelKind::kAwgn) return nn::add(z, nn::Tensor::constant(d.noise));
  Matrix col = spec.equalize ? Matrix::Ones(z.rows(), 1) : Matrix(d.gain);
  Matrix noise = spec.equalize ? Matrix(d.noise.array().colwise() / d.gain.array()) : d.noise;
  // Equalized output h z / h + n / h reduces to z + n / h.
  return nn::add(nn::mul_col(z, nn::Tensor::constant(col)), nn::Tensor::constant(noise));
}

}  // namespace tocomm::channel
