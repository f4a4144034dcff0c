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

#ifndef TOCOMM_CHANNEL_HPP_
#define TOCOMM_CHANNEL_HPP_

#include <optional>
#include <string>

#include "tocomm/tensor.hpp"

namespace tocomm::channel {

enum class ChannelKind { kAwgn, kRayleigh };

ChannelKind parse_channel_kind(const std::string& name);
std::string to_string(ChannelKind kind);

// Channel family plus its noise parameterization. Exactly one of snr_db and
// psnr_db is set. snr_db = +inf denotes a noiseless link.
struct ChannelSpec {
  ChannelKind kind = ChannelKind::kAwgn;
  std::optional<double> snr_db;
  std::optional<double> psnr_db;
  double peak = 1.0;
  // Rayleigh only: divide by the (perfectly known) fading gain.
  bool equalize = true;

  static ChannelSpec awgn_snr(double snr_db);
  static ChannelSpec awgn_psnr(double psnr_db, double peak = 1.0);
  static ChannelSpec rayleigh_snr(double snr_db, bool equalize = true);
  static ChannelSpec noiseless();

  // Throws InvalidArgument when the invariants do not hold.
  void validate() const;
  double sigma() const;
  // A copy with snr_db replaced (psnr cleared).
  ChannelSpec with_snr(double snr) const;
};

// sigma^2 = 10^(-snr/10), unit signal power.
double snr_to_sigma(double snr_db);
// sigma^2 = peak^2 * 10^(-psnr/10).
double psnr_to_sigma(double psnr_db, double peak);

// Mean of squared entries over the whole batch.
double batch_power(const Matrix& z);

// Scales the batch by one factor so its mean squared entry is 1.
Matrix normalize_power(const Matrix& z);
nn::Tensor normalize_power(const nn::Tensor& z);

// AWGN: z + n. Rayleigh: h z + n with one gain per row, divided by h when
// equalizing. Noise is drawn row by row from `rng` independently of z.
Matrix transmit(const Matrix& z, const ChannelSpec& spec, Rng& rng);
nn::Tensor transmit(const nn::Tensor& z, const ChannelSpec& spec, Rng& rng);

}  // namespace tocomm::channel

#endif  // TOCOMM_CHANNEL_HPP_
