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

#ifndef TOCOMM_TRANSCEIVER_HPP_
#define TOCOMM_TRANSCEIVER_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tocomm/datasets.hpp"
#include "tocomm/layers.hpp"
#include "tocomm/mi.hpp"

namespace tocomm::transceiver {

using nn::Tensor;

enum class EncodeMode { kStochastic, kDeterministic };

// Backbone families: "conv-small" and "mlp-small".
struct EncoderConfig {
  std::string architecture = "mlp-small";
  data::TensorShape input;
  int latent_dim = 16;
  int hidden = 64;
  int conv_channels = 8;
  // Deterministic encoders have no log-variance head (DeepJSCC-style).
  bool stochastic = true;
};

// Per-layer activation modulation: act * scale + shift. Each tensor is 1 x width.
struct FilmParams {
  std::vector<Tensor> scale;
  std::vector<Tensor> shift;
};

class Encoder {
 public:
  struct Output {
    Tensor mu;
    Tensor logvar;  // undefined for deterministic encoders
  };

  static constexpr double kLogvarMin = -10.0;
  static constexpr double kLogvarMax = 10.0;

  Encoder() = default;
  Encoder(EncoderConfig config, Rng& rng);

  // `film`, when given, modulates every designated layer.
  Output forward(const Tensor& x, const FilmParams* film = nullptr) const;

  const EncoderConfig& config() const { return config_; }
  std::string architecture_tag() const { return config_.architecture; }
  int latent_dim() const { return config_.latent_dim; }
  bool stochastic() const { return config_.stochastic; }
  // Widths of the layers a HyperAdapter may modulate, in forward order.
  std::vector<int> film_widths() const;
  nn::ParameterList parameters() const;
  std::size_t parameter_count() const { return parameters().scalar_count(); }

 private:
  EncoderConfig config_;
  std::vector<nn::Conv2d> convs_;
  std::vector<nn::Linear> dense_;
  nn::Linear mu_head_;
  nn::Linear logvar_head_;
};

// z = mu + exp(logvar / 2) * eps in stochastic mode, z = mu otherwise.
struct Encoded {
  Tensor z;
  Tensor mu;
  Tensor logvar;
};
Encoded encode(const Tensor& x, const Encoder& enc, EncodeMode mode, Rng& rng, const FilmParams* film = nullptr);

struct DecoderConfig {
  std::string architecture = "mlp-small";
  int input_dim = 16;
  int classes = 10;
  int hidden = 64;
};

class Decoder {
 public:
  Decoder() = default;
  Decoder(DecoderConfig config, Rng& rng);

  Tensor forward(const Tensor& zhat) const;
  const DecoderConfig& config() const { return config_; }
  nn::ParameterList parameters() const { return net_.parameters(); }
  std::size_t parameter_count() const { return parameters().scalar_count(); }

 private:
  DecoderConfig config_;
  nn::Mlp net_;
  nn::Activation act_ = nn::Activation::kRelu;
};

// Class scores for received codes; throws ShapeError on a dimension mismatch.
Tensor decode(const Tensor& zhat, const Decoder& dec);
Matrix softmax(const Matrix& scores);

struct ModulatorConfig {
  int feature_dim = 16;
  int positions = 8;
  mi::Constellation constellation = mi::Constellation::pam4();
  double temperature = 1.0;
  // Forward hard symbols (straight-through) during training.
  bool hard = false;
};

// Learned assignment of backbone features to constellation symbols.
class Modulator {
 public:
  Modulator() = default;
  Modulator(ModulatorConfig config, Rng& rng);

  // B x (positions * K) symbol scores.
  Tensor scores(const Tensor& features) const;
  const ModulatorConfig& config() const { return config_; }
  // Real dimensions emitted per example (positions, doubled for complex).
  int output_dim() const;
  nn::ParameterList parameters() const { return head_.parameters(); }

 private:
  ModulatorConfig config_;
  nn::Linear head_;
};

struct Modulated {
  Tensor symbols;      // B x output_dim
  Tensor probs;        // (B * positions) x K, softmax(scores / temperature)
  Tensor frequencies;  // 1 x K empirical (hard) symbol frequencies, soft gradient
};

// Soft mode emits sum_k softmax(scores/t)_k * symbol_k per position; hard mode
// the argmax symbol with the soft gradient (straight-through).
Modulated modulate(const Tensor& scores, const mi::Constellation& constellation, int positions,
                   double temperature, bool hard);

struct HyperConfig {
  int hidden = 16;
  double reference_snr_db = 10.0;
};

// Maps the channel SNR to FiLM parameters for the encoder's designated layers.
// The output layer starts at zero, so a fresh adapter is the identity at
// every SNR.
class HyperAdapter {
 public:
  HyperAdapter() = default;
  HyperAdapter(std::vector<int> widths, HyperConfig config, Rng& rng);

  FilmParams generate(double snr_db) const;
  const std::vector<int>& widths() const { return widths_; }
  const HyperConfig& config() const { return config_; }
  nn::ParameterList parameters() const { return net_.parameters(); }

 private:
  std::vector<int> widths_;
  HyperConfig config_;
  nn::Mlp net_;
};

// Encoder view whose designated activations are modulated for one SNR. The
// base encoder's parameters are shared, never copied or modified.
class AdaptedEncoder {
 public:
  AdaptedEncoder(const Encoder& base, const HyperAdapter& adapter, double snr_db);
  Encoder::Output forward(const Tensor& x) const { return base_->forward(x, &film_); }
  const FilmParams& film() const { return film_; }

 private:
  const Encoder* base_;
  FilmParams film_;
};

AdaptedEncoder hyper_adapt(const Encoder& enc, double snr_db, const HyperAdapter& adapter);

enum class TransmissionMode { kAnalog, kRelative, kDigital };

TransmissionMode parse_transmission_mode(const std::string& name);
std::string to_string(TransmissionMode mode);

struct PairConfig {
  std::string name = "pair";
  EncoderConfig encoder;
  DecoderConfig decoder;
  TransmissionMode mode = TransmissionMode::kAnalog;
  std::optional<ModulatorConfig> modulator;
  std::optional<HyperConfig> hyper;
  std::uint64_t seed = 0;
};

// Builds a pair config for one of the families "conv-small", "mlp-small" or
// "mixed" (conv-small encoder, mlp-small decoder).
PairConfig family_config(const std::string& family, data::TensorShape input, int latent_dim, int classes);

// What the transmitter puts on the channel for one batch.
struct TxOutput {
  Tensor mu;
  Tensor logvar;
  Tensor code;  // power-normalized analog/relative code, or modulated symbols
  std::optional<Modulated> modulated;
};

// A transmitter/receiver pair trained together.
class Transceiver {
 public:
  Transceiver() = default;
  Transceiver(PairConfig config, Rng& rng);

  // Copies share parameter tensors; clone() makes an independent deep copy.
  Transceiver clone() const;

  const PairConfig& config() const { return config_; }
  const std::string& name() const { return config_.name; }
  TransmissionMode mode() const { return config_.mode; }

  Encoder& encoder() { return encoder_; }
  const Encoder& encoder() const { return encoder_; }
  Decoder& decoder() { return decoder_; }
  const Decoder& decoder() const { return decoder_; }
  const std::optional<Modulator>& modulator() const { return modulator_; }
  const std::optional<HyperAdapter>& adapter() const { return adapter_; }
  bool has_adapter() const { return adapter_.has_value(); }

  // Raw anchor inputs (k x input size); required in relative mode.
  void set_anchors(Matrix anchor_inputs);
  const Matrix& anchors() const { return anchors_; }

  // Dimension of what crosses the channel.
  int code_dim() const;

  // Transmitter side. `snr_db` conditions the adapter when one is present.
  TxOutput transmit_side(const Tensor& x, EncodeMode mode, Rng& rng, std::optional<double> snr_db = {}) const;
  // Receiver side: class scores for received codes.
  Tensor receive_side(const Tensor& zhat) const { return decoder_.forward(zhat); }

  // Deterministic inference codes (mu, hard symbols), power-normalized.
  Matrix infer_codes(const Matrix& x, std::optional<double> snr_db = {}) const;
  // Deterministic latent mean (no relative/modulation stage, no normalization).
  Matrix latent_means(const Matrix& x, std::optional<double> snr_db = {}) const;

  nn::ParameterList encoder_side_parameters() const;
  nn::ParameterList decoder_side_parameters() const { return decoder_.parameters(); }
  nn::ParameterList parameters() const;

 private:
  PairConfig config_;
  Encoder encoder_;
  Decoder decoder_;
  std::optional<Modulator> modulator_;
  std::optional<HyperAdapter> adapter_;
  Matrix anchors_;
};

}  // namespace tocomm::transceiver

#endif  // TOCOMM_TRANSCEIVER_HPP_
