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

#include "tocomm/transceiver.hpp"

#include <cmath>

#include "tocomm/alignment.hpp"
#include "tocomm/channel.hpp"
#include "tocomm/errors.hpp"

namespace tocomm::transceiver {

Encoder::Encoder(EncoderConfig config, Rng& rng) : config_(std::move(config)) {
  if (config_.latent_dim < 1) throw InvalidArgument("encoder latent_dim must be >= 1");
  if (config_.hidden < 1) throw InvalidArgument("encoder hidden width must be >= 1");
  const data::TensorShape in = config_.input;
  if (in.size() < 1) throw InvalidArgument("encoder input shape is empty");
  if (config_.architecture == "conv-small") {
    if (in.height < 4 || in.width < 4) throw ShapeError("conv-small needs inputs of at least 4x4");
    nn::ConvGeometry g1{in.channels, in.height, in.width, config_.conv_channels, 3, 2, 1};
    nn::ConvGeometry g2{config_.conv_channels, g1.out_height(), g1.out_width(), 2 * config_.conv_channels, 3, 2, 1};
    convs_.emplace_back(g1, rng);
    convs_.emplace_back(g2, rng);
    dense_.emplace_back(g2.out_size(), config_.hidden, rng);
  } else if (config_.architecture == "mlp-small") {
    dense_.emplace_back(in.size(), config_.hidden, rng);
    dense_.emplace_back(config_.hidden, config_.hidden, rng);
  } else {
    throw InvalidArgument("unknown encoder architecture '" + config_.architecture + "'");
  }
  mu_head_ = nn::Linear(config_.hidden, config_.latent_dim, rng);
  if (config_.stochastic) logvar_head_ = nn::Linear(config_.hidden, config_.latent_dim, rng);
}

std::vector<int> Encoder::film_widths() const { return std::vector<int>(dense_.size(), config_.hidden); }

Encoder::Output Encoder::forward(const Tensor& x, const FilmParams* film) const {
  if (x.cols() != config_.input.size()) {
    throw ShapeError("encoder input has " + std::to_string(x.cols()) + " features, expected " +
                     std::to_string(config_.input.size()));
  }
  if (film && (film->scale.size() != dense_.size() || film->shift.size() != dense_.size())) {
    throw ShapeError("adapter/encoder layer count mismatch");
  }
  Tensor h = x;
  for (const nn::Conv2d& c : convs_) h = nn::relu(c.forward(h));
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    h = nn::relu(dense_[i].forward(h));
    if (film) {
      if (film->scale[i].cols() != h.cols() || film->shift[i].cols() != h.cols()) {
        throw ShapeError("adapter/encoder layer width mismatch");
      }
      h = nn::add_row(nn::mul_row(h, film->scale[i]), film->shift[i]);
    }
  }
  Output out;
  out.mu = mu_head_.forward(h);
  if (config_.stochastic) {
    out.logvar = nn::clamp(logvar_head_.forward(h), kLogvarMin, kLogvarMax);
  }
  return out;
}

nn::ParameterList Encoder::parameters() const {
  nn::ParameterList p;
  for (const nn::Conv2d& c : convs_) p.append(c.parameters());
  for (const nn::Linear& l : dense_) p.append(l.parameters());
  p.append(mu_head_.parameters());
  if (config_.stochastic) p.append(logvar_head_.parameters());
  return p;
}

Encoded encode(const Tensor& x, const Encoder& enc, EncodeMode mode, Rng& rng, const FilmParams* film) {
  Encoder::Output o = enc.forward(x, film);
  Encoded e{o.mu, o.mu, o.logvar};
  if (mode == EncodeMode::kStochastic) {
    if (!enc.stochastic()) throw ModeError("stochastic encoding requested from a deterministic encoder");
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix eps(o.mu.rows(), o.mu.cols());
    for (Eigen::Index r = 0; r < eps.rows(); ++r) {
      for (Eigen::Index c = 0; c < eps.cols(); ++c) eps(r, c) = normal(rng);
    }
    Tensor stddev = nn::exp(nn::scale(o.logvar, 0.5));
    e.z = nn::add(o.mu, nn::mul(stddev, Tensor::constant(std::move(eps))));
  }
  return e;
}

Decoder::Decoder(DecoderConfig config, Rng& rng) : config_(std::move(config)) {
  if (config_.input_dim < 1 || config_.classes < 2) throw InvalidArgument("decoder needs input_dim >= 1, classes >= 2");
  if (config_.architecture == "conv-small") {
    net_ = nn::Mlp({config_.input_dim, config_.hidden, config_.hidden, config_.classes}, nn::Activation::kRelu, rng);
  } else if (config_.architecture == "mlp-small") {
    net_ = nn::Mlp({config_.input_dim, config_.hidden, config_.classes}, nn::Activation::kTanh, rng);
  } else if (config_.architecture == "linear") {
    net_ = nn::Mlp({config_.input_dim, config_.classes}, nn::Activation::kRelu, rng);
  } else {
    throw InvalidArgument("unknown decoder architecture '" + config_.architecture + "'");
  }
}

Tensor Decoder::forward(const Tensor& zhat) const {
  if (zhat.cols() != config_.input_dim) {
    throw ShapeError("decoder expects " + std::to_string(config_.input_dim) + "-dimensional codes, got " +
                     std::to_string(zhat.cols()));
  }
  return net_.forward(zhat);
}

Tensor decode(const Tensor& zhat, const Decoder& dec) { return dec.forward(zhat); }

Matrix softmax(const Matrix& scores) { return nn::softmax_rows(Tensor::constant(scores)).value(); }

Modulator::Modulator(ModulatorConfig config, Rng& rng) : config_(std::move(config)) {
  config_.constellation.validate();
  if (config_.constellation.size() < 2) throw InvalidArgument("modulator constellation needs >= 2 symbols");
  if (!(config_.temperature > 0.0)) throw InvalidArgument("modulator temperature must be > 0");
  if (config_.positions < 1) throw InvalidArgument("modulator positions must be >= 1");
  head_ = nn::Linear(config_.feature_dim, config_.positions * static_cast<int>(config_.constellation.size()), rng);
}

Tensor Modulator::scores(const Tensor& features) const { return head_.forward(features); }

int Modulator::output_dim() const { return config_.positions * (config_.constellation.is_complex ? 2 : 1); }

Modulated modulate(const Tensor& scores, const mi::Constellation& c, int positions, double temperature, bool hard) {
  if (!(temperature > 0.0)) throw InvalidArgument("modulate: temperature must be > 0");
  const auto k = static_cast<Eigen::Index>(c.size());
  if (k < 1 || scores.cols() != positions * k) {
    throw ShapeError("modulate: scores must be B x (positions * constellation size)");
  }
  const Eigen::Index batch = scores.rows();
  Tensor per_pos = nn::reshape_rowmajor(scores, batch * positions, k);
  Tensor probs = nn::softmax_rows(nn::scale(per_pos, 1.0 / temperature));
  Matrix onehot = Matrix::Zero(batch * positions, k);
  for (Eigen::Index r = 0; r < onehot.rows(); ++r) {
    Eigen::Index best = 0;
    per_pos.value().row(r).maxCoeff(&best);
    onehot(r, best) = 1.0;
  }
  Tensor st = nn::straight_through(onehot, probs);
  Tensor weights = hard ? st : probs;

  Matrix re(k, 1);
  Matrix im(k, 1);
  for (Eigen::Index j = 0; j < k; ++j) {
    re(j, 0) = c.points[static_cast<std::size_t>(j)].real();
    im(j, 0) = c.points[static_cast<std::size_t>(j)].imag();
  }
  Tensor sym = nn::matmul(weights, Tensor::constant(re));
  if (c.is_complex) sym = nn::concat_cols(sym, nn::matmul(weights, Tensor::constant(im)));
  const Eigen::Index per_example = positions * (c.is_complex ? 2 : 1);
  return Modulated{nn::reshape_rowmajor(sym, batch, per_example), probs, nn::col_means(st)};
}

HyperAdapter::HyperAdapter(std::vector<int> widths, HyperConfig config, Rng& rng)
    : widths_(std::move(widths)), config_(config) {
  int total = 0;
  for (int w : widths_) total += 2 * w;
  if (total == 0) throw InvalidArgument("hyper adapter needs at least one designated layer");
  net_ = nn::Mlp({1, config_.hidden, total}, nn::Activation::kTanh, rng);
  nn::Linear& out = net_.layers().back();
  out.weight().mutable_value().setZero();
  out.bias().mutable_value().setZero();
}

FilmParams HyperAdapter::generate(double snr_db) const {
  if (!std::isfinite(snr_db)) throw InvalidArgument("hyper adapter needs a finite SNR");
  Matrix t(1, 1);
  t(0, 0) = (snr_db - config_.reference_snr_db) / 10.0;
  Tensor out = net_.forward(Tensor::constant(t));
  FilmParams f;
  Eigen::Index offset = 0;
  for (int w : widths_) {
    f.scale.push_back(nn::add_scalar(nn::slice_cols(out, offset, w), 1.0));
    offset += w;
    f.shift.push_back(nn::slice_cols(out, offset, w));
    offset += w;
  }
  return f;
}

AdaptedEncoder::AdaptedEncoder(const Encoder& base, const HyperAdapter& adapter, double snr_db)
    : base_(&base), film_(adapter.generate(snr_db)) {
  if (adapter.widths() != base.film_widths()) throw ShapeError("adapter/encoder layer-shape mismatch");
}

AdaptedEncoder hyper_adapt(const Encoder& enc, double snr_db, const HyperAdapter& adapter) {
  return AdaptedEncoder(enc, adapter, snr_db);
}

TransmissionMode parse_transmission_mode(const std::string& name) {
  if (name == "analog") return TransmissionMode::kAnalog;
  if (name == "relative") return TransmissionMode::kRelative;
  if (name == "digital") return TransmissionMode::kDigital;
  throw InvalidArgument("unknown transmission mode '" + name + "'");
}

std::string to_string(TransmissionMode mode) {
  switch (mode) {
    case TransmissionMode::kAnalog:
      return "analog";
    case TransmissionMode::kRelative:
      return "relative";
    case TransmissionMode::kDigital:
      return "digital";
  }
  return "unknown";
}

PairConfig family_config(const std::string& family, data::TensorShape input, int latent_dim, int classes) {
  PairConfig c;
  c.name = family;
  c.encoder.input = input;
  c.encoder.latent_dim = latent_dim;
  c.decoder.input_dim = latent_dim;
  c.decoder.classes = classes;
  if (family == "conv-small") {
    c.encoder.architecture = "conv-small";
    c.decoder.architecture = "conv-small";
  } else if (family == "mlp-small") {
    c.encoder.architecture = "mlp-small";
    c.encoder.hidden = 128;
    c.decoder.architecture = "mlp-small";
  } else if (family == "mixed") {
    c.encoder.architecture = "conv-small";
    c.decoder.architecture = "mlp-small";
  } else {
    throw InvalidArgument("unknown model family '" + family + "'");
  }
  return c;
}

Transceiver::Transceiver(PairConfig config, Rng& rng) : config_(std::move(config)) {
  encoder_ = Encoder(config_.encoder, rng);
  if (config_.mode == TransmissionMode::kDigital) {
    if (!config_.modulator) throw ConfigError("digital transmission needs a modulator config");
    config_.modulator->feature_dim = config_.encoder.latent_dim;
    modulator_ = Modulator(*config_.modulator, rng);
    if (config_.decoder.input_dim != modulator_->output_dim()) {
      throw ShapeError("decoder input_dim must equal the modulator output dimension");
    }
  } else if (config_.mode == TransmissionMode::kAnalog && config_.decoder.input_dim != config_.encoder.latent_dim) {
    throw ShapeError("decoder input_dim must equal the encoder latent_dim in analog mode");
  }
  decoder_ = Decoder(config_.decoder, rng);
  if (config_.hyper) adapter_ = HyperAdapter(encoder_.film_widths(), *config_.hyper, rng);
}

Transceiver Transceiver::clone() const {
  Rng scratch(0);
  Transceiver copy(config_, scratch);
  copy.parameters().assign(parameters().flatten());
  copy.anchors_ = anchors_;
  return copy;
}

void Transceiver::set_anchors(Matrix anchor_inputs) {
  if (anchor_inputs.cols() != config_.encoder.input.size()) throw ShapeError("anchor inputs have the wrong width");
  if (anchor_inputs.rows() < 2) throw InvalidArgument("relative mode needs at least 2 anchors");
  if (config_.mode == TransmissionMode::kRelative && anchor_inputs.rows() != config_.decoder.input_dim) {
    throw ShapeError("relative mode: anchor count must equal decoder input_dim");
  }
  anchors_ = std::move(anchor_inputs);
}

int Transceiver::code_dim() const {
  switch (config_.mode) {
    case TransmissionMode::kAnalog:
      return config_.encoder.latent_dim;
    case TransmissionMode::kRelative:
      return config_.decoder.input_dim;
    case TransmissionMode::kDigital:
      return modulator_->output_dim();
  }
  return 0;
}

TxOutput Transceiver::transmit_side(const Tensor& x, EncodeMode mode, Rng& rng, std::optional<double> snr_db) const {
  FilmParams film;
  const FilmParams* film_ptr = nullptr;
  if (adapter_) {
    film = adapter_->generate(snr_db.value_or(adapter_->config().reference_snr_db));
    film_ptr = &film;
  }
  Encoded e = encode(x, encoder_, mode, rng, film_ptr);
  TxOutput out{e.mu, e.logvar, {}, std::nullopt};
  switch (config_.mode) {
    case TransmissionMode::kAnalog:
      out.code = channel::normalize_power(e.z);
      break;
    case TransmissionMode::kRelative: {
      if (anchors_.rows() == 0) throw ConfigError("relative mode used before anchors were set");
      Tensor anchor_feats = encoder_.forward(Tensor::constant(anchors_), film_ptr).mu;
      out.code = channel::normalize_power(alignment::relative_encode(e.z, anchor_feats));
      break;
    }
    case TransmissionMode::kDigital: {
      const ModulatorConfig& mc = modulator_->config();
      const bool hard = mode == EncodeMode::kDeterministic || mc.hard;
      out.modulated = modulate(modulator_->scores(e.z), mc.constellation, mc.positions, mc.temperature, hard);
      out.code = out.modulated->symbols;
      break;
    }
  }
  return out;
}

Matrix Transceiver::infer_codes(const Matrix& x, std::optional<double> snr_db) const {
  Rng unused(0);
  return transmit_side(Tensor::constant(x), EncodeMode::kDeterministic, unused, snr_db).code.value();
}

Matrix Transceiver::latent_means(const Matrix& x, std::optional<double> snr_db) const {
  FilmParams film;
  const FilmParams* film_ptr = nullptr;
  if (adapter_) {
    film = adapter_->generate(snr_db.value_or(adapter_->config().reference_snr_db));
    film_ptr = &film;
  }
  return encoder_.forward(Tensor::constant(x), film_ptr).mu.value();
}

nn::ParameterList Transceiver::encoder_side_parameters() const {
  nn::ParameterList p = encoder_.parameters();
  if (modulator_) p.append(modulator_->parameters());
  if (adapter_) p.append(adapter_->parameters());
  return p;
}

nn::ParameterList Transceiver::parameters() const {
  nn::ParameterList p = encoder_side_parameters();
  p.append(decoder_.parameters());
  return p;
}

}  // namespace tocomm::transceiver
