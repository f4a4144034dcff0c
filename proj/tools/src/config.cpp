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

#include "config.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "tocomm/errors.hpp"

namespace tocomm::cli {

namespace {

// Keys whose value may be null in addition to the default's type.
bool nullable(const std::string& path) {
  return path == "channel.snr_db" || path == "channel.psnr_db" || path == "training.stage1_epochs" ||
         path == "training.stage2_epochs" || path == "training.target_accuracy" || path == "output_dir";
}

bool compatible(const json& def, const json& val, const std::string& path) {
  if (val.is_null()) return nullable(path) || def.is_null();
  if (path == "channel.snr_db" || path == "channel.psnr_db") {
    return val.is_number() || (val.is_string() && val.get<std::string>() == "inf");
  }
  if (def.is_null()) return true;
  if (def.is_number()) return val.is_number();
  if (def.is_boolean()) return val.is_boolean();
  if (def.is_string()) return val.is_string();
  if (def.is_array()) return val.is_array();
  if (def.is_object()) return val.is_object();
  return false;
}

void merge(json& into, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError((prefix.empty() ? std::string("config") : prefix) + ": expected an object");
  for (const auto& [key, val] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!into.contains(key)) throw ConfigError("unknown key '" + path + "'");
    json& slot = into[key];
    if (!compatible(slot, val, path)) throw ConfigError("wrong type for key '" + path + "'");
    if (slot.is_object() && val.is_object()) {
      merge(slot, val, path);
    } else {
      slot = val;
    }
  }
}

template <typename T>
T get(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("invalid value for key '") + section + "." + key + "'");
  }
}

std::uint64_t data_seed(const json& cfg) { return get<std::uint64_t>(cfg, "dataset", "seed"); }

data::Dataset digits(const json& d, std::size_t n, std::uint64_t seed) {
  data::DigitOptions o;
  o.size = d.at("image_size").get<int>();
  o.pixel_noise = d.at("pixel_noise").get<double>();
  o.exclude_classes = d.at("exclude_classes").get<std::vector<int>>();
  return data::make_synthetic_digits(n, seed, o);
}

}  // namespace

json default_config() {
  return json::parse(R"({
  "seed": 0,
  "output_dir": null,
  "dataset": {
    "kind": "synthetic-digits",
    "seed": 0,
    "train_size": 5000,
    "test_size": 1000,
    "image_size": 12,
    "pixel_noise": 0.15,
    "exclude_classes": [],
    "env_correlations": [0.9, 0.8],
    "test_correlations": [0.1],
    "label_flip": 0.25,
    "dim": 8,
    "classes": 4,
    "spread": 0.08,
    "train_images": "",
    "train_labels": "",
    "test_images": "",
    "test_labels": "",
    "train_csv": "",
    "test_csv": "",
    "label_column": "y"
  },
  "model": {
    "name": "",
    "family": "mlp-small",
    "latent_dim": 16,
    "stochastic": true,
    "mode": "analog",
    "encoder_hidden": 0,
    "decoder_hidden": 0,
    "constellation": "pam4",
    "positions": 8,
    "temperature": 1.0,
    "hard": true,
    "hyper": false,
    "hyper_hidden": 16,
    "reference_snr_db": 10.0
  },
  "channel": {
    "kind": "awgn",
    "snr_db": 10.0,
    "psnr_db": null,
    "peak": 1.0,
    "equalize": true
  },
  "objective": {
    "kind": "vib",
    "beta": 0.001,
    "lambda_inv": 0.0,
    "penalty_anneal_steps": 0,
    "tau": 0.5,
    "mc_samples": 256
  },
  "training": {
    "strategy": "local_pre",
    "epochs": 10,
    "stage1_epochs": null,
    "stage2_epochs": null,
    "batch_size": 64,
    "lr": 0.001,
    "stage1_lr": 0.001,
    "weight_decay": 0.0,
    "train_snrs": [],
    "noisy_gradients": false,
    "transfer_side": "decoder",
    "target_accuracy": null,
    "eval_every_steps": 0,
    "view_shift": 1,
    "view_jitter": 0.1
  },
  "alignment": {
    "modes": ["none", "receiver-ls"],
    "anchors_k": 64,
    "anchor_strategy": "uniform",
    "anchor_seed": 0,
    "transmissions_per_anchor": 16,
    "ridge": 0.0,
    "learned_steps": 2000,
    "bias": true
  },
  "ood": {
    "score": "rate",
    "kind": "held-out",
    "held_out_classes": [],
    "samples": 1000
  },
  "sweep": {
    "snr_db": [0, 5, 10, 15, 20]
  }
})");
}

json resolve_config(const json& user) {
  json cfg = default_config();
  merge(cfg, user, "");
  // Exactly one of snr_db / psnr_db: a user-provided psnr replaces the default snr.
  const json& ch = user.contains("channel") ? user.at("channel") : json::object();
  if (ch.contains("psnr_db") && !ch.at("psnr_db").is_null() && !ch.contains("snr_db")) cfg["channel"]["snr_db"] = nullptr;
  channel_from(cfg.at("channel"));
  train_config_from(cfg);
  return cfg;
}

json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
}

channel::ChannelSpec channel_from(const json& c) {
  channel::ChannelSpec s;
  try {
    s.kind = channel::parse_channel_kind(c.at("kind").get<std::string>());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("channel.kind: ") + e.what());
  }
  auto db = [](const json& v) -> std::optional<double> {
    if (v.is_null()) return std::nullopt;
    if (v.is_string()) return std::numeric_limits<double>::infinity();
    return v.get<double>();
  };
  s.snr_db = db(c.at("snr_db"));
  s.psnr_db = db(c.at("psnr_db"));
  s.peak = c.at("peak").get<double>();
  s.equalize = c.at("equalize").get<bool>();
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("channel: ") + e.what());
  }
  return s;
}

json channel_to_json(const channel::ChannelSpec& spec) {
  auto db = [](const std::optional<double>& v) -> json {
    if (!v) return nullptr;
    if (std::isinf(*v)) return "inf";
    return *v;
  };
  return {{"kind", channel::to_string(spec.kind)},
          {"snr_db", db(spec.snr_db)},
          {"psnr_db", db(spec.psnr_db)},
          {"peak", spec.peak},
          {"equalize", spec.equalize}};
}

Datasets build_datasets(const json& cfg) {
  const json& d = cfg.at("dataset");
  const std::string kind = d.at("kind").get<std::string>();
  const auto n_train = d.at("train_size").get<std::size_t>();
  const auto n_test = d.at("test_size").get<std::size_t>();
  const std::uint64_t seed = data_seed(cfg);
  try {
    if (kind == "synthetic-digits") {
      return {digits(d, n_train, 2 * seed + 1), digits(d, n_test, 2 * seed + 2)};
    }
    if (kind == "colored-mnist") {
      const auto tr = d.at("env_correlations").get<std::vector<double>>();
      const auto te = d.at("test_correlations").get<std::vector<double>>();
      const double flip = d.at("label_flip").get<double>();
      return {data::make_colored_mnist(digits(d, n_train, 2 * seed + 1), tr, flip, 4 * seed + 3),
              data::make_colored_mnist(digits(d, n_test, 2 * seed + 2), te, flip, 4 * seed + 4)};
    }
    if (kind == "gaussian-mixture") {
      const int dim = d.at("dim").get<int>();
      const int classes = d.at("classes").get<int>();
      const double spread = d.at("spread").get<double>();
      // Same centers for both splits: the centers are drawn first from `seed`.
      data::Dataset all = data::make_gaussian_blobs(n_train + n_test, dim, classes, spread, seed);
      std::vector<std::size_t> tr(n_train), te(n_test);
      for (std::size_t i = 0; i < n_train; ++i) tr[i] = i;
      for (std::size_t i = 0; i < n_test; ++i) te[i] = n_train + i;
      return {all.subset(tr), all.subset(te)};
    }
    if (kind == "idx") {
      return {data::load_idx(d.at("train_images").get<std::string>(), d.at("train_labels").get<std::string>()),
              data::load_idx(d.at("test_images").get<std::string>(), d.at("test_labels").get<std::string>())};
    }
    if (kind == "csv") {
      const std::string label = d.at("label_column").get<std::string>();
      return {data::load_csv(d.at("train_csv").get<std::string>(), label),
              data::load_csv(d.at("test_csv").get<std::string>(), label)};
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
  throw ConfigError("dataset.kind: unknown kind '" + kind + "'");
}

transceiver::PairConfig pair_config_from(const json& cfg, const data::Dataset& train) {
  const json& m = cfg.at("model");
  transceiver::PairConfig pc;
  try {
    pc = transceiver::family_config(m.at("family").get<std::string>(), train.shape(), m.at("latent_dim").get<int>(),
                                    train.class_count());
    pc.mode = transceiver::parse_transmission_mode(m.at("mode").get<std::string>());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  const std::string name = m.at("name").get<std::string>();
  if (!name.empty()) pc.name = name;
  pc.seed = cfg.at("seed").get<std::uint64_t>();
  pc.encoder.stochastic = m.at("stochastic").get<bool>();
  if (m.at("encoder_hidden").get<int>() > 0) pc.encoder.hidden = m.at("encoder_hidden").get<int>();
  if (m.at("decoder_hidden").get<int>() > 0) pc.decoder.hidden = m.at("decoder_hidden").get<int>();
  if (pc.mode == transceiver::TransmissionMode::kDigital) {
    transceiver::ModulatorConfig mc;
    try {
      mc.constellation = mi::Constellation::from_name(m.at("constellation").get<std::string>());
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("model.constellation: ") + e.what());
    }
    mc.positions = m.at("positions").get<int>();
    mc.temperature = m.at("temperature").get<double>();
    mc.hard = m.at("hard").get<bool>();
    if (!(mc.temperature > 0.0)) throw ConfigError("model.temperature must be > 0");
    if (mc.positions < 1) throw ConfigError("model.positions must be >= 1");
    pc.decoder.input_dim = mc.positions * (mc.constellation.is_complex ? 2 : 1);
    pc.modulator = mc;
  } else if (pc.mode == transceiver::TransmissionMode::kRelative) {
    pc.decoder.input_dim = cfg.at("alignment").at("anchors_k").get<int>();
  }
  if (m.at("hyper").get<bool>()) {
    pc.hyper = transceiver::HyperConfig{m.at("hyper_hidden").get<int>(), m.at("reference_snr_db").get<double>()};
  }
  return pc;
}

training::TrainConfig train_config_from(const json& cfg) {
  const json& t = cfg.at("training");
  const json& o = cfg.at("objective");
  training::TrainConfig tc;
  try {
    tc.strategy = training::parse_strategy(t.at("strategy").get<std::string>());
    tc.objective = training::parse_objective(o.at("kind").get<std::string>());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  tc.epochs = t.at("epochs").get<int>();
  if (!t.at("stage1_epochs").is_null()) tc.stage1_epochs = t.at("stage1_epochs").get<int>();
  if (!t.at("stage2_epochs").is_null()) tc.stage2_epochs = t.at("stage2_epochs").get<int>();
  tc.batch_size = t.at("batch_size").get<int>();
  tc.lr = t.at("lr").get<double>();
  tc.stage1_lr = t.at("stage1_lr").get<double>();
  tc.weight_decay = t.at("weight_decay").get<double>();
  tc.train_snrs = t.at("train_snrs").get<std::vector<double>>();
  tc.noisy_gradients = t.at("noisy_gradients").get<bool>();
  tc.transfer_side = t.at("transfer_side").get<std::string>();
  tc.view_shift = t.at("view_shift").get<int>();
  tc.view_jitter = t.at("view_jitter").get<double>();
  tc.beta = o.at("beta").get<double>();
  tc.lambda_inv = o.at("lambda_inv").get<double>();
  tc.penalty_anneal_steps = o.at("penalty_anneal_steps").get<int>();
  tc.tau = o.at("tau").get<double>();
  tc.mc_samples = o.at("mc_samples").get<std::size_t>();
  tc.seed = cfg.at("seed").get<std::uint64_t>();
  tc.channel = channel_from(cfg.at("channel"));
  tc.validate();
  return tc;
}

alignment::CrossOptions cross_options_from(const json& cfg) {
  const json& a = cfg.at("alignment");
  alignment::CrossOptions o;
  o.transmissions_per_anchor = a.at("transmissions_per_anchor").get<int>();
  o.ridge = a.at("ridge").get<double>();
  o.learned_steps = a.at("learned_steps").get<std::size_t>();
  o.bias = a.at("bias").get<bool>();
  if (o.transmissions_per_anchor < 1) throw ConfigError("alignment.transmissions_per_anchor must be >= 1");
  if (!(o.ridge >= 0.0)) throw ConfigError("alignment.ridge must be >= 0");
  return o;
}

data::AnchorSet anchors_from(const json& cfg, const data::Dataset& train) {
  const json& a = cfg.at("alignment");
  try {
    return data::select_anchors(train, a.at("anchors_k").get<std::size_t>(),
                                data::parse_anchor_strategy(a.at("anchor_strategy").get<std::string>()),
                                a.at("anchor_seed").get<std::uint64_t>());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("alignment: ") + e.what());
  }
}

}  // namespace tocomm::cli
