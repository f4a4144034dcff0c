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

#include "tocomm/checkpoint.hpp"

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tocomm/errors.hpp"

namespace tocomm::transceiver {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

fs::path with_suffix(const fs::path& stem, const std::string& suffix) {
  return fs::path(stem.string() + suffix);
}

void write_doubles(const fs::path& path, const double* data, std::size_t count) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
  if (!out) throw FormatError("short write to " + path.string());
}

std::vector<double> read_doubles(const fs::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("missing checkpoint file " + path.string());
  const auto bytes = fs::file_size(path);
  if (bytes != expected * sizeof(double)) {
    throw FormatError(path.string() + " holds " + std::to_string(bytes) + " bytes, expected " +
                      std::to_string(expected * sizeof(double)));
  }
  std::vector<double> out(expected);
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  return out;
}

json shape_json(const data::TensorShape& s) { return json::array({s.channels, s.height, s.width}); }

data::TensorShape shape_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()}; }

json constellation_json(const mi::Constellation& c) {
  json points = json::array();
  for (const auto& p : c.points) points.push_back(json::array({p.real(), p.imag()}));
  return {{"points", points}, {"probs", c.probs}, {"complex", c.is_complex}};
}

mi::Constellation constellation_from(const json& j) {
  mi::Constellation c;
  for (const auto& p : j.at("points")) c.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  c.probs = j.at("probs").get<std::vector<double>>();
  c.is_complex = j.at("complex").get<bool>();
  c.validate();
  return c;
}

}  // namespace

bool checkpoint_exists(const fs::path& stem) {
  return fs::exists(with_suffix(stem, ".json")) && fs::exists(with_suffix(stem, ".bin"));
}

CheckpointInfo save_checkpoint(const Transceiver& pair, const fs::path& stem) {
  const PairConfig& c = pair.config();
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  const std::vector<double> flat = pair.parameters().flatten();

  json side;
  side["format"] = "tocomm-checkpoint-1";
  side["name"] = c.name;
  side["architecture_tag"] = pair.encoder().architecture_tag() + "/" + c.decoder.architecture;
  side["d"] = c.encoder.latent_dim;
  side["C"] = c.decoder.classes;
  side["seed"] = c.seed;
  side["mode"] = to_string(c.mode);
  side["encoder"] = {{"architecture", c.encoder.architecture},
                     {"input", shape_json(c.encoder.input)},
                     {"latent_dim", c.encoder.latent_dim},
                     {"hidden", c.encoder.hidden},
                     {"conv_channels", c.encoder.conv_channels},
                     {"stochastic", c.encoder.stochastic}};
  side["decoder"] = {{"architecture", c.decoder.architecture},
                     {"input_dim", c.decoder.input_dim},
                     {"classes", c.decoder.classes},
                     {"hidden", c.decoder.hidden}};
  if (c.modulator) {
    side["constellation"] = constellation_json(c.modulator->constellation);
    side["modulator"] = {{"feature_dim", c.modulator->feature_dim},
                         {"positions", c.modulator->positions},
                         {"temperature", c.modulator->temperature},
                         {"hard", c.modulator->hard}};
  } else {
    side["constellation"] = nullptr;
  }
  if (c.hyper) {
    side["hyper"] = {{"hidden", c.hyper->hidden}, {"reference_snr_db", c.hyper->reference_snr_db}};
  }
  side["parameter_count"] = flat.size();
  side["encoder_side_parameters"] = pair.encoder_side_parameters().scalar_count();
  side["decoder_side_parameters"] = pair.decoder_side_parameters().scalar_count();

  CheckpointInfo info;
  info.params = with_suffix(stem, ".bin");
  info.sidecar = with_suffix(stem, ".json");
  info.scalar_count = flat.size();
  write_doubles(info.params, flat.data(), flat.size());
  info.bytes = fs::file_size(info.params);
  if (pair.mode() == TransmissionMode::kRelative) {
    const Matrix& a = pair.anchors();
    side["anchors"] = {{"rows", a.rows()}, {"cols", a.cols()}};
    // Column-major, as Eigen stores it.
    write_doubles(with_suffix(stem, ".anchors.bin"), a.data(), static_cast<std::size_t>(a.size()));
  }
  std::ofstream out(info.sidecar, std::ios::trunc);
  if (!out) throw FormatError("cannot write " + info.sidecar.string());
  out << side.dump(2) << '\n';
  return info;
}

Transceiver load_checkpoint(const fs::path& stem) {
  const fs::path sidecar = with_suffix(stem, ".json");
  std::ifstream in(sidecar);
  if (!in) throw FormatError("missing checkpoint sidecar " + sidecar.string());
  json side;
  try {
    side = json::parse(in);
    PairConfig c;
    c.name = side.at("name").get<std::string>();
    c.seed = side.at("seed").get<std::uint64_t>();
    c.mode = parse_transmission_mode(side.at("mode").get<std::string>());
    const json& e = side.at("encoder");
    c.encoder.architecture = e.at("architecture").get<std::string>();
    c.encoder.input = shape_from(e.at("input"));
    c.encoder.latent_dim = e.at("latent_dim").get<int>();
    c.encoder.hidden = e.at("hidden").get<int>();
    c.encoder.conv_channels = e.at("conv_channels").get<int>();
    c.encoder.stochastic = e.at("stochastic").get<bool>();
    const json& d = side.at("decoder");
    c.decoder.architecture = d.at("architecture").get<std::string>();
    c.decoder.input_dim = d.at("input_dim").get<int>();
    c.decoder.classes = d.at("classes").get<int>();
    c.decoder.hidden = d.at("hidden").get<int>();
    if (side.contains("modulator")) {
      const json& m = side.at("modulator");
      ModulatorConfig mc;
      mc.feature_dim = m.at("feature_dim").get<int>();
      mc.positions = m.at("positions").get<int>();
      mc.temperature = m.at("temperature").get<double>();
      mc.hard = m.at("hard").get<bool>();
      mc.constellation = constellation_from(side.at("constellation"));
      c.modulator = mc;
    }
    if (side.contains("hyper")) {
      const json& h = side.at("hyper");
      c.hyper = HyperConfig{h.at("hidden").get<int>(), h.at("reference_snr_db").get<double>()};
    }
    Rng scratch(c.seed);
    Transceiver pair(c, scratch);
    const auto count = side.at("parameter_count").get<std::size_t>();
    if (count != pair.parameters().scalar_count()) {
      throw FormatError("checkpoint parameter count " + std::to_string(count) + " does not match the architecture (" +
                        std::to_string(pair.parameters().scalar_count()) + ")");
    }
    pair.parameters().assign(read_doubles(with_suffix(stem, ".bin"), count));
    if (side.contains("anchors")) {
      const auto rows = side["anchors"].at("rows").get<Eigen::Index>();
      const auto cols = side["anchors"].at("cols").get<Eigen::Index>();
      const std::vector<double> raw =
          read_doubles(with_suffix(stem, ".anchors.bin"), static_cast<std::size_t>(rows * cols));
      pair.set_anchors(Eigen::Map<const Matrix>(raw.data(), rows, cols));
    }
    return pair;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError("malformed checkpoint sidecar " + sidecar.string() + ": " + ex.what());
  }
}

}  // namespace tocomm::transceiver
