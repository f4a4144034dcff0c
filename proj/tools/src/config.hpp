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

#ifndef TOCOMM_TOOLS_CONFIG_HPP_
#define TOCOMM_TOOLS_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include "json.hpp"
#include "tocomm/alignment.hpp"
#include "tocomm/channel.hpp"
#include "tocomm/datasets.hpp"
#include "tocomm/training.hpp"
#include "tocomm/transceiver.hpp"

namespace tocomm::cli {

using json = nlohmann::ordered_json;

// The full default document. Every accepted key appears here.
json default_config();

// Overlays `user` onto the defaults. Unknown keys and type mismatches throw
// ConfigError naming the key path (e.g. "channel.snr_db").
json resolve_config(const json& user);

json load_config_file(const std::filesystem::path& path);

// Typed views over a resolved document.
struct Datasets {
  data::Dataset train;
  data::Dataset test;
};
Datasets build_datasets(const json& cfg);

channel::ChannelSpec channel_from(const json& channel_section);
json channel_to_json(const channel::ChannelSpec& spec);

transceiver::PairConfig pair_config_from(const json& cfg, const data::Dataset& train);
training::TrainConfig train_config_from(const json& cfg);
alignment::CrossOptions cross_options_from(const json& cfg);
data::AnchorSet anchors_from(const json& cfg, const data::Dataset& train);

}  // namespace tocomm::cli

#endif  // TOCOMM_TOOLS_CONFIG_HPP_
