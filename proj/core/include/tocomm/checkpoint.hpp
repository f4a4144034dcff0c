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

#ifndef TOCOMM_CHECKPOINT_HPP_
#define TOCOMM_CHECKPOINT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "tocomm/transceiver.hpp"

namespace tocomm::transceiver {

// A checkpoint is `<stem>.bin` (parameters as little-endian doubles, in
// parameters() order) plus a `<stem>.json` sidecar describing the pair.
// Relative-mode pairs also store their anchor inputs in `<stem>.anchors.bin`.
struct CheckpointInfo {
  std::filesystem::path params;
  std::filesystem::path sidecar;
  std::size_t scalar_count = 0;
  std::uintmax_t bytes = 0;
};

CheckpointInfo save_checkpoint(const Transceiver& pair, const std::filesystem::path& stem);

// Throws FormatError for missing or inconsistent files.
Transceiver load_checkpoint(const std::filesystem::path& stem);

bool checkpoint_exists(const std::filesystem::path& stem);

}  // namespace tocomm::transceiver

#endif  // TOCOMM_CHECKPOINT_HPP_
