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

#ifndef TOCOMM_TRAINING_HPP_
#define TOCOMM_TRAINING_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tocomm/channel.hpp"
#include "tocomm/datasets.hpp"
#include "tocomm/objectives.hpp"
#include "tocomm/transceiver.hpp"

namespace tocomm::training {

enum class Strategy { kLocalPre, kLocalPost, kRemote, kHybrid };
Strategy parse_strategy(const std::string& name);
std::string to_string(Strategy s);

// "ce" trains on the task loss alone (DeepJSCC-style baseline).
enum class ObjectiveKind { kCe, kVib, kIfe, kRib };
ObjectiveKind parse_objective(const std::string& name);
std::string to_string(ObjectiveKind k);

struct TrainConfig {
  Strategy strategy = Strategy::kLocalPre;
  ObjectiveKind objective = ObjectiveKind::kVib;
  int epochs = 10;
  // Hybrid only. Unset values split `epochs` 4:1 between the stages.
  std::optional<int> stage1_epochs;
  std::optional<int> stage2_epochs;
  int batch_size = 64;
  double lr = 1e-3;
  double stage1_lr = 1e-3;
  // Decoupled (AdamW-style) weight decay for the supervised stages.
  double weight_decay = 0.0;
  double beta = 1e-3;
  double lambda_inv = 0.0;
  // IFE: the penalty weight is 1 for this many steps, lambda_inv afterwards.
  int penalty_anneal_steps = 0;
  double tau = 0.5;
  std::size_t mc_samples = 256;
  std::uint64_t seed = 0;
  channel::ChannelSpec channel = channel::ChannelSpec::awgn_snr(10.0);
  // When non-empty each step draws its SNR from this list and conditions the
  // adapter on it.
  std::vector<double> train_snrs;
  // Remote: pass code gradients through a noisy link as well.
  bool noisy_gradients = false;
  // local_post: "decoder" or "encoder".
  std::string transfer_side = "decoder";
  // Stage-1 view transformations: max pixel shift and jitter stddev.
  int view_shift = 1;
  double view_jitter = 0.1;

  void validate() const;
  int resolved_stage1_epochs() const;
  int resolved_stage2_epochs() const;
};

// Scalars exchanged between the transmitter and the receiver side.
struct TrainingLedger {
  std::uint64_t uplink_scalars = 0;
  std::uint64_t downlink_scalars = 0;
  std::uint64_t param_transfer_scalars = 0;
  std::uint64_t steps = 0;

  std::uint64_t exchanged() const { return uplink_scalars + downlink_scalars; }
  std::uint64_t total() const { return exchanged() + param_transfer_scalars; }
  bool operator==(const TrainingLedger&) const = default;
};

struct EpochRecord {
  int stage = 0;
  int epoch = 0;
  std::uint64_t step = 0;
  // Means over the epoch's steps.
  std::vector<std::pair<std::string, double>> components;
  double total = 0.0;
  std::optional<double> accuracy;
  TrainingLedger ledger;
};

struct StepRecord {
  int stage = 0;
  std::uint64_t step = 0;
  std::vector<std::pair<std::string, double>> components;
  double total = 0.0;
  TrainingLedger ledger;
};

struct TrainOptions {
  // Evaluated after every epoch (and every eval_every_steps when > 0).
  const data::Dataset* eval_set = nullptr;
  std::size_t eval_every_steps = 0;
  // Training stops the first time evaluation reaches this accuracy.
  std::optional<double> target_accuracy;
  // Hard limit on optimizer steps per stage (0 = none).
  std::size_t max_steps = 0;
  std::function<void(const EpochRecord&)> on_epoch;
  // Called after each supervised optimizer step.
  std::function<void(const StepRecord&)> on_step;
};

struct TrainResult {
  TrainingLedger ledger;
  std::vector<EpochRecord> history;
  std::optional<double> final_accuracy;
  // Ledger snapshot when target_accuracy was first reached.
  std::optional<TrainingLedger> at_target;
  objectives::LossReport last_report;
};

TrainResult train_local(transceiver::Transceiver& pair, const data::Dataset& data, const TrainConfig& cfg,
                        const TrainOptions& opts = {});
TrainResult train_remote(transceiver::Transceiver& pair, const data::Dataset& data, const TrainConfig& cfg,
                         const TrainOptions& opts = {});
TrainResult train_hybrid(transceiver::Transceiver& pair, const data::Dataset& data, const TrainConfig& cfg,
                         const TrainOptions& opts = {});
// Dispatches on cfg.strategy.
TrainResult train(transceiver::Transceiver& pair, const data::Dataset& data, const TrainConfig& cfg,
                  const TrainOptions& opts = {});

// Self-supervised transmitter-only InfoNCE stage. Returns the mean loss of
// the final epoch.
double pretrain_infonce(transceiver::Transceiver& pair, const data::Dataset& data, const TrainConfig& cfg, int epochs,
                        Rng& rng);

// Two random views of a batch of CHW images: integer shift then pixel jitter.
Matrix random_view(const Matrix& x, const data::TensorShape& shape, int max_shift, double jitter, Rng& rng);

struct EvalOptions {
  // Conditions the adapter; defaults to the channel SNR when one is present.
  std::optional<double> adapter_snr_db;
  // Analog mode: zero pruned latent dimensions before transmission.
  const objectives::PruneMask* mask = nullptr;
};

// Mean 0/1 accuracy over the test set through the channel.
double evaluate(const transceiver::Transceiver& pair, const data::Dataset& testset, const channel::ChannelSpec& spec,
                Rng& rng, const EvalOptions& opts = {});

// Class scores of every test example after the channel.
Matrix receiver_scores(const transceiver::Transceiver& pair, const Matrix& x, const channel::ChannelSpec& spec,
                       Rng& rng, const EvalOptions& opts = {});

struct CurvePoint {
  double snr_db = 0.0;
  double accuracy = 0.0;
};

// One evaluation per SNR with `base` re-parameterized; adapters are
// conditioned on each SNR.
std::vector<CurvePoint> snr_sweep(const transceiver::Transceiver& pair, std::span<const double> snr_list,
                                  const data::Dataset& testset, Rng& rng,
                                  const channel::ChannelSpec& base = channel::ChannelSpec::awgn_snr(0.0));

// Trains a softmax classifier on frozen latent means and reports test accuracy.
double linear_probe(const transceiver::Encoder& enc, const data::Dataset& train_set, const data::Dataset& test_set,
                    int epochs, std::uint64_t seed);

}  // namespace tocomm::training

#endif  // TOCOMM_TRAINING_HPP_
