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

#include "tocomm/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tocomm/errors.hpp"
#include "tocomm/layers.hpp"
#include "tocomm/mi.hpp"

namespace tocomm::training {

using nn::Tensor;
using transceiver::EncodeMode;
using transceiver::Transceiver;
using transceiver::TransmissionMode;

namespace {

constexpr Eigen::Index kEvalChunk = 500;
constexpr std::uint64_t kEvalSeedSalt = 0x5eedf00dULL;

struct Batch {
  Matrix x;
  std::vector<int> y;
  // Row ranges [begin, end) of each environment (IFE only).
  std::vector<std::pair<Eigen::Index, Eigen::Index>> env_rows;
};

// Per-epoch lists of example indices, one list per step.
std::vector<std::vector<std::size_t>> plan_epoch(const data::Dataset& data, const TrainConfig& cfg, Rng& rng,
                                                 std::vector<std::vector<std::pair<std::size_t, std::size_t>>>* env_split) {
  const auto b = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::vector<std::size_t>> steps;
  if (cfg.objective != ObjectiveKind::kIfe) {
    const std::vector<std::size_t> order = data::shuffled_indices(data.size(), rng);
    for (std::size_t lo = 0; lo < order.size(); lo += b) {
      steps.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(lo),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), lo + b)));
    }
    return steps;
  }
  // One minibatch from every environment per step; the smallest environment
  // sets the epoch length.
  std::vector<std::vector<std::size_t>> by_env(static_cast<std::size_t>(data.env_count()));
  for (std::size_t i = 0; i < data.size(); ++i) by_env[static_cast<std::size_t>(data[i].d)].push_back(i);
  std::size_t shortest = std::numeric_limits<std::size_t>::max();
  for (auto& e : by_env) {
    std::vector<std::size_t> perm = data::shuffled_indices(e.size(), rng);
    std::vector<std::size_t> shuffled(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) shuffled[i] = e[perm[i]];
    e = std::move(shuffled);
    shortest = std::min(shortest, e.size());
  }
  env_split->clear();
  for (std::size_t lo = 0; lo < shortest; lo += b) {
    const std::size_t hi = std::min(shortest, lo + b);
    std::vector<std::size_t> idx;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (const auto& e : by_env) {
      ranges.emplace_back(idx.size(), idx.size() + (hi - lo));
      idx.insert(idx.end(), e.begin() + static_cast<std::ptrdiff_t>(lo), e.begin() + static_cast<std::ptrdiff_t>(hi));
    }
    steps.push_back(std::move(idx));
    env_split->push_back(std::move(ranges));
  }
  return steps;
}

Tensor take_rows(const Tensor& t, Eigen::Index lo, Eigen::Index hi) { return nn::slice_rows(t, lo, hi - lo); }

objectives::LossReport objective_loss(const TrainConfig& cfg, const Tensor& scores, const Batch& batch,
                                      const transceiver::TxOutput& tx, const Transceiver& pair,
                                      const channel::ChannelSpec& spec, std::uint64_t step, Rng& rng) {
  switch (cfg.objective) {
    case ObjectiveKind::kCe: {
      objectives::LossReport r;
      r.loss = nn::cross_entropy(scores, batch.y);
      r.total = r.loss.item();
      r.components = {{"task_ce", r.total}};
      r.weights = {{"task_ce", 1.0}};
      return r;
    }
    case ObjectiveKind::kVib:
      return objectives::vib_loss(scores, batch.y, tx.mu, tx.logvar, cfg.beta);
    case ObjectiveKind::kIfe: {
      std::vector<objectives::EnvBatch> envs;
      for (const auto& [lo, hi] : batch.env_rows) {
        envs.push_back({take_rows(scores, lo, hi),
                        std::vector<int>(batch.y.begin() + lo, batch.y.begin() + hi),
                        take_rows(tx.mu, lo, hi),
                        tx.logvar.defined() ? take_rows(tx.logvar, lo, hi) : Tensor()});
      }
      const double lambda = static_cast<std::int64_t>(step) < cfg.penalty_anneal_steps ? 1.0 : cfg.lambda_inv;
      return objectives::ife_loss(envs, cfg.beta, lambda);
    }
    case ObjectiveKind::kRib:
      if (!pair.modulator()) throw ModeError("rib objective needs digital transmission");
      return objectives::rib_loss(scores, batch.y, tx.modulated, pair.modulator()->config().constellation, spec,
                                  cfg.beta, cfg.mc_samples, rng);
  }
  throw InvalidArgument("unknown objective");
}

std::optional<double> adapter_snr_for(const Transceiver& pair, const channel::ChannelSpec& spec) {
  if (!pair.has_adapter()) return std::nullopt;
  if (spec.snr_db && std::isfinite(*spec.snr_db)) return *spec.snr_db;
  return std::nullopt;
}

// One optimizer step. In remote mode the receiver works on a detached copy of
// the received code and the code gradient is sent back to the transmitter.
objectives::LossReport supervised_step(Transceiver& pair, const Batch& batch, const TrainConfig& cfg, bool remote,
                                       std::uint64_t step, Rng& rng, TrainingLedger& ledger) {
  channel::ChannelSpec spec = cfg.channel;
  std::optional<double> snr;
  if (!cfg.train_snrs.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, cfg.train_snrs.size() - 1);
    spec = spec.with_snr(cfg.train_snrs[pick(rng)]);
  }
  snr = adapter_snr_for(pair, spec);
  const EncodeMode mode = pair.encoder().stochastic() ? EncodeMode::kStochastic : EncodeMode::kDeterministic;
  transceiver::TxOutput tx = pair.transmit_side(Tensor::constant(batch.x), mode, rng, snr);
  Tensor rx_in = remote ? Tensor::parameter(tx.code.value()) : tx.code;
  Tensor received = channel::transmit(rx_in, spec, rng);
  Tensor scores = pair.receive_side(received);
  objectives::LossReport rep = objective_loss(cfg, scores, batch, tx, pair, spec, step, rng);
  if (!std::isfinite(rep.total)) throw TrainingFailure("loss became non-finite", step);

  Tensor target = rep.loss;
  if (cfg.objective == ObjectiveKind::kIfe) {
    const double lambda = rep.weight("penalty");
    if (lambda > 1.0) target = nn::scale(target, 1.0 / lambda);
  }
  // Only the receiver-side terms flow into rx_in; rate terms reach the
  // encoder directly since they are computed at the transmitter.
  target.backward();
  if (remote) {
    Matrix g = rx_in.grad();
    if (cfg.noisy_gradients) {
      const double rms = std::sqrt(channel::batch_power(g));
      g += rms * (channel::transmit(Matrix::Zero(g.rows(), g.cols()), spec, rng));
    }
    tx.code.backward(g);
    ledger.uplink_scalars += static_cast<std::uint64_t>(tx.code.value().size());
    ledger.downlink_scalars += static_cast<std::uint64_t>(g.size());
  }
  ledger.steps += 1;
  return rep;
}

double eval_now(const Transceiver& pair, const data::Dataset& eval_set, const TrainConfig& cfg) {
  Rng eval_rng(cfg.seed ^ kEvalSeedSalt);
  return evaluate(pair, eval_set, cfg.channel, eval_rng);
}

struct Accumulator {
  std::vector<std::pair<std::string, double>> sums;
  double total = 0.0;
  std::size_t n = 0;

  void add(const objectives::LossReport& r) {
    if (sums.empty()) {
      for (const auto& [k, v] : r.components) sums.emplace_back(k, 0.0);
    }
    for (std::size_t i = 0; i < sums.size() && i < r.components.size(); ++i) sums[i].second += r.components[i].second;
    total += r.total;
    ++n;
  }
  std::vector<std::pair<std::string, double>> means() const {
    auto out = sums;
    for (auto& [k, v] : out) v /= static_cast<double>(std::max<std::size_t>(n, 1));
    return out;
  }
};

// Supervised end-to-end loop shared by local, remote and hybrid stage 2.
void run_supervised(Transceiver& pair, const data::Dataset& data, const TrainConfig& cfg, const TrainOptions& opts,
                    bool remote, int stage, int epochs, Rng& rng, TrainResult& result) {
  std::vector<nn::Adam> opts_list;
  if (remote) {
    opts_list.emplace_back(pair.encoder_side_parameters(), nn::Adam::Options{.lr = cfg.lr, .weight_decay = cfg.weight_decay});
    opts_list.emplace_back(pair.decoder_side_parameters(), nn::Adam::Options{.lr = cfg.lr, .weight_decay = cfg.weight_decay});
  } else {
    opts_list.emplace_back(pair.parameters(), nn::Adam::Options{.lr = cfg.lr, .weight_decay = cfg.weight_decay});
  }
  const Matrix all_x = data.all_inputs();
  const std::vector<int> all_y = data.all_labels();
  std::uint64_t stage_steps = 0;
  bool stop = false;

  auto check_target = [&](double acc) {
    result.final_accuracy = acc;
    if (opts.target_accuracy && !result.at_target && acc >= *opts.target_accuracy) {
      result.at_target = result.ledger;
      stop = true;
    }
  };

  for (int epoch = 0; epoch < epochs && !stop; ++epoch) {
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> env_split;
    const auto plan = plan_epoch(data, cfg, rng, &env_split);
    Accumulator acc;
    for (std::size_t s = 0; s < plan.size() && !stop; ++s) {
      Batch batch;
      batch.x.resize(static_cast<Eigen::Index>(plan[s].size()), all_x.cols());
      for (std::size_t i = 0; i < plan[s].size(); ++i) {
        batch.x.row(static_cast<Eigen::Index>(i)) = all_x.row(static_cast<Eigen::Index>(plan[s][i]));
        batch.y.push_back(all_y[plan[s][i]]);
      }
      if (!env_split.empty()) {
        for (const auto& [lo, hi] : env_split[s]) {
          batch.env_rows.emplace_back(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi));
        }
      }
      result.last_report = supervised_step(pair, batch, cfg, remote, result.ledger.steps, rng, result.ledger);
      for (nn::Adam& o : opts_list) o.step();
      acc.add(result.last_report);
      ++stage_steps;
      if (opts.on_step) {
        opts.on_step(StepRecord{.stage = stage,
                                .step = result.ledger.steps,
                                .components = result.last_report.components,
                                .total = result.last_report.total,
                                .ledger = result.ledger});
      }
      if (opts.eval_set && opts.eval_every_steps > 0 && stage_steps % opts.eval_every_steps == 0) {
        check_target(eval_now(pair, *opts.eval_set, cfg));
      }
      if (opts.max_steps > 0 && stage_steps >= opts.max_steps) stop = true;
    }
    EpochRecord rec;
    rec.stage = stage;
    rec.epoch = epoch;
    rec.step = result.ledger.steps;
    rec.components = acc.means();
    rec.total = acc.total / static_cast<double>(std::max<std::size_t>(acc.n, 1));
    if (opts.eval_set) {
      const bool fresh = opts.eval_every_steps > 0 && stage_steps % opts.eval_every_steps == 0;
      if (!fresh) check_target(eval_now(pair, *opts.eval_set, cfg));
      rec.accuracy = result.final_accuracy;
    }
    rec.ledger = result.ledger;
    result.history.push_back(rec);
    if (opts.on_epoch) opts.on_epoch(rec);
  }
}

void require_strategy(const TrainConfig& cfg, std::initializer_list<Strategy> allowed, const char* fn) {
  for (Strategy s : allowed) {
    if (cfg.strategy == s) return;
  }
  throw ConfigError(std::string(fn) + ": strategy '" + to_string(cfg.strategy) + "' not handled here");
}

}  // namespace

Strategy parse_strategy(const std::string& name) {
  if (name == "local_pre") return Strategy::kLocalPre;
  if (name == "local_post") return Strategy::kLocalPost;
  if (name == "remote") return Strategy::kRemote;
  if (name == "hybrid") return Strategy::kHybrid;
  throw InvalidArgument("unknown training strategy '" + name + "'");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kLocalPre:
      return "local_pre";
    case Strategy::kLocalPost:
      return "local_post";
    case Strategy::kRemote:
      return "remote";
    case Strategy::kHybrid:
      return "hybrid";
  }
  return "unknown";
}

ObjectiveKind parse_objective(const std::string& name) {
  if (name == "ce") return ObjectiveKind::kCe;
  if (name == "vib") return ObjectiveKind::kVib;
  if (name == "ife") return ObjectiveKind::kIfe;
  if (name == "rib") return ObjectiveKind::kRib;
  throw InvalidArgument("unknown objective '" + name + "'");
}

std::string to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::kCe:
      return "ce";
    case ObjectiveKind::kVib:
      return "vib";
    case ObjectiveKind::kIfe:
      return "ife";
    case ObjectiveKind::kRib:
      return "rib";
  }
  return "unknown";
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("training.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("training.batch_size must be positive");
  if (!(lr > 0.0) || !(stage1_lr > 0.0)) throw ConfigError("training learning rates must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("training.weight_decay must be >= 0");
  if (!(beta >= 0.0) || !(lambda_inv >= 0.0)) throw ConfigError("objective coefficients must be >= 0");
  if (!(tau > 0.0)) throw ConfigError("objective.tau must be > 0");
  if (mc_samples < 1) throw ConfigError("objective.mc_samples must be >= 1");
  if (stage1_epochs && *stage1_epochs < 0) throw ConfigError("training.stage1_epochs must be >= 0");
  if (stage2_epochs && *stage2_epochs < 0) throw ConfigError("training.stage2_epochs must be >= 0");
  if (transfer_side != "decoder" && transfer_side != "encoder") {
    throw ConfigError("training.transfer_side must be 'decoder' or 'encoder'");
  }
  if (view_shift < 0 || !(view_jitter >= 0.0)) throw ConfigError("view transformation parameters must be >= 0");
  for (double s : train_snrs) {
    if (!std::isfinite(s)) throw ConfigError("training.train_snrs entries must be finite");
  }
  try {
    channel.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("channel: ") + e.what());
  }
}

int TrainConfig::resolved_stage1_epochs() const {
  if (stage1_epochs) return *stage1_epochs;
  return stage2_epochs ? std::max(0, epochs - *stage2_epochs) : (4 * epochs + 2) / 5;
}

int TrainConfig::resolved_stage2_epochs() const {
  if (stage2_epochs) return *stage2_epochs;
  return std::max(0, epochs - resolved_stage1_epochs());
}

TrainResult train_local(Transceiver& pair, const data::Dataset& data, const TrainConfig& cfg,
                        const TrainOptions& opts) {
  require_strategy(cfg, {Strategy::kLocalPre, Strategy::kLocalPost}, "train_local");
  cfg.validate();
  Rng rng(cfg.seed);
  TrainResult result;
  run_supervised(pair, data, cfg, opts, false, 1, cfg.epochs, rng, result);
  if (cfg.strategy == Strategy::kLocalPost) {
    const auto params = cfg.transfer_side == "decoder" ? pair.decoder_side_parameters() : pair.encoder_side_parameters();
    result.ledger.param_transfer_scalars += params.scalar_count();
  }
  return result;
}

TrainResult train_remote(Transceiver& pair, const data::Dataset& data, const TrainConfig& cfg,
                         const TrainOptions& opts) {
  require_strategy(cfg, {Strategy::kRemote}, "train_remote");
  cfg.validate();
  Rng rng(cfg.seed);
  TrainResult result;
  run_supervised(pair, data, cfg, opts, true, 1, cfg.epochs, rng, result);
  return result;
}

Matrix random_view(const Matrix& x, const data::TensorShape& shape, int max_shift, double jitter, Rng& rng) {
  if (x.cols() != shape.size()) throw ShapeError("random_view: input width does not match the shape");
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  std::uniform_int_distribution<int> shift(-max_shift, max_shift);
  std::normal_distribution<double> noise(0.0, 1.0);
  const int hw = shape.height * shape.width;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const int dy = shape.height > 1 ? shift(rng) : 0;
    const int dx = shape.width > 1 && shape.height > 1 ? shift(rng) : 0;
    for (int c = 0; c < shape.channels; ++c) {
      for (int i = 0; i < shape.height; ++i) {
        const int si = i - dy;
        if (si < 0 || si >= shape.height) continue;
        for (int j = 0; j < shape.width; ++j) {
          const int sj = j - dx;
          if (sj < 0 || sj >= shape.width) continue;
          out(r, c * hw + i * shape.width + j) = x(r, c * hw + si * shape.width + sj);
        }
      }
    }
    if (jitter > 0.0) {
      for (Eigen::Index k = 0; k < out.cols(); ++k) {
        out(r, k) = std::clamp(out(r, k) + jitter * noise(rng), 0.0, 1.0);
      }
    }
  }
  return out;
}

double pretrain_infonce(Transceiver& pair, const data::Dataset& data, const TrainConfig& cfg, int epochs, Rng& rng) {
  if (data.size() < 2) throw InvalidArgument("pretrain_infonce: need at least 2 examples");
  nn::Adam opt(pair.encoder().parameters(), {.lr = cfg.stage1_lr});
  const Matrix all_x = data.all_inputs();
  const auto b = static_cast<std::size_t>(std::max(2, cfg.batch_size));
  double last = 0.0;
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const std::vector<std::size_t> order = data::shuffled_indices(data.size(), rng);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t lo = 0; lo + 2 <= order.size(); lo += b) {
      const std::size_t hi = std::min(order.size(), lo + b);
      if (hi - lo < 2) break;
      Matrix x(static_cast<Eigen::Index>(hi - lo), all_x.cols());
      for (std::size_t i = lo; i < hi; ++i) x.row(static_cast<Eigen::Index>(i - lo)) = all_x.row(static_cast<Eigen::Index>(order[i]));
      Matrix v1 = random_view(x, data.shape(), cfg.view_shift, cfg.view_jitter, rng);
      Matrix v2 = random_view(x, data.shape(), cfg.view_shift, cfg.view_jitter, rng);
      Tensor z1 = pair.encoder().forward(Tensor::constant(std::move(v1))).mu;
      Tensor z2 = pair.encoder().forward(Tensor::constant(std::move(v2))).mu;
      objectives::LossReport rep = objectives::infonce_loss(z1, z2, cfg.tau);
      if (!std::isfinite(rep.total)) throw TrainingFailure("InfoNCE loss became non-finite", step);
      rep.loss.backward();
      opt.step();
      sum += rep.total;
      ++count;
      ++step;
    }
    last = sum / static_cast<double>(std::max<std::size_t>(count, 1));
  }
  return last;
}

TrainResult train_hybrid(Transceiver& pair, const data::Dataset& data, const TrainConfig& cfg,
                         const TrainOptions& opts) {
  require_strategy(cfg, {Strategy::kHybrid}, "train_hybrid");
  cfg.validate();
  Rng rng(cfg.seed);
  TrainResult result;
  const int s1 = cfg.resolved_stage1_epochs();
  const int s2 = cfg.resolved_stage2_epochs();
  const double stage1_loss = pretrain_infonce(pair, data, cfg, s1, rng);
  EpochRecord rec;
  rec.stage = 1;
  rec.epoch = s1;
  rec.components = {{"infonce", stage1_loss}};
  rec.total = stage1_loss;
  rec.ledger = result.ledger;
  result.history.push_back(rec);
  if (opts.on_epoch) opts.on_epoch(rec);
  run_supervised(pair, data, cfg, opts, true, 2, s2, rng, result);
  return result;
}

TrainResult train(Transceiver& pair, const data::Dataset& data, const TrainConfig& cfg, const TrainOptions& opts) {
  switch (cfg.strategy) {
    case Strategy::kLocalPre:
    case Strategy::kLocalPost:
      return train_local(pair, data, cfg, opts);
    case Strategy::kRemote:
      return train_remote(pair, data, cfg, opts);
    case Strategy::kHybrid:
      return train_hybrid(pair, data, cfg, opts);
  }
  throw ConfigError("unknown strategy");
}

Matrix receiver_scores(const Transceiver& pair, const Matrix& x, const channel::ChannelSpec& spec, Rng& rng,
                       const EvalOptions& opts) {
  spec.validate();
  const std::optional<double> snr = opts.adapter_snr_db ? opts.adapter_snr_db : adapter_snr_for(pair, spec);
  if (opts.mask && pair.mode() != TransmissionMode::kAnalog) throw ModeError("latent pruning applies to analog codes");
  Matrix scores(x.rows(), pair.decoder().config().classes);
  for (Eigen::Index lo = 0; lo < x.rows(); lo += kEvalChunk) {
    const Eigen::Index n = std::min(kEvalChunk, x.rows() - lo);
    Matrix codes;
    if (opts.mask) {
      codes = objectives::apply_mask(pair.latent_means(x.middleRows(lo, n), snr), *opts.mask);
      if (channel::batch_power(codes) > 0.0) codes = channel::normalize_power(codes);
    } else {
      codes = pair.infer_codes(x.middleRows(lo, n), snr);
    }
    scores.middleRows(lo, n) = pair.receive_side(Tensor::constant(channel::transmit(codes, spec, rng))).value();
  }
  return scores;
}

double evaluate(const Transceiver& pair, const data::Dataset& testset, const channel::ChannelSpec& spec, Rng& rng,
                const EvalOptions& opts) {
  if (testset.empty()) throw InvalidArgument("evaluate: empty test set");
  const Matrix scores = receiver_scores(pair, testset.all_inputs(), spec, rng, opts);
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    scores.row(r).maxCoeff(&best);
    if (best == testset[static_cast<std::size_t>(r)].y) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(testset.size());
}

std::vector<CurvePoint> snr_sweep(const Transceiver& pair, std::span<const double> snr_list,
                                  const data::Dataset& testset, Rng& rng, const channel::ChannelSpec& base) {
  if (snr_list.empty()) throw InvalidArgument("snr_sweep: empty SNR list");
  std::vector<CurvePoint> curve;
  for (double snr : snr_list) {
    EvalOptions eo;
    if (pair.has_adapter()) eo.adapter_snr_db = snr;
    curve.push_back({snr, evaluate(pair, testset, base.with_snr(snr), rng, eo)});
  }
  return curve;
}

double linear_probe(const transceiver::Encoder& enc, const data::Dataset& train_set, const data::Dataset& test_set,
                    int epochs, std::uint64_t seed) {
  if (train_set.class_count() != test_set.class_count()) throw InvalidArgument("linear_probe: class counts differ");
  auto features = [&](const data::Dataset& ds) {
    Matrix x = ds.all_inputs();
    Matrix f(x.rows(), enc.latent_dim());
    for (Eigen::Index lo = 0; lo < x.rows(); lo += kEvalChunk) {
      const Eigen::Index n = std::min(kEvalChunk, x.rows() - lo);
      f.middleRows(lo, n) = enc.forward(Tensor::constant(x.middleRows(lo, n))).mu.value();
    }
    return f;
  };
  Matrix ftr = features(train_set);
  Matrix fte = features(test_set);
  const RowVector mean = ftr.colwise().mean();
  RowVector sd = ((ftr.rowwise() - mean).array().square().colwise().mean()).sqrt();
  sd = sd.cwiseMax(1e-8);
  ftr = (ftr.rowwise() - mean).array().rowwise() / sd.array();
  fte = (fte.rowwise() - mean).array().rowwise() / sd.array();

  Rng rng(seed);
  nn::Linear head(enc.latent_dim(), train_set.class_count(), rng);
  nn::Adam opt(head.parameters(), {.lr = 1e-2});
  const std::vector<int> ytr = train_set.all_labels();
  constexpr std::size_t kBatch = 128;
  for (int e = 0; e < epochs; ++e) {
    const std::vector<std::size_t> order = data::shuffled_indices(train_set.size(), rng);
    for (std::size_t lo = 0; lo < order.size(); lo += kBatch) {
      const std::size_t hi = std::min(order.size(), lo + kBatch);
      Matrix xb(static_cast<Eigen::Index>(hi - lo), ftr.cols());
      std::vector<int> yb;
      for (std::size_t i = lo; i < hi; ++i) {
        xb.row(static_cast<Eigen::Index>(i - lo)) = ftr.row(static_cast<Eigen::Index>(order[i]));
        yb.push_back(ytr[order[i]]);
      }
      nn::cross_entropy(head.forward(Tensor::constant(std::move(xb))), yb).backward();
      opt.step();
    }
  }
  const Matrix scores = head.forward(Tensor::constant(fte)).value();
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    scores.row(r).maxCoeff(&best);
    if (best == test_set[static_cast<std::size_t>(r)].y) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test_set.size());
}

}  // namespace tocomm::training
