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

#include "commands.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "config.hpp"
#include "tocomm/checkpoint.hpp"
#include "tocomm/errors.hpp"
#include "tocomm/mi.hpp"
#include "tocomm/robustness.hpp"

namespace tocomm::cli {

namespace fs = std::filesystem;
using transceiver::Transceiver;

namespace {

constexpr const char* kResolvedName = "config.resolved.json";
constexpr const char* kMetricsName = "metrics.json";
constexpr const char* kStreamName = "metrics.jsonl";
constexpr std::uint64_t kEvalStream = 0xe7a1c0deULL;
constexpr std::size_t kMiSamples = 20000;

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

fs::path output_root() {
  const char* env = std::getenv("TOCOMM_OUT");
  return (env != nullptr && *env != '\0') ? fs::path(env) : fs::path("runs");
}

void prepare_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw ConfigError("output directory " + dir.string() + " is not empty (use --force)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path.string());
  os << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("missing file " + path.string());
  try {
    return json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("malformed " + path.string() + ": " + e.what());
  }
}

json load_config(const Flags& f) {
  json cfg = resolve_config(f.config.empty() ? json::object() : load_config_file(f.config));
  if (f.seed) cfg["seed"] = *f.seed;
  return cfg;
}

json ledger_json(const training::TrainingLedger& l) {
  return {{"uplink", l.uplink_scalars},
          {"downlink", l.downlink_scalars},
          {"param_transfer", l.param_transfer_scalars},
          {"exchanged", l.exchanged()},
          {"total", l.total()},
          {"steps", l.steps}};
}

json components_json(const std::vector<std::pair<std::string, double>>& comps) {
  json j = json::object();
  for (const auto& [k, v] : comps) j[k] = v;
  return j;
}

json summary_json(const robustness::ScoreSummary& s) {
  json q = json::object();
  for (std::size_t i = 0; i < robustness::kQuantileLevels.size(); ++i) {
    std::ostringstream key;
    key << 'q' << std::setw(2) << std::setfill('0') << static_cast<int>(std::lround(robustness::kQuantileLevels[i] * 100));
    q[key.str()] = s.quantiles[i];
  }
  return {{"mean", s.mean}, {"quantiles", q}};
}

// Shortest representation that round-trips.
std::string fmt(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

struct Run {
  fs::path dir;
  json cfg;
  Transceiver pair;
};

Run load_run(const fs::path& dir) {
  const fs::path stem = dir / "checkpoints" / "pair";
  if (!transceiver::checkpoint_exists(stem)) throw FormatError("missing checkpoint in " + dir.string());
  json cfg = resolve_config(read_json(dir / kResolvedName));
  return {dir, std::move(cfg), transceiver::load_checkpoint(stem)};
}

// Test-set scalars after the channel.
json test_metrics(const Transceiver& pair, const data::Dataset& test, const channel::ChannelSpec& spec,
                  std::uint64_t seed) {
  Rng rng(seed ^ kEvalStream);
  const Matrix x = test.all_inputs();
  const std::vector<int> y = test.all_labels();
  const Matrix scores = training::receiver_scores(pair, x, spec, rng);
  double ce = 0.0;
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index arg = 0;
    const double top = scores.row(i).maxCoeff(&arg);
    const double lse = top + std::log((scores.row(i).array() - top).exp().sum());
    ce += lse - scores(i, y[i]);
    hits += static_cast<std::size_t>(arg == y[i]);
  }
  const double n = static_cast<double>(scores.rows());
  json j = {{"accuracy", hits / n}, {"task_ce", ce / n}, {"rate", nullptr}};

  const std::optional<double> snr =
      spec.snr_db && std::isfinite(*spec.snr_db) ? spec.snr_db : std::optional<double>();
  const auto tx = pair.transmit_side(nn::Tensor::constant(x), transceiver::EncodeMode::kDeterministic, rng, snr);
  if (tx.logvar.defined()) j["rate"] = mi::kl_gauss_to_std(tx.mu.value(), tx.logvar.value()).mean();
  if (tx.modulated) {
    const Matrix& f = tx.modulated->frequencies.value();
    std::vector<double> p(f.data(), f.data() + f.size());
    double total = 0.0;
    for (double v : p) total += v;
    for (double& v : p) v /= total;
    const auto est = mi::discrete_channel_mi(pair.modulator()->config().constellation.with_probs(p), spec,
                                             kMiSamples, rng);
    j["channel_mi"] = est.nats();
    j["channel_mi_stderr"] = est.stderr_nats() ? json(*est.stderr_nats()) : json(nullptr);
  }
  return j;
}

int cmd_train(const Flags& f, std::ostream& out) {
  const json cfg = load_config(f);
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  fs::path dir = f.out;
  if (dir.empty() && !cfg.at("output_dir").is_null()) dir = cfg.at("output_dir").get<std::string>();
  if (dir.empty()) {
    const std::string name = cfg["model"]["name"].get<std::string>();
    dir = output_root() / ((name.empty() ? cfg["model"]["family"].get<std::string>() : name) + "-s" +
                           std::to_string(seed));
  }

  const Datasets ds = build_datasets(cfg);
  const auto pc = pair_config_from(cfg, ds.train);
  const auto tc = train_config_from(cfg);
  prepare_dir(dir, f.force);
  write_json(dir / kResolvedName, cfg);

  Rng init(seed);
  Transceiver pair(pc, init);
  if (pair.mode() == transceiver::TransmissionMode::kRelative) pair.set_anchors(anchors_from(cfg, ds.train).inputs());

  std::ofstream stream(dir / kStreamName, std::ios::binary);
  training::TrainOptions opts;
  opts.eval_set = &ds.test;
  opts.eval_every_steps = cfg["training"]["eval_every_steps"].get<std::size_t>();
  if (!cfg["training"]["target_accuracy"].is_null()) opts.target_accuracy = cfg["training"]["target_accuracy"].get<double>();
  opts.on_step = [&stream](const training::StepRecord& r) {
    json line = {{"kind", "step"},
                 {"stage", r.stage},
                 {"step", r.step},
                 {"components", components_json(r.components)},
                 {"total", r.total},
                 {"ledger", ledger_json(r.ledger)}};
    stream << line.dump() << '\n';
  };
  opts.on_epoch = [&stream](const training::EpochRecord& r) {
    json line = {{"kind", "epoch"},
                 {"stage", r.stage},
                 {"epoch", r.epoch},
                 {"step", r.step},
                 {"components", components_json(r.components)},
                 {"total", r.total},
                 {"accuracy", r.accuracy ? json(*r.accuracy) : json(nullptr)},
                 {"ledger", ledger_json(r.ledger)}};
    stream << line.dump() << '\n';
    stream.flush();
  };

  const training::TrainResult result = training::train(pair, ds.train, tc, opts);
  const auto info = transceiver::save_checkpoint(pair, dir / "checkpoints" / "pair");

  json metrics = test_metrics(pair, ds.test, tc.channel, seed);
  metrics["strategy"] = training::to_string(tc.strategy);
  metrics["objective"] = training::to_string(tc.objective);
  metrics["seed"] = seed;
  metrics["name"] = pair.name();
  metrics["mode"] = transceiver::to_string(pair.mode());
  metrics["channel"] = channel_to_json(tc.channel);
  metrics["train_components"] =
      result.history.empty() ? json::object() : components_json(result.history.back().components);
  metrics["last_eval_accuracy"] = result.final_accuracy ? json(*result.final_accuracy) : json(nullptr);
  metrics["ledger"] = ledger_json(result.ledger);
  metrics["ledger_at_target"] = result.at_target ? ledger_json(*result.at_target) : json(nullptr);
  metrics["parameter_count"] = info.scalar_count;
  metrics["train_hash"] = ds.train.content_hash();
  metrics["test_hash"] = ds.test.content_hash();
  write_json(dir / kMetricsName, metrics);

  out << "trained " << pair.name() << " -> " << dir.string() << " (accuracy " << metrics["accuracy"].get<double>()
      << ")\n";
  return kOk;
}

int cmd_align(const Flags& f, const std::vector<std::string>& run_dirs, std::vector<std::string> modes,
              std::optional<std::size_t> anchors_k, std::ostream& out) {
  if (run_dirs.size() < 2) throw ConfigError("align needs at least two run directories");
  std::vector<Run> runs;
  for (const auto& d : run_dirs) runs.push_back(load_run(d));

  json cfg = f.config.empty() ? runs.front().cfg : load_config(f);
  if (f.seed) cfg["seed"] = *f.seed;
  if (!modes.empty()) cfg["alignment"]["modes"] = modes;
  if (anchors_k) cfg["alignment"]["anchors_k"] = *anchors_k;

  const Datasets ds = build_datasets(cfg);
  const int classes = ds.test.class_count();
  for (const auto& r : runs) {
    if (r.pair.config().decoder.classes != classes) {
      throw ConfigError("mismatched class counts: " + r.dir.string() + " predicts " +
                        std::to_string(r.pair.config().decoder.classes) + " classes, dataset has " +
                        std::to_string(classes));
    }
  }
  std::vector<alignment::CrossMode> parsed;
  for (const auto& m : cfg["alignment"]["modes"]) {
    try {
      parsed.push_back(alignment::parse_cross_mode(m.get<std::string>()));
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("alignment.modes: ") + e.what());
    }
  }
  const auto spec = channel_from(cfg["channel"]);
  const auto anchors = anchors_from(cfg, ds.train);
  const auto opts = cross_options_from(cfg);

  const fs::path dir = f.out.empty() ? output_root() / "align" : fs::path(f.out);
  prepare_dir(dir, f.force);
  fs::create_directories(dir / "matrices");
  write_json(dir / kResolvedName, cfg);

  std::vector<const Transceiver*> ptrs;
  json names = json::array();
  for (const auto& r : runs) {
    ptrs.push_back(&r.pair);
    names.push_back(r.pair.name());
  }
  json summary = {{"runs", names}, {"anchors_k", anchors.k()}, {"modes", json::object()}};
  for (const auto mode : parsed) {
    Rng rng(cfg["seed"].get<std::uint64_t>());
    const auto m = alignment::cross_matrix(ptrs, ds.test, spec, mode, anchors, rng, opts);
    const std::string name = alignment::to_string(mode);
    write_text(dir / "matrices" / (name + ".csv"), m.to_csv());
    std::size_t incompatible = 0;
    for (const auto& row : m.incompatible)
      for (bool b : row) incompatible += b;
    summary["modes"][name] = {{"mean_diagonal", m.mean_diagonal()},
                              {"mean_off_diagonal", m.mean_off_diagonal()},
                              {"mean_aligned_gap", m.mean_aligned_gap()},
                              {"incompatible", incompatible}};
    out << name << ": diagonal " << m.mean_diagonal() << ", off-diagonal " << m.mean_off_diagonal() << '\n';
  }
  write_json(dir / "summary.json", summary);
  return kOk;
}

int cmd_sweep(const Flags& f, const std::string& run_dir, std::vector<double> snrs, std::ostream& out) {
  Run run = load_run(run_dir);
  if (snrs.empty()) snrs = run.cfg["sweep"]["snr_db"].get<std::vector<double>>();
  const Datasets ds = build_datasets(run.cfg);
  const auto base = channel_from(run.cfg["channel"]).with_snr(0.0);
  Rng rng(run.cfg["seed"].get<std::uint64_t>() ^ kEvalStream);
  const auto curve = training::snr_sweep(run.pair, snrs, ds.test, rng, base);

  const fs::path dir = f.out.empty() ? run.dir : fs::path(f.out);
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << "snr_db,accuracy\n";
  for (const auto& p : curve) csv << fmt(p.snr_db) << ',' << fmt(p.accuracy) << '\n';
  write_text(dir / "sweep.csv", csv.str());
  out << csv.str();
  return kOk;
}

data::Dataset held_out_set(const json& cfg) {
  const json& d = cfg["dataset"];
  const std::string kind = d["kind"].get<std::string>();
  const auto held = cfg["ood"]["held_out_classes"].get<std::vector<int>>();
  if (held.empty()) throw ConfigError("ood.held_out_classes is empty");
  if (kind != "synthetic-digits" && kind != "colored-mnist") {
    throw ConfigError("ood.kind 'held-out' needs a digit dataset, not '" + kind + "'");
  }
  data::DigitOptions o;
  o.size = d["image_size"].get<int>();
  o.pixel_noise = d["pixel_noise"].get<double>();
  for (int c = 0; c < 10; ++c) {
    if (std::find(held.begin(), held.end(), c) == held.end()) o.exclude_classes.push_back(c);
  }
  const auto seed = d["seed"].get<std::uint64_t>();
  const auto n = cfg["ood"]["samples"].get<std::size_t>();
  data::Dataset digits = data::make_synthetic_digits(n, 2 * seed + 5, o);
  if (kind == "synthetic-digits") return digits;
  const auto corr = d["test_correlations"].get<std::vector<double>>();
  return data::make_colored_mnist(digits, corr, d["label_flip"].get<double>(), 4 * seed + 6);
}

int cmd_ood(const Flags& f, const std::string& run_dir, const std::string& kind_flag, std::ostream& out) {
  Run run = load_run(run_dir);
  const std::string kind = kind_flag.empty() ? run.cfg["ood"]["kind"].get<std::string>() : kind_flag;
  const std::string score = run.cfg["ood"]["score"].get<std::string>();
  const Datasets ds = build_datasets(run.cfg);

  data::Dataset ood_set;
  if (kind == "held-out") {
    ood_set = held_out_set(run.cfg);
  } else if (kind == "identical") {
    ood_set = ds.test;
  } else {
    throw ConfigError("ood.kind: unknown kind '" + kind + "'");
  }

  auto scorer = [&](const data::Dataset& set) -> Vector {
    if (score == "rate") return robustness::ood_score(set.all_inputs(), run.pair.encoder());
    if (score == "entropy") return robustness::entropy_score(set.all_inputs(), run.pair);
    throw ConfigError("ood.score: unknown score '" + score + "'");
  };
  const Vector id = scorer(ds.test);
  const Vector od = scorer(ood_set);
  const auto rep = robustness::ood_metrics(std::span<const double>(id.data(), id.size()),
                                           std::span<const double>(od.data(), od.size()));
  json report = {{"score", score},
                 {"kind", kind},
                 {"id_count", id.size()},
                 {"ood_count", od.size()},
                 {"auroc", rep.auroc},
                 {"fpr_at_95tpr", rep.fpr_at_95tpr},
                 {"threshold", rep.threshold},
                 {"id_summary", summary_json(rep.id_summary)},
                 {"ood_summary", summary_json(rep.ood_summary)}};

  const fs::path dir = f.out.empty() ? run.dir : fs::path(f.out);
  fs::create_directories(dir);
  write_json(dir / "ood.json", report);
  out << "auroc " << rep.auroc << ", fpr@95tpr " << rep.fpr_at_95tpr << '\n';
  return kOk;
}


int cmd_overhead(const Flags& f, const std::vector<std::string>& run_dirs, std::ostream& out) {
  if (run_dirs.empty()) throw ConfigError("overhead needs at least one run directory");
  std::ostringstream csv;
  csv << "strategy,uplink,downlink,param_transfer,final_accuracy\n";
  for (const auto& d : run_dirs) {
    const fs::path dir(d);
    if (!transceiver::checkpoint_exists(dir / "checkpoints" / "pair")) {
      throw FormatError("missing checkpoint in " + dir.string());
    }
    const json m = read_json(dir / kMetricsName);
    const json& l = m.at("ledger");
    csv << m.at("strategy").get<std::string>() << ',' << l.at("uplink").get<std::uint64_t>() << ','
        << l.at("downlink").get<std::uint64_t>() << ',' << l.at("param_transfer").get<std::uint64_t>() << ','
        << fmt(m.at("accuracy").get<double>()) << '\n';
  }
  const fs::path dir = f.out.empty() ? output_root() / "overhead" : fs::path(f.out);
  fs::create_directories(dir);
  write_text(dir / "overhead.csv", csv.str());
  out << csv.str();
  return kOk;
}

int cmd_report(const Flags& f, const std::vector<std::string>& run_dirs, std::ostream& out) {
  if (run_dirs.empty()) throw ConfigError("report needs at least one run directory");
  std::ostringstream csv;
  csv << "run,name,strategy,objective,accuracy,task_ce,rate,exchanged\n";
  for (const auto& d : run_dirs) {
    const json m = read_json(fs::path(d) / kMetricsName);
    csv << fs::path(d).filename().string() << ',' << m.at("name").get<std::string>() << ','
        << m.at("strategy").get<std::string>() << ',' << m.at("objective").get<std::string>() << ','
        << fmt(m.at("accuracy").get<double>()) << ',' << fmt(m.at("task_ce").get<double>()) << ','
        << (m.at("rate").is_null() ? std::string() : fmt(m.at("rate").get<double>())) << ','
        << m.at("ledger").at("exchanged").get<std::uint64_t>() << '\n';
  }
  if (!f.out.empty()) {
    fs::create_directories(f.out);
    write_text(fs::path(f.out) / "report.csv", csv.str());
  }
  out << csv.str();
  return kOk;
}

void add_common(CLI::App* sub, Flags& f, bool with_config) {
  if (with_config) sub->add_option("--config", f.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  sub->add_option("--out", f.out, "Output directory");
  sub->add_option("--seed", f.seed, "Override the config seed");
  sub->add_flag("--force", f.force, "Replace a non-empty output directory");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Task-oriented communication experiments", "tocomm"};
  app.require_subcommand(1);

  Flags f;
  std::vector<std::string> runs;
  std::string run;
  std::vector<std::string> modes;
  std::optional<std::size_t> anchors_k;
  std::vector<double> snrs;
  std::string ood_kind;

  auto* train = app.add_subcommand("train", "Train one transceiver pair");
  add_common(train, f, true);

  auto* align = app.add_subcommand("align", "Cross-transceiver accuracy matrices");
  add_common(align, f, true);
  align->add_option("runs", runs, "Trained run directories")->required();
  align->add_option("--modes", modes, "none, receiver-ls, receiver-mmse, receiver-learned, relative");
  align->add_option("--anchors-k", anchors_k, "Anchor count");

  auto* sweep = app.add_subcommand("sweep", "Accuracy over an SNR list");
  add_common(sweep, f, false);
  sweep->add_option("run", run, "Trained run directory")->required();
  sweep->add_option("--snr", snrs, "SNR values in dB");

  auto* ood = app.add_subcommand("ood", "Out-of-distribution detection report");
  add_common(ood, f, false);
  ood->add_option("run", run, "Trained run directory")->required();
  ood->add_option("--kind", ood_kind, "held-out or identical");

  auto* overhead = app.add_subcommand("overhead", "Training-overhead table");
  add_common(overhead, f, false);
  overhead->add_option("runs", runs, "Trained run directories")->required();

  auto* report = app.add_subcommand("report", "Summary table of trained runs");
  add_common(report, f, false);
  report->add_option("runs", runs, "Trained run directories")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train) return cmd_train(f, out);
    if (*align) return cmd_align(f, runs, modes, anchors_k, out);
    if (*sweep) return cmd_sweep(f, run, snrs, out);
    if (*ood) return cmd_ood(f, run, ood_kind, out);
    if (*overhead) return cmd_overhead(f, runs, out);
    if (*report) return cmd_report(f, runs, out);
  } catch (const TrainingFailure& e) {
    err << "error: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const InvalidArgument& e) {
    err << "invalid: " << e.what() << '\n';
    return kConfigError;
  } catch (const ModeError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ConsistencyError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace tocomm::cli
