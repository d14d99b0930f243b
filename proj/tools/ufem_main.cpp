// tools/ufem_main.cpp

// Copyright 2026  The ufem authors

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

// Command-line surface: manifest building, degradation synthesis, DCP
// reporting, two-stage training, composition, evaluation, and ablation.
// Every subcommand writes its artifacts plus the resolved config into a run
// directory; exit code 0 on success, nonzero with a one-line error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ufem/config.hpp"
#include "ufem/dcp.hpp"
#include "ufem/image.hpp"
#include "ufem/plot.hpp"
#include "ufem/runtime.hpp"
#include "ufem/synth.hpp"

namespace fs = std::filesystem;
using namespace ufem;

namespace {

// Relative run directories resolve against UFEM_RUN_ROOT when it is set.
fs::path resolve_out(const std::string& out) {
  fs::path p(out);
  if (p.is_relative()) {
    if (const char* root = std::getenv("UFEM_RUN_ROOT")) p = fs::path(root) / p;
  }
  return p;
}

// Timestamps live only here, never in comparable artifacts.
class RunLog {
 public:
  explicit RunLog(const fs::path& dir) : f_(dir / "run.log", std::ios::app) {}
  void line(const std::string& msg) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%F %T", std::gmtime(&now));
    f_ << buf << " " << msg << "\n";
    f_.flush();
  }

 private:
  std::ofstream f_;
};

class JsonlObserver : public TrainObserver {
 public:
  JsonlObserver(const fs::path& dir, const std::string& log_name)
      : dir_(dir), f_(dir / log_name, std::ios::trunc) {}
  void on_step(const std::string& json_record) override { f_ << json_record << "\n"; }
  void on_epoch_end(int) override { f_.flush(); }
  void on_stage1_checkpoint(int epoch, const Stage1Checkpoint& c) override {
    char name[32];
    std::snprintf(name, sizeof(name), "stage1_epoch%04d.ntc", epoch + 1);
    save_stage1_checkpoint(c, (dir_ / name).string());
  }
  void on_stage2_checkpoint(int epoch, const Stage2Checkpoint& c) override {
    char name[32];
    std::snprintf(name, sizeof(name), "stage2_epoch%04d.ntc", epoch + 1);
    save_stage2_checkpoint(c, (dir_ / name).string());
  }

 private:
  fs::path dir_;
  std::ofstream f_;
};

RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return RunConfig::from_file(path);
}

std::shared_ptr<const BackboneHandle> open_backbone(const RunConfig& config) {
  return load_backbone(config.backbone);
}

TapPoint resolve_tap(const RunConfig& config, const BackboneHandle& backbone) {
  if (config.tap_name.empty()) return default_insertion_tap(backbone);
  return backbone.tap(config.tap_name);
}

std::optional<DegradationSpec> degradation_from_flags(const std::string& kind, int severity,
                                                      uint64_t seed) {
  if (kind.empty()) return std::nullopt;
  DegradationSpec d;
  d.kind = degradation_kind_from_name(kind);
  d.severity = severity;
  d.seed = seed;
  return d;
}

int cmd_synth_data(const std::string& out, int per_class, int resolution, uint64_t seed) {
  SynthSpec spec;
  spec.per_class = per_class;
  spec.resolution = resolution;
  spec.seed = seed;
  const fs::path dir = resolve_out(out);
  fs::create_directories(dir);
  generate_synth_dataset(spec, dir.string());
  std::cout << "wrote " << kSynthClassCount * per_class << " images under " << dir.string()
            << "\n";
  return 0;
}

int cmd_manifest(const std::string& root, const std::string& domain, const std::string& kind,
                 int severity, uint64_t seed, const std::string& out) {
  const auto result = build_manifest(root, domain, degradation_from_flags(kind, severity, seed));
  write_manifest(result.manifest, resolve_out(out).string());
  std::cout << "manifest: " << result.manifest.size() << " entries";
  if (result.skipped > 0) std::cout << " (" << result.skipped << " unreadable images skipped)";
  std::cout << "\n";
  return 0;
}

int cmd_degrade(const std::string& kind, int severity, const std::string& in,
                const std::string& out, uint64_t seed) {
  const fs::path out_dir = resolve_out(out);
  const int count =
      degrade_tree(in, out_dir.string(), degradation_kind_from_name(kind), severity, seed);
  std::cout << "degraded " << count << " images into " << out_dir.string() << "\n";
  return 0;
}

int cmd_train_backbone(const std::string& train_manifest, const std::string& val_manifest,
                       const std::string& out, int resolution, int epochs, int batch, double lr,
                       uint64_t seed) {
  const DatasetManifest train = read_manifest(train_manifest);
  const DatasetManifest val = read_manifest(val_manifest);
  BackboneTrainConfig config;
  config.epochs = epochs;
  config.batch = batch;
  config.lr = lr;
  config.seed = seed;
  const fs::path out_path = resolve_out(out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  const auto result = train_tinyvgg(train, val, resolution, config, out_path.string());
  std::cout << "final_train_loss " << result.final_train_loss << " val_top1 " << result.val_top1
            << "\n";
  return 0;
}

int cmd_dcp_report(const std::string& config_path, const std::vector<std::string>& set_args,
                   const std::string& tap_name, const std::string& out, uint64_t seed, bool plots,
                   bool include_diagonal) {
  RunConfig config = load_config_or_default(config_path);
  if (!tap_name.empty()) config.tap_name = tap_name;
  auto backbone = open_backbone(config);
  const TapPoint tap = resolve_tap(config, *backbone);

  std::vector<std::pair<std::string, DatasetManifest>> sets;
  for (const auto& arg : set_args) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("--set expects name=manifest-path, got '" + arg + "'");
    sets.emplace_back(arg.substr(0, eq), read_manifest(arg.substr(eq + 1)));
  }

  const fs::path dir = resolve_out(out);
  fs::create_directories(dir);
  RunLog log(dir);
  log.line("dcp-report tap=" + tap.name + " sets=" + std::to_string(sets.size()));
  const DCPReport report = dcp_report(*backbone, tap, sets, seed, include_diagonal);
  write_dcp_report(report, (dir / "dcp_report.json").string());
  write_run_config(config, (dir / "config.json").string());
  if (plots) {
    plot_scatter((dir / "embedding_raw.ppm").string(), report.raw_embedding, report.set_labels);
    plot_scatter((dir / "embedding_corr.ppm").string(), report.corr_embedding, report.set_labels);
    std::vector<std::vector<double>> bars;
    for (const auto& s : report.sets) bars.push_back(s.per_channel_sparsity);
    plot_bars((dir / "sparsity.ppm").string(), bars);
  }
  std::cout << "raw_separability " << report.raw_separability << " corr_separability "
            << report.corr_separability << "\n";
  return 0;
}

int cmd_train_stage1(const std::string& config_path, const std::string& out) {
  RunConfig config = RunConfig::from_file(config_path);
  auto backbone = open_backbone(config);
  const TapPoint tap = resolve_tap(config, *backbone);
  const DatasetManifest clear = read_manifest(config.clear_manifest_path);
  const DatasetManifest degraded = read_manifest(config.degraded_manifest_path);

  const fs::path dir = resolve_out(out);
  fs::create_directories(dir);
  RunLog log(dir);
  log.line("train-stage1 tap=" + tap.name);
  write_run_config(config, (dir / "config.json").string());
  JsonlObserver observer(dir, "loss_log.jsonl");
  const uint64_t checksum_before = backbone->parameter_checksum();
  const auto result = train_stage1(config.stage1, clear, degraded, *backbone, tap, &observer);
  UFEM_CHECK(backbone->parameter_checksum() == checksum_before,
             "backbone parameters changed during stage-1 training");
  save_stage1_checkpoint(result.checkpoint, (dir / "stage1.ntc").string());
  log.line("saved stage1.ntc after " + std::to_string(result.checkpoint.steps) + " steps");
  std::cout << "stage1 checkpoint: " << (dir / "stage1.ntc").string() << "\n";
  return 0;
}

int cmd_train_stage2(const std::string& config_path, const std::string& stage1_ckpt,
                     const std::string& out) {
  if (stage1_ckpt.empty())
    throw InvalidArgument("train-stage2 requires --stage1-ckpt (run train-stage1 first)");
  RunConfig config = RunConfig::from_file(config_path);
  auto backbone = open_backbone(config);
  const TapPoint tap = resolve_tap(config, *backbone);
  const DatasetManifest clear = read_manifest(config.clear_manifest_path);
  const DatasetManifest degraded = read_manifest(config.degraded_manifest_path);

  const Stage1Checkpoint s1 = load_stage1_checkpoint(stage1_ckpt);
  UFEM_CHECK(s1.tap_name == tap.name, "stage-1 checkpoint taps '" + s1.tap_name +
                                          "' but this run taps '" + tap.name + "'");
  auto g_d2c = build_generator(s1.gen_spec, 0);
  g_d2c->load(s1.g_d2c_params);

  const fs::path dir = resolve_out(out);
  fs::create_directories(dir);
  RunLog log(dir);
  log.line("train-stage2 tap=" + tap.name + " stage1=" + stage1_ckpt);
  write_run_config(config, (dir / "config.json").string());
  JsonlObserver observer(dir, "loss_log.jsonl");
  const auto result =
      train_stage2(config.stage2, clear, degraded, *backbone, tap, *g_d2c, &observer);
  save_stage2_checkpoint(result.checkpoint, (dir / "stage2.ntc").string());
  log.line("saved stage2.ntc after " + std::to_string(result.checkpoint.steps) + " steps");
  std::cout << "stage2 checkpoint: " << (dir / "stage2.ntc").string() << "\n";
  return 0;
}

int cmd_compose(const std::string& stage1_ckpt, const std::string& stage2_ckpt,
                const std::string& out) {
  const Stage1Checkpoint s1 = load_stage1_checkpoint(stage1_ckpt);
  const Stage2Checkpoint s2 = load_stage2_checkpoint(stage2_ckpt);
  UFEMCheckpoint ufem = compose_ufem(s1, s2);
  const fs::path out_path = resolve_out(out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  save_ufem_checkpoint(ufem, out_path.string());
  std::cout << "ufem checkpoint: " << out_path.string() << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ufem_path,
             const std::string& manifest_path, const std::string& kind, int severity,
             uint64_t seed, bool sweep, const std::string& out) {
  RunConfig config = load_config_or_default(config_path);
  auto backbone = open_backbone(config);
  const std::string mpath =
      manifest_path.empty() ? config.eval.manifest_path : manifest_path;
  if (mpath.empty()) throw InvalidArgument("eval needs a manifest (--manifest or eval.manifest)");
  const DatasetManifest manifest = read_manifest(mpath);
  std::optional<DegradationSpec> degr = degradation_from_flags(kind, severity, seed);
  if (!degr) degr = config.eval.degradation;
  config.eval.manifest_path = mpath;
  config.eval.degradation = degr;

  const fs::path dir = resolve_out(out);
  fs::create_directories(dir);
  RunLog log(dir);
  write_run_config(config, (dir / "config.json").string());

  std::optional<AugmentedBackbone> augmented;
  if (!ufem_path.empty()) {
    const UFEMCheckpoint ufem = load_ufem_checkpoint(ufem_path);
    UFEM_CHECK(ufem.architecture_id == backbone->architecture_id(),
               "UFEM checkpoint is for a different backbone");
    const TapPoint tap = backbone->tap(ufem.tap_name);
    augmented = insert_module(backbone, make_ufem_enhancer(ufem), tap);
  }
  const AugmentedBackbone* aug = augmented ? &*augmented : nullptr;

  const EvalReport report = evaluate_classification(*backbone, aug, manifest, degr,
                                                    config.eval.batch, config.eval.threads);
  write_eval_report(report, (dir / "eval.json").string());
  log.line("eval " + report.condition + " top1=" + std::to_string(report.top1));
  std::cout << report.condition << " top1 " << report.top1 << "\n";

  if (sweep) {
    // Accuracy across all five severities of the chosen kind, plus a curve.
    UFEM_CHECK(degr.has_value(), "--sweep needs a degradation kind");
    nlohmann::json curve = nlohmann::json::array();
    std::vector<double> accs;
    for (int sev = 1; sev <= 5; ++sev) {
      DegradationSpec d = *degr;
      d.severity = sev;
      const EvalReport r = evaluate_classification(*backbone, aug, manifest, d,
                                                   config.eval.batch, config.eval.threads);
      curve.push_back({{"severity", sev}, {"top1", r.top1}});
      accs.push_back(r.top1);
      std::cout << r.condition << " top1 " << r.top1 << "\n";
    }
    std::ofstream f(dir / "severity_sweep.json", std::ios::trunc);
    f << curve.dump(2) << "\n";
    plot_lines((dir / "accuracy_vs_severity.ppm").string(), {accs});
  }
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& stage1_ckpt,
               const std::string& stage2_ckpt, const std::string& manifest_path,
               const std::string& kind, int severity, uint64_t seed, const std::string& out) {
  RunConfig config = load_config_or_default(config_path);
  auto backbone = open_backbone(config);
  const std::string mpath = manifest_path.empty() ? config.eval.manifest_path : manifest_path;
  if (mpath.empty()) throw InvalidArgument("ablate needs a manifest (--manifest or eval.manifest)");
  const DatasetManifest manifest = read_manifest(mpath);
  std::optional<DegradationSpec> degr = degradation_from_flags(kind, severity, seed);
  if (!degr) degr = config.eval.degradation;
  config.eval.manifest_path = mpath;
  config.eval.degradation = degr;

  const Stage1Checkpoint s1 = load_stage1_checkpoint(stage1_ckpt);
  const Stage2Checkpoint s2 = load_stage2_checkpoint(stage2_ckpt);

  const fs::path dir = resolve_out(out);
  fs::create_directories(dir);
  write_run_config(config, (dir / "config.json").string());
  const AblationReport report = ablation_report(backbone, manifest, degr, s1, s2,
                                                config.eval.batch, config.eval.threads);
  std::ofstream f(dir / "ablation.tsv", std::ios::trunc);
  f << report.to_text();
  std::cout << report.to_text();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-space enhancement toolkit: deep-channel-prior statistics and the "
               "two-stage unsupervised feature enhancement module"};
  app.require_subcommand(1);

  std::string out, config_path, root, domain = "clear", kind, in_dir;
  std::string train_manifest, val_manifest, stage1_ckpt, stage2_ckpt, ufem_path, manifest_path;
  std::string tap_name;
  std::vector<std::string> set_args;
  int severity = 3, per_class = 100, resolution = 32, epochs = 30, batch = 64;
  double lr = 1e-3;
  uint64_t seed = 1;
  bool plots = false, include_diagonal = false, sweep = false;

  auto* synth = app.add_subcommand("synth-data", "Generate the bundled procedural dataset");
  synth->add_option("--out", out)->required();
  synth->add_option("--per-class", per_class);
  synth->add_option("--resolution", resolution);
  synth->add_option("--seed", seed);

  auto* manifest = app.add_subcommand("manifest", "Build a dataset manifest from a class tree");
  manifest->add_option("--root", root)->required();
  manifest->add_option("--domain", domain)->check(CLI::IsMember({"clear", "degraded"}));
  manifest->add_option("--kind", kind);
  manifest->add_option("--severity", severity);
  manifest->add_option("--seed", seed);
  manifest->add_option("--out", out)->required();

  auto* degrade = app.add_subcommand("degrade", "Apply a synthetic degradation to an image tree");
  degrade->add_option("--kind", kind)->required();
  degrade->add_option("--severity", severity)->required();
  degrade->add_option("--in", in_dir)->required();
  degrade->add_option("--out", out)->required();
  degrade->add_option("--seed", seed);

  auto* trainbb = app.add_subcommand("train-backbone", "Train the bundled tinyvgg on clean data");
  trainbb->add_option("--train-manifest", train_manifest)->required();
  trainbb->add_option("--val-manifest", val_manifest)->required();
  trainbb->add_option("--out", out)->required();
  trainbb->add_option("--resolution", resolution);
  trainbb->add_option("--epochs", epochs);
  trainbb->add_option("--batch", batch);
  trainbb->add_option("--lr", lr);
  trainbb->add_option("--seed", seed);

  auto* dcp = app.add_subcommand("dcp-report", "Channel-prior statistics over labeled image sets");
  dcp->add_option("--config", config_path);
  dcp->add_option("--set", set_args, "name=manifest-path (repeatable)")->required();
  dcp->add_option("--tap", tap_name);
  dcp->add_option("--out", out)->required();
  dcp->add_option("--seed", seed);
  dcp->add_flag("--plots", plots);
  dcp->add_flag("--include-diagonal", include_diagonal);

  auto* s1 = app.add_subcommand("train-stage1", "Dual-learning content restoration training");
  s1->add_option("--config", config_path)->required();
  s1->add_option("--out", out)->required();

  auto* s2 = app.add_subcommand("train-stage2", "Global correlation modulation training");
  s2->add_option("--config", config_path)->required();
  s2->add_option("--stage1-ckpt", stage1_ckpt);
  s2->add_option("--out", out)->required();

  auto* compose = app.add_subcommand("compose", "Compose stage checkpoints into a frozen UFEM");
  compose->add_option("--stage1-ckpt", stage1_ckpt)->required();
  compose->add_option("--stage2-ckpt", stage2_ckpt)->required();
  compose->add_option("--out", out)->required();

  auto* eval = app.add_subcommand("eval", "Classification evaluation, optionally enhanced");
  eval->add_option("--config", config_path);
  eval->add_option("--ufem", ufem_path);
  eval->add_option("--manifest", manifest_path);
  eval->add_option("--kind", kind);
  eval->add_option("--severity", severity);
  eval->add_option("--seed", seed);
  eval->add_flag("--sweep", sweep, "Evaluate all five severities and emit a curve");
  eval->add_option("--out", out)->required();

  auto* ablate = app.add_subcommand("ablate", "Baseline / S1 / S2 / S1+S2 accuracy table");
  ablate->add_option("--config", config_path);
  ablate->add_option("--stage1-ckpt", stage1_ckpt)->required();
  ablate->add_option("--stage2-ckpt", stage2_ckpt)->required();
  ablate->add_option("--manifest", manifest_path);
  ablate->add_option("--kind", kind);
  ablate->add_option("--severity", severity);
  ablate->add_option("--seed", seed);
  ablate->add_option("--out", out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth_data(out, per_class, resolution, seed);
    if (manifest->parsed()) return cmd_manifest(root, domain, kind, severity, seed, out);
    if (degrade->parsed()) return cmd_degrade(kind, severity, in_dir, out, seed);
    if (trainbb->parsed())
      return cmd_train_backbone(train_manifest, val_manifest, out, resolution, epochs, batch, lr,
                                seed);
    if (dcp->parsed())
      return cmd_dcp_report(config_path, set_args, tap_name, out, seed, plots, include_diagonal);
    if (s1->parsed()) return cmd_train_stage1(config_path, out);
    if (s2->parsed()) return cmd_train_stage2(config_path, stage1_ckpt, out);
    if (compose->parsed()) return cmd_compose(stage1_ckpt, stage2_ckpt, out);
    if (eval->parsed())
      return cmd_eval(config_path, ufem_path, manifest_path, kind, severity, seed, sweep, out);
    if (ablate->parsed())
      return cmd_ablate(config_path, stage1_ckpt, stage2_ckpt, manifest_path, kind, severity, seed,
                        out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
