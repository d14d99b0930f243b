// core/src/config.cpp

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

#include "ufem/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace ufem {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key))
      throw InvalidArgument("unknown config key '" + where + key + "'");
  }
}

json degradation_to_json(const std::optional<DegradationSpec>& d) {
  if (!d) return nullptr;
  json j;
  j["kind"] = degradation_kind_name(d->kind);
  j["severity"] = d->severity;
  j["seed"] = d->seed;
  return j;
}

std::optional<DegradationSpec> degradation_from_json(const json& j, const std::string& where) {
  if (j.is_null()) return std::nullopt;
  reject_unknown_keys(j, {"kind", "severity", "seed"}, where);
  DegradationSpec d;
  d.kind = degradation_kind_from_name(j.at("kind").get<std::string>());
  d.severity = j.at("severity").get<int>();
  d.seed = j.value("seed", 0ull);
  UFEM_CHECK(d.severity >= 1 && d.severity <= 5, "degradation severity must be in [1,5]");
  return d;
}

const std::set<std::string> kStage1Keys = {
    "lambda_mul_adv", "lambda_cyc",  "lambda_idt",   "adv_weights",
    "gan_mode",       "lr_g",        "lr_d",         "epochs",
    "batch",          "schedule",    "history_buffer", "seed",
    "idt_degraded_direction", "idt_clear_direction", "generator",
    "disc_base_width", "checkpoint_every_epochs"};

const std::set<std::string> kStage2Keys = {
    "lambda_corr", "lambda_adv", "lambda_content", "layer_weights", "correlation_taps",
    "content_tap", "gan_mode",   "lr_g",           "lr_d",          "epochs",
    "batch",       "schedule",   "history_buffer", "seed",          "correlation_mode",
    "content_anchor_ef", "per_sample_gram_target", "generator", "disc_base_width",
    "checkpoint_every_epochs"};

const std::set<std::string> kGeneratorKeys = {"architecture",   "in_channels", "base_width",
                                              "residual_blocks", "down_levels", "init",
                                              "input_height",    "input_width"};

}  // namespace

std::string RunConfig::to_json() const {
  json j;
  j["backbone"] = {{"architecture", backbone.architecture_id},
                   {"weights", backbone.weights_path},
                   {"input_resolution", backbone.input_resolution},
                   {"tap", tap_name}};
  j["data"] = {{"clear_manifest", clear_manifest_path},
               {"degraded_manifest", degraded_manifest_path}};
  j["stage1"] = json::parse(stage1.to_json());
  j["stage2"] = json::parse(stage2.to_json());
  json je;
  je["manifest"] = eval.manifest_path;
  je["degradation"] = degradation_to_json(eval.degradation);
  je["batch"] = eval.batch;
  je["threads"] = eval.threads;
  j["eval"] = je;
  return j.dump(2);
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown_keys(j, {"backbone", "data", "stage1", "stage2", "eval"}, "");

  RunConfig c;
  if (j.contains("backbone")) {
    const auto& jb = j["backbone"];
    reject_unknown_keys(jb, {"architecture", "weights", "input_resolution", "tap"}, "backbone.");
    c.backbone.architecture_id = jb.value("architecture", c.backbone.architecture_id);
    c.backbone.weights_path = jb.value("weights", c.backbone.weights_path);
    c.backbone.input_resolution = jb.value("input_resolution", c.backbone.input_resolution);
    c.tap_name = jb.value("tap", c.tap_name);
  }
  if (j.contains("data")) {
    const auto& jd = j["data"];
    reject_unknown_keys(jd, {"clear_manifest", "degraded_manifest"}, "data.");
    c.clear_manifest_path = jd.value("clear_manifest", "");
    c.degraded_manifest_path = jd.value("degraded_manifest", "");
  }
  if (j.contains("stage1")) {
    reject_unknown_keys(j["stage1"], kStage1Keys, "stage1.");
    if (j["stage1"].contains("generator"))
      reject_unknown_keys(j["stage1"]["generator"], kGeneratorKeys, "stage1.generator.");
    c.stage1 = Stage1Config::from_json(j["stage1"].dump());
  }
  if (j.contains("stage2")) {
    reject_unknown_keys(j["stage2"], kStage2Keys, "stage2.");
    if (j["stage2"].contains("generator"))
      reject_unknown_keys(j["stage2"]["generator"], kGeneratorKeys, "stage2.generator.");
    c.stage2 = Stage2Config::from_json(j["stage2"].dump());
  }
  if (j.contains("eval")) {
    const auto& je = j["eval"];
    reject_unknown_keys(je, {"manifest", "degradation", "batch", "threads"}, "eval.");
    c.eval.manifest_path = je.value("manifest", "");
    if (je.contains("degradation"))
      c.eval.degradation = degradation_from_json(je["degradation"], "eval.degradation.");
    c.eval.batch = je.value("batch", c.eval.batch);
    c.eval.threads = je.value("threads", c.eval.threads);
  }
  c.stage1.validate();
  c.stage2.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

void write_run_config(const RunConfig& config, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << config.to_json() << "\n";
}

}  // namespace ufem
