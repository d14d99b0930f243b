// core/src/runtime.cpp

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

#include "ufem/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ufem/image.hpp"

namespace ufem {

namespace {

void append_prefixed(NamedTensors* dst, const NamedTensors& src, const std::string& prefix) {
  for (const auto& [name, t] : src.tensors) dst->tensors.emplace_back(prefix + name, t);
}

NamedTensors extract_prefixed(const NamedTensors& src, const std::string& prefix) {
  NamedTensors out;
  for (const auto& [name, t] : src.tensors) {
    if (name.rfind(prefix, 0) == 0) out.tensors.emplace_back(name.substr(prefix.size()), t);
  }
  return out;
}

class GeneratorTransform : public FeatureTransform {
 public:
  GeneratorTransform(const GeneratorSpec& spec, const NamedTensors& params, std::string describe)
      : describe_(std::move(describe)) {
    gen_ = build_generator(spec, 0);
    gen_->load(params);
    gen_->set_trainable(false);
  }

  Tensor apply(const Tensor& features) const override { return gen_->infer(features); }
  std::string describe() const override { return describe_; }

 private:
  std::unique_ptr<Generator> gen_;
  std::string describe_;
};

class ComposedTransform : public FeatureTransform {
 public:
  ComposedTransform(std::shared_ptr<const FeatureTransform> first,
                    std::shared_ptr<const FeatureTransform> second)
      : first_(std::move(first)), second_(std::move(second)) {}

  Tensor apply(const Tensor& features) const override {
    return second_->apply(first_->apply(features));
  }
  std::string describe() const override {
    return first_->describe() + "+" + second_->describe();
  }

 private:
  std::shared_ptr<const FeatureTransform> first_, second_;
};

}  // namespace

UFEMCheckpoint compose_ufem(const Stage1Checkpoint& s1, const Stage2Checkpoint& s2) {
  UFEM_CHECK(s1.architecture_id == s2.architecture_id,
             "stage-1 checkpoint is for backbone '" + s1.architecture_id +
                 "' but stage-2 is for '" + s2.architecture_id + "'");
  UFEM_CHECK(s1.tap_name == s2.tap_name, "stage-1 checkpoint taps '" + s1.tap_name +
                                             "' but stage-2 taps '" + s2.tap_name + "'");
  UFEMCheckpoint c;
  c.architecture_id = s1.architecture_id;
  c.tap_name = s1.tap_name;
  c.g_d2c_spec = s1.gen_spec;
  c.g_e2c_spec = s2.gen_spec;
  c.g_d2c_params = s1.g_d2c_params;
  c.g_e2c_params = s2.g_e2c_params;
  nlohmann::json prov;
  prov["stage1"] = {{"config", nlohmann::json::parse(s1.config_json)}, {"steps", s1.steps}};
  prov["stage2"] = {{"config", nlohmann::json::parse(s2.config_json)}, {"steps", s2.steps}};
  c.provenance_json = prov.dump();
  return c;
}

void save_ufem_checkpoint(const UFEMCheckpoint& c, const std::string& path) {
  NamedTensors nt;
  nt.architecture_id = c.architecture_id;
  nlohmann::json meta;
  meta["kind"] = "ufem_checkpoint";
  meta["tap"] = c.tap_name;
  meta["g_d2c_spec"] = nlohmann::json::parse(c.g_d2c_spec.to_json());
  meta["g_e2c_spec"] = nlohmann::json::parse(c.g_e2c_spec.to_json());
  meta["provenance"] = nlohmann::json::parse(c.provenance_json);
  nt.meta_json = meta.dump();
  append_prefixed(&nt, c.g_d2c_params, "g_d2c.");
  append_prefixed(&nt, c.g_e2c_params, "g_e2c.");
  write_container(path, nt, Dtype::kFloat64);
}

UFEMCheckpoint load_ufem_checkpoint(const std::string& path) {
  const NamedTensors nt = read_container(path);
  const auto meta = nlohmann::json::parse(nt.meta_json);
  if (meta.value("kind", "") != "ufem_checkpoint")
    throw IoError("'" + path + "' is not a UFEM checkpoint");
  UFEMCheckpoint c;
  c.architecture_id = nt.architecture_id;
  c.tap_name = meta.at("tap").get<std::string>();
  c.g_d2c_spec = GeneratorSpec::from_json(meta.at("g_d2c_spec").dump());
  c.g_e2c_spec = GeneratorSpec::from_json(meta.at("g_e2c_spec").dump());
  c.provenance_json = meta.at("provenance").dump();
  c.g_d2c_params = extract_prefixed(nt, "g_d2c.");
  c.g_e2c_params = extract_prefixed(nt, "g_e2c.");
  return c;
}

std::shared_ptr<const FeatureTransform> make_ufem_enhancer(const UFEMCheckpoint& c) {
  auto first = std::make_shared<GeneratorTransform>(c.g_d2c_spec, c.g_d2c_params, "g_d2c");
  auto second = std::make_shared<GeneratorTransform>(c.g_e2c_spec, c.g_e2c_params, "g_e2c");
  return std::make_shared<ComposedTransform>(std::move(first), std::move(second));
}

std::shared_ptr<const FeatureTransform> make_generator_enhancer(const GeneratorSpec& spec,
                                                                const NamedTensors& params,
                                                                const std::string& describe) {
  return std::make_shared<GeneratorTransform>(spec, params, describe);
}

// ---------------------------------------------------------------------------
// Evaluation

double EvalReport::per_class_accuracy(int cls) const {
  const auto total = per_class_total.at(static_cast<size_t>(cls));
  if (total == 0) return 0.0;
  return static_cast<double>(per_class_correct.at(static_cast<size_t>(cls))) /
         static_cast<double>(total);
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["top1"] = top1;
  j["n_images"] = n_images;
  j["condition"] = condition;
  j["per_class_correct"] = per_class_correct;
  j["per_class_total"] = per_class_total;
  return j.dump();
}

EvalReport evaluate_classification(const BackboneHandle& backbone,
                                   const AugmentedBackbone* augmented,
                                   const DatasetManifest& manifest,
                                   const std::optional<DegradationSpec>& degradation,
                                   int batch_size, int threads) {
  UFEM_CHECK(manifest.size() > 0, "evaluate_classification: empty manifest");
  UFEM_CHECK(batch_size > 0 && threads >= 1, "bad evaluation options");
  const int classes = backbone.class_count();
  for (const auto& e : manifest.entries) {
    UFEM_CHECK(e.label >= 0 && e.label < classes,
               "label " + std::to_string(e.label) + " outside class_count for '" + e.path + "'");
  }

  const size_t n = manifest.size();
  std::vector<char> correct(n, 0);

  auto eval_range = [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end;) {
      const size_t stop = std::min(end, i + static_cast<size_t>(batch_size));
      std::vector<Tensor> imgs;
      imgs.reserve(stop - i);
      for (size_t k = i; k < stop; ++k) {
        Tensor img = read_ppm(manifest.abspath(k));
        if (degradation) {
          DegradationSpec per_image = *degradation;
          per_image.seed = Rng::seed_mix(degradation->seed, static_cast<uint64_t>(k));
          img = apply_degradation(img, per_image);
        }
        imgs.push_back(std::move(img));
      }
      const Tensor batch = stack_images(imgs);
      const Tensor logits =
          augmented ? augmented->forward_images(batch) : backbone.forward_images(batch);
      const std::vector<int> pred = argmax_classes(logits);
      for (size_t k = i; k < stop; ++k) {
        correct[k] = pred[k - i] == manifest.entries[k].label ? 1 : 0;
      }
      i = stop;
    }
  };

  if (threads == 1 || n < 2 * static_cast<size_t>(batch_size)) {
    eval_range(0, n);
  } else {
    const size_t per = (n + static_cast<size_t>(threads) - 1) / static_cast<size_t>(threads);
    std::vector<std::thread> workers;
    for (int t = 0; t < threads; ++t) {
      const size_t begin = static_cast<size_t>(t) * per;
      const size_t end = std::min(n, begin + per);
      if (begin >= end) break;
      workers.emplace_back(eval_range, begin, end);
    }
    for (auto& w : workers) w.join();
  }

  EvalReport report;
  report.per_class_correct.assign(static_cast<size_t>(classes), 0);
  report.per_class_total.assign(static_cast<size_t>(classes), 0);
  long long hits = 0;
  for (size_t i = 0; i < n; ++i) {
    const int label = manifest.entries[i].label;
    ++report.per_class_total[static_cast<size_t>(label)];
    if (correct[i]) {
      ++report.per_class_correct[static_cast<size_t>(label)];
      ++hits;
    }
  }
  report.n_images = static_cast<long long>(n);
  report.top1 = static_cast<double>(hits) / static_cast<double>(n);
  std::ostringstream cond;
  if (degradation) {
    cond << degradation_kind_name(degradation->kind) << " sev=" << degradation->severity;
  } else {
    cond << "clean";
  }
  cond << " enhancer=" << (augmented ? "on" : "none");
  report.condition = cond.str();
  return report;
}

void write_eval_report(const EvalReport& report, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << report.to_json() << "\n";
}

// ---------------------------------------------------------------------------
// Ablation

std::string AblationReport::to_text() const {
  std::ostringstream out;
  out << "condition\t" << baseline.condition << "\n";
  auto row = [&out](const char* name, const EvalReport& r) {
    out << name << "\t" << r.top1 << "\t" << r.n_images << "\n";
  };
  row("baseline", baseline);
  row("s1_only", s1_only);
  row("s2_only", s2_only);
  row("s1_s2", s1_s2);
  return out.str();
}

AblationReport ablation_report(std::shared_ptr<const BackboneHandle> backbone,
                               const DatasetManifest& manifest,
                               const std::optional<DegradationSpec>& degradation,
                               const Stage1Checkpoint& s1, const Stage2Checkpoint& s2,
                               int batch_size, int threads) {
  UFEM_CHECK(s1.architecture_id == backbone->architecture_id() &&
                 s2.architecture_id == backbone->architecture_id(),
             "ablation_report: checkpoints are for a different backbone");
  UFEM_CHECK(s1.tap_name == s2.tap_name, "ablation_report: checkpoints tap different layers");
  const TapPoint& tap = backbone->tap(s1.tap_name);

  auto g_s1 = make_generator_enhancer(s1.gen_spec, s1.g_d2c_params, "g_d2c");
  auto g_s2 = make_generator_enhancer(s2.gen_spec, s2.g_e2c_params, "g_e2c");
  auto composed = std::make_shared<ComposedTransform>(g_s1, g_s2);

  AblationReport report;
  report.baseline = evaluate_classification(*backbone, nullptr, manifest, degradation, batch_size,
                                            threads);
  {
    AugmentedBackbone a = insert_module(backbone, g_s1, tap);
    report.s1_only = evaluate_classification(*backbone, &a, manifest, degradation, batch_size,
                                             threads);
  }
  {
    AugmentedBackbone a = insert_module(backbone, g_s2, tap);
    report.s2_only = evaluate_classification(*backbone, &a, manifest, degradation, batch_size,
                                             threads);
  }
  {
    AugmentedBackbone a = insert_module(backbone, composed, tap);
    report.s1_s2 = evaluate_classification(*backbone, &a, manifest, degradation, batch_size,
                                           threads);
  }
  return report;
}

// ---------------------------------------------------------------------------
// tinyvgg training

std::string BackboneTrainConfig::to_json() const {
  nlohmann::json j;
  j["epochs"] = epochs;
  j["batch"] = batch;
  j["lr"] = lr;
  j["seed"] = seed;
  return j.dump();
}

BackboneTrainResult train_tinyvgg(const DatasetManifest& train, const DatasetManifest& val,
                                  int input_resolution, const BackboneTrainConfig& config,
                                  const std::string& out_weights_path, TrainObserver* observer) {
  UFEM_CHECK(train.size() > 0 && val.size() > 0, "train_tinyvgg: empty manifests");
  UFEM_CHECK(config.epochs > 0 && config.batch > 0 && config.lr > 0, "bad backbone train config");

  Rng rng(Rng::seed_mix(config.seed, 0x76676721ull));
  auto net = build_tinyvgg_net(input_resolution, rng);
  Adam opt(net->params(), config.lr, /*beta1=*/0.9);

  const Tensor train_images = load_all_images(train);
  std::vector<int> train_labels;
  train_labels.reserve(train.size());
  for (const auto& e : train.entries) train_labels.push_back(e.label);

  // Normalize with the backbone's input contract.
  Tensor normalized = train_images;
  for (int64_t i = 0; i < normalized.size(); ++i)
    normalized.data()[i] = (normalized.data()[i] - 0.5) / 0.5;

  const int n = normalized.n();
  std::vector<int> order(static_cast<size_t>(n));
  double last_loss = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    // Seeded Fisher-Yates shuffle per epoch.
    Rng shuffle(Rng::seed_mix(config.seed, 0x9000u + static_cast<uint64_t>(epoch)));
    for (int i = n - 1; i > 0; --i) {
      const int64_t j = shuffle.uniform_int(i + 1);
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start + config.batch <= n; start += config.batch, ++batches) {
      Tensor batch(config.batch, 3, input_resolution, input_resolution);
      std::vector<int> labels(static_cast<size_t>(config.batch));
      for (int b = 0; b < config.batch; ++b) {
        const int src = order[static_cast<size_t>(start + b)];
        std::copy(normalized.sample(src), normalized.sample(src) + normalized.sample_size(),
                  batch.sample(b));
        labels[static_cast<size_t>(b)] = train_labels[static_cast<size_t>(src)];
      }
      opt.zero_grad();
      const Tensor logits = net->forward(batch);
      Tensor glogits;
      const double loss = softmax_xent(logits, labels, &glogits);
      if (!std::isfinite(loss))
        throw TrainingDiverged("tinyvgg loss is non-finite", epoch * 1000 + batches, config.seed);
      net->backward(glogits);
      opt.step();
      epoch_loss += loss;
    }
    last_loss = batches ? epoch_loss / batches : 0.0;
    if (observer) {
      nlohmann::json j;
      j["epoch"] = epoch;
      j["train_loss"] = last_loss;
      observer->on_step(j.dump());
      observer->on_epoch_end(epoch);
    }
  }

  NamedTensors weights = snapshot_params(*net);
  weights.architecture_id = "tinyvgg";
  nlohmann::json meta;
  meta["kind"] = "backbone_weights";
  meta["input_resolution"] = input_resolution;
  meta["train_config"] = nlohmann::json::parse(config.to_json());
  weights.meta_json = meta.dump();
  write_container(out_weights_path, weights, Dtype::kFloat32);

  BackboneTrainResult result;
  result.final_train_loss = last_loss;
  BackboneSpec spec;
  spec.architecture_id = "tinyvgg";
  spec.weights_path = out_weights_path;
  spec.input_resolution = input_resolution;
  auto handle = load_backbone(spec);
  result.val_top1 = evaluate_classification(*handle, nullptr, val).top1;
  return result;
}

}  // namespace ufem
