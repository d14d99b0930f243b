// core/include/ufem/runtime.hpp

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

#ifndef UFEM_RUNTIME_HPP_
#define UFEM_RUNTIME_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ufem/stage1.hpp"
#include "ufem/stage2.hpp"

namespace ufem {

/// The frozen serialized pair (G_D2C, G_E2C) plus the tap metadata needed to
/// insert it: enhance(f) = G_E2C(G_D2C(f)).
struct UFEMCheckpoint {
  std::string architecture_id;
  std::string tap_name;
  GeneratorSpec g_d2c_spec;
  GeneratorSpec g_e2c_spec;
  NamedTensors g_d2c_params;
  NamedTensors g_e2c_params;
  std::string provenance_json = "{}";  // configs, seeds, manifest digests
};

/// Both checkpoints must reference the same backbone and tap.
UFEMCheckpoint compose_ufem(const Stage1Checkpoint& s1, const Stage2Checkpoint& s2);

void save_ufem_checkpoint(const UFEMCheckpoint& c, const std::string& path);
UFEMCheckpoint load_ufem_checkpoint(const std::string& path);

/// Frozen feature transform G_E2C(G_D2C(f)); safe for concurrent readers.
std::shared_ptr<const FeatureTransform> make_ufem_enhancer(const UFEMCheckpoint& c);

/// A single frozen generator as a transform (used by ablation rows).
std::shared_ptr<const FeatureTransform> make_generator_enhancer(const GeneratorSpec& spec,
                                                                const NamedTensors& params,
                                                                const std::string& describe);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
  double top1 = 0.0;
  std::vector<long long> per_class_correct;
  std::vector<long long> per_class_total;
  long long n_images = 0;
  std::string condition;  // e.g. "fog sev=3 enhancer=ufem"

  double per_class_accuracy(int cls) const;
  std::string to_json() const;
};

/// Runs the (optionally augmented) classifier over a manifest. When
/// degradation is given it is applied on the fly with a per-image seed
/// mixed from spec.seed and the manifest index. Deterministic; images may
/// be processed by several worker threads with index-ordered aggregation.
EvalReport evaluate_classification(const BackboneHandle& backbone,
                                   const AugmentedBackbone* augmented,
                                   const DatasetManifest& manifest,
                                   const std::optional<DegradationSpec>& degradation = std::nullopt,
                                   int batch_size = 32, int threads = 1);

void write_eval_report(const EvalReport& report, const std::string& path);

// ---------------------------------------------------------------------------
// Ablation

/// Top-1 for {baseline, S1 only, S2 only, S1+S2} on one manifest/condition.
/// "S2 only" applies G_E2C directly to the tap features.
struct AblationReport {
  EvalReport baseline;
  EvalReport s1_only;
  EvalReport s2_only;
  EvalReport s1_s2;

  std::string to_text() const;  // stable field order, diffs cleanly
};

AblationReport ablation_report(std::shared_ptr<const BackboneHandle> backbone,
                               const DatasetManifest& manifest,
                               const std::optional<DegradationSpec>& degradation,
                               const Stage1Checkpoint& s1, const Stage2Checkpoint& s2,
                               int batch_size = 32, int threads = 1);

// ---------------------------------------------------------------------------
// Bundled-backbone training (fixed recipe so accuracy numbers reproduce)

struct BackboneTrainConfig {
  int epochs = 30;
  int batch = 64;
  double lr = 1e-3;
  uint64_t seed = 7;

  std::string to_json() const;
};

struct BackboneTrainResult {
  double final_train_loss = 0.0;
  double val_top1 = 0.0;
};

/// Trains the bundled tinyvgg on a clean manifest and writes a float32
/// weight container loadable by load_backbone.
BackboneTrainResult train_tinyvgg(const DatasetManifest& train, const DatasetManifest& val,
                                  int input_resolution, const BackboneTrainConfig& config,
                                  const std::string& out_weights_path,
                                  TrainObserver* observer = nullptr);

}  // namespace ufem

#endif  // UFEM_RUNTIME_HPP_
