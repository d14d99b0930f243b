// core/include/ufem/stage2.hpp

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

#ifndef UFEM_STAGE2_HPP_
#define UFEM_STAGE2_HPP_

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ufem/stage1.hpp"

namespace ufem {

enum class CorrelationMode { kL1, kKl, kCosine };

std::string correlation_mode_name(CorrelationMode m);
CorrelationMode correlation_mode_from_name(const std::string& s);

struct Stage2Config {
  double lambda_corr = 1000.0;
  double lambda_adv = 5.0;
  double lambda_content = 10.0;
  std::array<double, 4> layer_weights = {1.0, 2.0, 3.0, 4.0};
  // Correlation taps; empty means the enhancement tap plus its next three
  // taps. The first must be the enhancement tap, depths strictly increasing.
  std::vector<std::string> correlation_tap_names;
  // Content tap; empty means the deepest correlation tap.
  std::string content_tap_name;
  GanMode gan_mode = GanMode::kLeastSquares;
  double lr_g = 2e-4;
  double lr_d = 1e-4;
  int epochs = 200;
  int batch = 5;
  LrSchedule schedule = LrSchedule::kConstantThenLinear;
  int history_buffer = 50;
  uint64_t seed = 1;

  CorrelationMode correlation_mode = CorrelationMode::kL1;
  // Content anchored to the Stage-1 output (EF); false anchors to the clear
  // batch's representation instead.
  bool content_anchor_ef = true;
  // Gram targets: batch-mean of the sampled clear features per tap (default)
  // or per-sample pairing with the clear batch.
  bool per_sample_gram_target = false;

  GeneratorSpec generator;
  int disc_base_width = 64;
  int checkpoint_every_epochs = 0;

  void validate() const;
  std::string to_json() const;
  static Stage2Config from_json(const std::string& json_text);
};

struct Stage2LossBreakdown {
  long long step = 0;
  int epoch = 0;
  double corr = 0.0;
  double adv_g = 0.0;
  double content = 0.0;
  double adv_d = 0.0;
  double total_g = 0.0;
  double total_d = 0.0;

  bool finite() const;
  std::string to_json() const;
};

struct Stage2Checkpoint {
  std::string architecture_id;
  std::string tap_name;
  std::string config_json;
  long long steps = 0;
  GeneratorSpec gen_spec;
  NamedTensors g_e2c_params;
  std::pair<DiscriminatorSpec, NamedTensors> d_clear;
};

void save_stage2_checkpoint(const Stage2Checkpoint& c, const std::string& path);
Stage2Checkpoint load_stage2_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Loss primitives

/// Weighted correlation-consistency loss over per-tap Gram matrices:
/// sum_l w_l * mean_ij |G_l - T_l| for the default L1 mode. When grads is
/// non-null it receives d loss / d G_l with the weights folded in.
double correlation_loss(const std::vector<Eigen::MatrixXd>& grams_generated,
                        const std::vector<Eigen::MatrixXd>& grams_target,
                        const std::vector<double>& layer_weights,
                        CorrelationMode mode = CorrelationMode::kL1,
                        std::vector<Eigen::MatrixXd>* grads = nullptr);

/// Mean absolute difference between deep content representations extracted
/// at the same tap.
double content_loss(const FeatureMap& anchor_content, const FeatureMap& stage2_content);

double stage2_objective(double corr, double adv, double content,
                        const std::array<double, 3>& lambdas);

// ---------------------------------------------------------------------------
// Training

struct Stage2TrainResult {
  Stage2Checkpoint checkpoint;
  std::vector<Stage2LossBreakdown> log;
};

/// Trains G_E2C on features already extracted at the enhancement tap.
/// g_d2c stays frozen (the caller's generator is cloned, never touched);
/// only G_E2C and D_C parameters change.
Stage2TrainResult train_stage2_features(const Stage2Config& config, const Tensor& clear_features,
                                        const Tensor& degraded_features,
                                        const BackboneHandle& backbone,
                                        const TapPoint& enhancement_tap, const Generator& g_d2c,
                                        TrainObserver* observer = nullptr);

Stage2TrainResult train_stage2(const Stage2Config& config, const DatasetManifest& clear,
                               const DatasetManifest& degraded, const BackboneHandle& backbone,
                               const TapPoint& enhancement_tap, const Generator& g_d2c,
                               TrainObserver* observer = nullptr);

}  // namespace ufem

#endif  // UFEM_STAGE2_HPP_
