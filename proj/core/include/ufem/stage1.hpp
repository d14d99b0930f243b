// core/include/ufem/stage1.hpp

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

#ifndef UFEM_STAGE1_HPP_
#define UFEM_STAGE1_HPP_

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ufem/backbone.hpp"
#include "ufem/data.hpp"
#include "ufem/nets.hpp"

namespace ufem {

enum class GanMode { kLeastSquares, kVanillaLog };
enum class LrSchedule { kConstantThenLinear, kStepDecay };

std::string gan_mode_name(GanMode m);
GanMode gan_mode_from_name(const std::string& s);
std::string lr_schedule_name(LrSchedule s);
LrSchedule lr_schedule_from_name(const std::string& s);

/// Learning-rate factor for an epoch. constant_then_linear holds the rate
/// for the first half of training and decays linearly to zero at the end;
/// step_decay multiplies by 0.1 every 10 epochs.
double lr_factor(LrSchedule schedule, int epoch, int total_epochs);

struct Stage1Config {
  double lambda_mul_adv = 5.0;
  double lambda_cyc = 10.0;
  double lambda_idt = 5.0;
  std::array<double, 3> adv_weights = {0.5, 0.3, 0.2};
  GanMode gan_mode = GanMode::kLeastSquares;
  double lr_g = 2e-4;
  double lr_d = 1e-4;
  int epochs = 200;
  int batch = 5;
  LrSchedule schedule = LrSchedule::kConstantThenLinear;
  int history_buffer = 50;
  uint64_t seed = 1;

  // Identity-preserving terms; both directions are on by default.
  bool idt_degraded_direction = true;  // || X_D - G_C2D(X_D) ||
  bool idt_clear_direction = true;     // || X_C - G_D2C(X_C) ||

  GeneratorSpec generator;  // in_channels/input_hw filled from the tap when 0
  int disc_base_width = 64;
  int checkpoint_every_epochs = 0;  // 0: only the final checkpoint

  void validate() const;
  std::string to_json() const;
  static Stage1Config from_json(const std::string& json_text);
};

/// Per-step scalar loss components. Index i of the adv arrays is the i-th
/// discriminator tap (the enhancement layer and its two successors); the
/// degraded direction uses a single discriminator, slots 1 and 2 stay zero.
struct LossBreakdown {
  long long step = 0;
  int epoch = 0;
  std::array<double, 3> adv_g_clear = {0, 0, 0};
  std::array<double, 3> adv_g_degraded = {0, 0, 0};
  std::array<double, 3> adv_d_clear = {0, 0, 0};
  std::array<double, 3> adv_d_degraded = {0, 0, 0};
  double cyc = 0.0;
  double idt = 0.0;
  double total_g = 0.0;
  double total_d = 0.0;

  bool finite() const;
  std::string to_json() const;
};

struct Stage1Checkpoint {
  std::string architecture_id;
  std::string tap_name;
  std::string config_json;
  long long steps = 0;
  GeneratorSpec gen_spec;
  NamedTensors g_d2c_params;
  NamedTensors g_c2d_params;
  std::vector<std::pair<DiscriminatorSpec, NamedTensors>> d_clear;  // one per tap
  std::pair<DiscriminatorSpec, NamedTensors> d_degraded;
};

void save_stage1_checkpoint(const Stage1Checkpoint& c, const std::string& path);
Stage1Checkpoint load_stage1_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Loss primitives (pure functions over logit maps / features)

/// Returns (loss_D, loss_G).
/// least_squares: loss_D = mean[(real-1)^2] + mean[fake^2], loss_G = mean[(fake-1)^2].
/// vanilla_log:   loss_D = -mean[log s(real)] - mean[log(1-s(fake))],
///                loss_G = -mean[log s(fake)] (non-saturating), s = sigmoid.
std::pair<double, double> adversarial_loss(const Tensor& real_logits, const Tensor& fake_logits,
                                           GanMode mode);

double cycle_loss(const Tensor& x, const Tensor& x_rec);
double identity_loss(const Tensor& x, const Tensor& g_same_domain_of_x);
double multi_adversarial_loss(const std::array<double, 3>& per_layer,
                              const std::array<double, 3>& weights);
double stage1_objective(double mul_adv, double cyc, double idt,
                        const std::array<double, 3>& lambdas);

// Gradient kernels used by the trainers (d loss / d logits, d meanL1 / d a).
Tensor adv_generator_grad(const Tensor& fake_logits, GanMode mode, double* loss = nullptr);
Tensor adv_disc_real_grad(const Tensor& real_logits, GanMode mode, double* loss = nullptr);
Tensor adv_disc_fake_grad(const Tensor& fake_logits, GanMode mode, double* loss = nullptr);
Tensor mean_l1_grad(const Tensor& a, const Tensor& b);

/// The enhancement tap plus its next two taps (the discriminator equipment
/// layers). Errors when fewer than two successors exist.
std::array<TapPoint, 3> discriminator_taps(const BackboneHandle& backbone,
                                           const TapPoint& enhancement_tap);

/// History buffer of generated features for discriminator updates
/// (per-sample: fresh features are swapped against stored ones with p=1/2
/// once the buffer is full).
class FeaturePool {
 public:
  FeaturePool(int capacity, uint64_t seed);
  Tensor query(const Tensor& fresh_batch);

 private:
  int capacity_;
  Rng rng_;
  std::vector<Tensor> pool_;  // single samples (1, c, h, w)
};

// ---------------------------------------------------------------------------
// Training

struct Stage2Checkpoint;

class TrainObserver {
 public:
  virtual ~TrainObserver() = default;
  virtual void on_step(const std::string& json_record) {}
  virtual void on_epoch_end(int epoch) {}
  // Fired at the configured checkpoint cadence (checkpoint_every_epochs).
  virtual void on_stage1_checkpoint(int epoch, const Stage1Checkpoint& checkpoint) {}
  virtual void on_stage2_checkpoint(int epoch, const Stage2Checkpoint& checkpoint) {}
};

struct Stage1TrainResult {
  Stage1Checkpoint checkpoint;
  std::vector<LossBreakdown> log;
};

/// Trains on features already extracted at the enhancement tap (the image
/// variant below extracts through the frozen SPL first). Only generator and
/// discriminator parameters change; non-finite losses abort with the batch
/// seed in the exception.
Stage1TrainResult train_stage1_features(const Stage1Config& config, const Tensor& clear_features,
                                        const Tensor& degraded_features,
                                        const BackboneHandle& backbone,
                                        const TapPoint& enhancement_tap,
                                        TrainObserver* observer = nullptr);

Stage1TrainResult train_stage1(const Stage1Config& config, const DatasetManifest& clear,
                               const DatasetManifest& degraded, const BackboneHandle& backbone,
                               const TapPoint& enhancement_tap, TrainObserver* observer = nullptr);

}  // namespace ufem

#endif  // UFEM_STAGE1_HPP_
