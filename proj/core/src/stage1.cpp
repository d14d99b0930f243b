// core/src/stage1.cpp

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

#include "ufem/stage1.hpp"

#include <cmath>

#include <json.hpp>

namespace ufem {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor gather_samples(const Tensor& all, const std::vector<size_t>& indices) {
  Tensor out(static_cast<int>(indices.size()), all.c(), all.h(), all.w());
  for (size_t i = 0; i < indices.size(); ++i) {
    const double* src = all.sample(static_cast<int>(indices[i]));
    std::copy(src, src + all.sample_size(), out.sample(static_cast<int>(i)));
  }
  return out;
}

// Patch discriminator depth for a given spatial extent: 2x2-ish logit maps.
int patch_layers_for(int spatial) {
  int l = 0;
  int s = spatial;
  while (s > 2 && l < 3) {
    s /= 2;
    ++l;
  }
  return l < 1 ? 1 : l;
}

}  // namespace

std::string gan_mode_name(GanMode m) {
  return m == GanMode::kLeastSquares ? "least_squares" : "vanilla_log";
}

GanMode gan_mode_from_name(const std::string& s) {
  if (s == "least_squares") return GanMode::kLeastSquares;
  if (s == "vanilla_log") return GanMode::kVanillaLog;
  throw InvalidArgument("unknown gan mode '" + s + "'");
}

std::string lr_schedule_name(LrSchedule s) {
  return s == LrSchedule::kConstantThenLinear ? "constant_then_linear" : "step_decay";
}

LrSchedule lr_schedule_from_name(const std::string& s) {
  if (s == "constant_then_linear") return LrSchedule::kConstantThenLinear;
  if (s == "step_decay") return LrSchedule::kStepDecay;
  throw InvalidArgument("unknown lr schedule '" + s + "'");
}

double lr_factor(LrSchedule schedule, int epoch, int total_epochs) {
  UFEM_CHECK(epoch >= 0 && total_epochs > 0, "lr_factor: bad epoch arguments");
  if (schedule == LrSchedule::kStepDecay) return std::pow(0.1, epoch / 10);
  const int decay_start = total_epochs / 2;
  if (epoch < decay_start || total_epochs == decay_start) return 1.0;
  return static_cast<double>(total_epochs - epoch) / static_cast<double>(total_epochs - decay_start);
}

void Stage1Config::validate() const {
  UFEM_CHECK(lambda_mul_adv >= 0 && lambda_cyc >= 0 && lambda_idt >= 0,
             "stage1 lambdas must be nonnegative");
  const double wsum = adv_weights[0] + adv_weights[1] + adv_weights[2];
  UFEM_CHECK(std::fabs(wsum - 1.0) <= 1e-9, "adv_weights must sum to 1");
  UFEM_CHECK(adv_weights[0] >= 0 && adv_weights[1] >= 0 && adv_weights[2] >= 0,
             "adv_weights must be nonnegative");
  UFEM_CHECK(lr_g > 0 && lr_d > 0, "learning rates must be positive");
  UFEM_CHECK(epochs >= 0 && batch > 0 && history_buffer >= 1, "bad stage1 schedule fields");
}

std::string Stage1Config::to_json() const {
  nlohmann::json j;
  j["lambda_mul_adv"] = lambda_mul_adv;
  j["lambda_cyc"] = lambda_cyc;
  j["lambda_idt"] = lambda_idt;
  j["adv_weights"] = adv_weights;
  j["gan_mode"] = gan_mode_name(gan_mode);
  j["lr_g"] = lr_g;
  j["lr_d"] = lr_d;
  j["epochs"] = epochs;
  j["batch"] = batch;
  j["schedule"] = lr_schedule_name(schedule);
  j["history_buffer"] = history_buffer;
  j["seed"] = seed;
  j["idt_degraded_direction"] = idt_degraded_direction;
  j["idt_clear_direction"] = idt_clear_direction;
  j["generator"] = nlohmann::json::parse(generator.to_json());
  j["disc_base_width"] = disc_base_width;
  j["checkpoint_every_epochs"] = checkpoint_every_epochs;
  return j.dump();
}

Stage1Config Stage1Config::from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  Stage1Config c;
  c.lambda_mul_adv = j.value("lambda_mul_adv", c.lambda_mul_adv);
  c.lambda_cyc = j.value("lambda_cyc", c.lambda_cyc);
  c.lambda_idt = j.value("lambda_idt", c.lambda_idt);
  if (j.contains("adv_weights")) {
    auto w = j["adv_weights"].get<std::vector<double>>();
    UFEM_CHECK(w.size() == 3, "adv_weights must have 3 entries");
    c.adv_weights = {w[0], w[1], w[2]};
  }
  if (j.contains("gan_mode")) c.gan_mode = gan_mode_from_name(j["gan_mode"].get<std::string>());
  c.lr_g = j.value("lr_g", c.lr_g);
  c.lr_d = j.value("lr_d", c.lr_d);
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  if (j.contains("schedule")) c.schedule = lr_schedule_from_name(j["schedule"].get<std::string>());
  c.history_buffer = j.value("history_buffer", c.history_buffer);
  c.seed = j.value("seed", c.seed);
  c.idt_degraded_direction = j.value("idt_degraded_direction", c.idt_degraded_direction);
  c.idt_clear_direction = j.value("idt_clear_direction", c.idt_clear_direction);
  if (j.contains("generator")) c.generator = GeneratorSpec::from_json(j["generator"].dump());
  c.disc_base_width = j.value("disc_base_width", c.disc_base_width);
  c.checkpoint_every_epochs = j.value("checkpoint_every_epochs", c.checkpoint_every_epochs);
  return c;
}

bool LossBreakdown::finite() const {
  for (int i = 0; i < 3; ++i) {
    if (!std::isfinite(adv_g_clear[i]) || !std::isfinite(adv_g_degraded[i]) ||
        !std::isfinite(adv_d_clear[i]) || !std::isfinite(adv_d_degraded[i]))
      return false;
  }
  return std::isfinite(cyc) && std::isfinite(idt) && std::isfinite(total_g) &&
         std::isfinite(total_d);
}

std::string LossBreakdown::to_json() const {
  nlohmann::json j;
  j["step"] = step;
  j["epoch"] = epoch;
  j["adv_g_clear"] = adv_g_clear;
  j["adv_g_degraded"] = adv_g_degraded;
  j["adv_d_clear"] = adv_d_clear;
  j["adv_d_degraded"] = adv_d_degraded;
  j["cyc"] = cyc;
  j["idt"] = idt;
  j["total_g"] = total_g;
  j["total_d"] = total_d;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Loss primitives

std::pair<double, double> adversarial_loss(const Tensor& real_logits, const Tensor& fake_logits,
                                           GanMode mode) {
  UFEM_CHECK(real_logits.all_finite() && fake_logits.all_finite(),
             "adversarial_loss: non-finite logits");
  double loss_d_real = 0.0, loss_d_fake = 0.0, loss_g = 0.0;
  const int64_t nr = real_logits.size(), nf = fake_logits.size();
  if (mode == GanMode::kLeastSquares) {
    for (int64_t i = 0; i < nr; ++i) {
      const double d = real_logits.data()[i] - 1.0;
      loss_d_real += d * d;
    }
    for (int64_t i = 0; i < nf; ++i) {
      const double f = fake_logits.data()[i];
      loss_d_fake += f * f;
      const double g = f - 1.0;
      loss_g += g * g;
    }
  } else {
    for (int64_t i = 0; i < nr; ++i) loss_d_real -= std::log(sigmoid(real_logits.data()[i]));
    for (int64_t i = 0; i < nf; ++i) {
      const double s = sigmoid(fake_logits.data()[i]);
      loss_d_fake -= std::log(1.0 - s);
      loss_g -= std::log(s);
    }
  }
  return {loss_d_real / nr + loss_d_fake / nf, loss_g / nf};
}

double cycle_loss(const Tensor& x, const Tensor& x_rec) { return Tensor::mean_abs_diff(x, x_rec); }

double identity_loss(const Tensor& x, const Tensor& g_same_domain_of_x) {
  return Tensor::mean_abs_diff(x, g_same_domain_of_x);
}

double multi_adversarial_loss(const std::array<double, 3>& per_layer,
                              const std::array<double, 3>& weights) {
  for (double v : per_layer) UFEM_CHECK(std::isfinite(v), "multi_adversarial_loss: non-finite component");
  return weights[0] * per_layer[0] + weights[1] * per_layer[1] + weights[2] * per_layer[2];
}

double stage1_objective(double mul_adv, double cyc, double idt,
                        const std::array<double, 3>& lambdas) {
  return lambdas[0] * mul_adv + lambdas[1] * cyc + lambdas[2] * idt;
}

Tensor adv_generator_grad(const Tensor& fake_logits, GanMode mode, double* loss) {
  Tensor g = fake_logits;
  const double n = static_cast<double>(fake_logits.size());
  double acc = 0.0;
  for (int64_t i = 0; i < fake_logits.size(); ++i) {
    const double f = fake_logits.data()[i];
    if (mode == GanMode::kLeastSquares) {
      acc += (f - 1.0) * (f - 1.0);
      g.data()[i] = 2.0 * (f - 1.0) / n;
    } else {
      const double s = sigmoid(f);
      acc -= std::log(s);
      g.data()[i] = (s - 1.0) / n;
    }
  }
  if (loss) *loss = acc / n;
  return g;
}

Tensor adv_disc_real_grad(const Tensor& real_logits, GanMode mode, double* loss) {
  Tensor g = real_logits;
  const double n = static_cast<double>(real_logits.size());
  double acc = 0.0;
  for (int64_t i = 0; i < real_logits.size(); ++i) {
    const double r = real_logits.data()[i];
    if (mode == GanMode::kLeastSquares) {
      acc += (r - 1.0) * (r - 1.0);
      g.data()[i] = 2.0 * (r - 1.0) / n;
    } else {
      const double s = sigmoid(r);
      acc -= std::log(s);
      g.data()[i] = (s - 1.0) / n;
    }
  }
  if (loss) *loss = acc / n;
  return g;
}

Tensor adv_disc_fake_grad(const Tensor& fake_logits, GanMode mode, double* loss) {
  Tensor g = fake_logits;
  const double n = static_cast<double>(fake_logits.size());
  double acc = 0.0;
  for (int64_t i = 0; i < fake_logits.size(); ++i) {
    const double f = fake_logits.data()[i];
    if (mode == GanMode::kLeastSquares) {
      acc += f * f;
      g.data()[i] = 2.0 * f / n;
    } else {
      const double s = sigmoid(f);
      acc -= std::log(1.0 - s);
      g.data()[i] = s / n;
    }
  }
  if (loss) *loss = acc / n;
  return g;
}

Tensor mean_l1_grad(const Tensor& a, const Tensor& b) {
  UFEM_CHECK(a.same_shape(b), "mean_l1_grad: shape mismatch");
  Tensor g = a;
  const double n = static_cast<double>(a.size());
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    g.data()[i] = d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0);
  }
  return g;
}

std::array<TapPoint, 3> discriminator_taps(const BackboneHandle& backbone,
                                           const TapPoint& enhancement_tap) {
  const auto& taps = backbone.tap_points();
  size_t pos = taps.size();
  for (size_t i = 0; i < taps.size(); ++i) {
    if (taps[i] == enhancement_tap) {
      pos = i;
      break;
    }
  }
  UFEM_CHECK(pos < taps.size(), "enhancement tap '" + enhancement_tap.name + "' not in backbone");
  UFEM_CHECK(pos + 2 < taps.size(), "enhancement tap '" + enhancement_tap.name +
                                        "' needs two successor taps for multi-adversarial "
                                        "discrimination");
  return {taps[pos], taps[pos + 1], taps[pos + 2]};
}

// ---------------------------------------------------------------------------
// FeaturePool

FeaturePool::FeaturePool(int capacity, uint64_t seed)
    : capacity_(capacity), rng_(Rng::seed_mix(seed, 0x706f6f6cull)) {
  UFEM_CHECK(capacity >= 1, "feature pool capacity must be >= 1");
}

Tensor FeaturePool::query(const Tensor& fresh_batch) {
  Tensor out = fresh_batch;
  for (int s = 0; s < fresh_batch.n(); ++s) {
    Tensor sample(1, fresh_batch.c(), fresh_batch.h(), fresh_batch.w());
    std::copy(fresh_batch.sample(s), fresh_batch.sample(s) + fresh_batch.sample_size(),
              sample.data());
    if (static_cast<int>(pool_.size()) < capacity_) {
      pool_.push_back(std::move(sample));
      continue;  // return the fresh one
    }
    if (rng_.uniform() < 0.5) {
      const int64_t j = rng_.uniform_int(static_cast<int64_t>(pool_.size()));
      std::copy(pool_[static_cast<size_t>(j)].data(),
                pool_[static_cast<size_t>(j)].data() + sample.size(), out.sample(s));
      pool_[static_cast<size_t>(j)] = std::move(sample);
    }
    // else: keep the fresh sample in `out`, pool untouched.
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization

namespace {

nlohmann::json disc_spec_json(const DiscriminatorSpec& s) {
  return {{"in_channels", s.in_channels}, {"layers", s.layers}, {"base_width", s.base_width}};
}

DiscriminatorSpec disc_spec_from_json(const nlohmann::json& j) {
  DiscriminatorSpec s;
  s.in_channels = j.at("in_channels").get<int>();
  s.layers = j.at("layers").get<int>();
  s.base_width = j.at("base_width").get<int>();
  return s;
}

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

}  // namespace

void save_stage1_checkpoint(const Stage1Checkpoint& c, const std::string& path) {
  NamedTensors nt;
  nt.architecture_id = c.architecture_id;
  nlohmann::json meta;
  meta["kind"] = "stage1_checkpoint";
  meta["tap"] = c.tap_name;
  meta["steps"] = c.steps;
  meta["config"] = nlohmann::json::parse(c.config_json);
  meta["generator_spec"] = nlohmann::json::parse(c.gen_spec.to_json());
  meta["d_clear_specs"] = nlohmann::json::array();
  for (const auto& [spec, params] : c.d_clear) meta["d_clear_specs"].push_back(disc_spec_json(spec));
  meta["d_degraded_spec"] = disc_spec_json(c.d_degraded.first);
  nt.meta_json = meta.dump();

  append_prefixed(&nt, c.g_d2c_params, "g_d2c.");
  append_prefixed(&nt, c.g_c2d_params, "g_c2d.");
  for (size_t i = 0; i < c.d_clear.size(); ++i) {
    append_prefixed(&nt, c.d_clear[i].second, "d_c" + std::to_string(i) + ".");
  }
  append_prefixed(&nt, c.d_degraded.second, "d_d.");
  write_container(path, nt, Dtype::kFloat64);
}

Stage1Checkpoint load_stage1_checkpoint(const std::string& path) {
  const NamedTensors nt = read_container(path);
  const auto meta = nlohmann::json::parse(nt.meta_json);
  if (meta.value("kind", "") != "stage1_checkpoint")
    throw IoError("'" + path + "' is not a stage-1 checkpoint");
  Stage1Checkpoint c;
  c.architecture_id = nt.architecture_id;
  c.tap_name = meta.at("tap").get<std::string>();
  c.steps = meta.at("steps").get<long long>();
  c.config_json = meta.at("config").dump();
  c.gen_spec = GeneratorSpec::from_json(meta.at("generator_spec").dump());
  c.g_d2c_params = extract_prefixed(nt, "g_d2c.");
  c.g_c2d_params = extract_prefixed(nt, "g_c2d.");
  const auto& dspecs = meta.at("d_clear_specs");
  for (size_t i = 0; i < dspecs.size(); ++i) {
    c.d_clear.emplace_back(disc_spec_from_json(dspecs[i]),
                           extract_prefixed(nt, "d_c" + std::to_string(i) + "."));
  }
  c.d_degraded = {disc_spec_from_json(meta.at("d_degraded_spec")), extract_prefixed(nt, "d_d.")};
  return c;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Stage1Nets {
  std::unique_ptr<Generator> g_dc, g_cd;
  std::vector<std::unique_ptr<Discriminator>> d_c;  // per tap
  std::unique_ptr<Discriminator> d_d;
  std::array<TapPoint, 3> taps;
  std::unique_ptr<Sequential> seg01, seg12;  // frozen backbone segments
};

Stage1Nets build_stage1_nets(const Stage1Config& config, const BackboneHandle& backbone,
                             const TapPoint& tap) {
  Stage1Nets nets;
  nets.taps = discriminator_taps(backbone, tap);
  nets.seg01 = backbone.clone_segment(nets.taps[0], nets.taps[1]);
  nets.seg12 = backbone.clone_segment(nets.taps[1], nets.taps[2]);

  GeneratorSpec gspec = config.generator;
  if (gspec.in_channels == 0) gspec.in_channels = tap.channels;
  if (gspec.input_height == 0) gspec.input_height = tap.height;
  if (gspec.input_width == 0) gspec.input_width = tap.width;
  UFEM_CHECK(gspec.in_channels == tap.channels,
             "generator channel count does not match tap '" + tap.name + "'");
  Rng seeds(Rng::seed_mix(config.seed, 0x73316e65ull));
  nets.g_dc = build_generator(gspec, seeds.fork(1).state());
  nets.g_cd = build_generator(gspec, seeds.fork(2).state());

  for (int i = 0; i < 3; ++i) {
    DiscriminatorSpec dspec;
    dspec.in_channels = nets.taps[static_cast<size_t>(i)].channels;
    dspec.layers = patch_layers_for(std::min(nets.taps[static_cast<size_t>(i)].height,
                                             nets.taps[static_cast<size_t>(i)].width));
    dspec.base_width = config.disc_base_width;
    nets.d_c.push_back(build_discriminator(dspec, seeds.fork(10 + static_cast<uint64_t>(i)).state()));
  }
  DiscriminatorSpec ddspec;
  ddspec.in_channels = tap.channels;
  ddspec.layers = patch_layers_for(std::min(tap.height, tap.width));
  ddspec.base_width = config.disc_base_width;
  nets.d_d = build_discriminator(ddspec, seeds.fork(20).state());
  return nets;
}

Stage1Checkpoint make_checkpoint(const Stage1Config& config, const BackboneHandle& backbone,
                                 const TapPoint& tap, Stage1Nets& nets, long long steps) {
  Stage1Checkpoint c;
  c.architecture_id = backbone.architecture_id();
  c.tap_name = tap.name;
  c.config_json = config.to_json();
  c.steps = steps;
  c.gen_spec = nets.g_dc->spec();
  c.g_d2c_params = nets.g_dc->snapshot();
  c.g_c2d_params = nets.g_cd->snapshot();
  for (auto& d : nets.d_c) c.d_clear.emplace_back(d->spec(), d->snapshot());
  c.d_degraded = {nets.d_d->spec(), nets.d_d->snapshot()};
  return c;
}

}  // namespace

Stage1TrainResult train_stage1_features(const Stage1Config& config, const Tensor& clear_features,
                                        const Tensor& degraded_features,
                                        const BackboneHandle& backbone,
                                        const TapPoint& enhancement_tap, TrainObserver* observer) {
  config.validate();
  UFEM_CHECK(clear_features.n() > 0 && degraded_features.n() > 0,
             "stage1 training needs non-empty feature sets");
  UFEM_CHECK(clear_features.c() == enhancement_tap.channels &&
                 degraded_features.c() == enhancement_tap.channels,
             "training features do not match the enhancement tap shape");

  Stage1Nets nets = build_stage1_nets(config, backbone, enhancement_tap);
  const auto& w = config.adv_weights;
  const std::array<double, 3> lambdas = {config.lambda_mul_adv, config.lambda_cyc,
                                         config.lambda_idt};

  // Optimizers; backbone segments are frozen clones and own no optimizer.
  std::vector<ParamRef> gparams = nets.g_dc->params();
  {
    auto more = nets.g_cd->params();
    gparams.insert(gparams.end(), more.begin(), more.end());
  }
  std::vector<ParamRef> dparams;
  for (auto& d : nets.d_c) {
    auto p = d->params();
    dparams.insert(dparams.end(), p.begin(), p.end());
  }
  {
    auto p = nets.d_d->params();
    dparams.insert(dparams.end(), p.begin(), p.end());
  }
  Adam opt_g(gparams, config.lr_g);
  Adam opt_d(dparams, config.lr_d);

  // Clear-side features at the deeper taps are fixed; compute them once.
  const Tensor clear_t1 = nets.seg01->infer(clear_features);
  const Tensor clear_t2 = nets.seg12->infer(clear_t1);

  FeaturePool pool_fake_c(config.history_buffer, Rng::seed_mix(config.seed, 101));
  FeaturePool pool_fake_d(config.history_buffer, Rng::seed_mix(config.seed, 102));

  const size_t n_min = std::min(static_cast<size_t>(clear_features.n()),
                                static_cast<size_t>(degraded_features.n()));
  const int steps_per_epoch =
      std::max<int>(1, static_cast<int>(n_min) / config.batch);

  Stage1TrainResult result;
  long long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double f = lr_factor(config.schedule, epoch, config.epochs);
    opt_g.set_lr(config.lr_g * f);
    opt_d.set_lr(config.lr_d * f);
    for (int s = 0; s < steps_per_epoch; ++s, ++step) {
      const uint64_t batch_seed = Rng::seed_mix(config.seed, 0xba7c4000ull + static_cast<uint64_t>(step));
      std::vector<size_t> ci, di;
      sample_unpaired_indices(static_cast<size_t>(clear_features.n()),
                              static_cast<size_t>(degraded_features.n()), config.batch, batch_seed,
                              /*with_replacement=*/true, &ci, &di);
      const Tensor x_c = gather_samples(clear_features, ci);
      const Tensor x_d = gather_samples(degraded_features, di);

      LossBreakdown lb;
      lb.step = step;
      lb.epoch = epoch;

      // ---- Generator update.
      opt_g.zero_grad();
      for (auto& d : nets.d_c) d->set_trainable(false);
      nets.d_d->set_trainable(false);

      Tensor fake_c = nets.g_dc->forward(x_d);   // f1
      Tensor rec_d = nets.g_cd->forward(fake_c); // f2
      Tensor idt_d;
      if (config.idt_degraded_direction) idt_d = nets.g_cd->forward(x_d);  // f3
      Tensor fake_d = nets.g_cd->forward(x_c);   // f4
      Tensor rec_c = nets.g_dc->forward(fake_d); // f5
      Tensor idt_c;
      if (config.idt_clear_direction) idt_c = nets.g_dc->forward(x_c);  // f6

      Tensor h1 = nets.seg01->forward(fake_c);
      Tensor h2 = nets.seg12->forward(h1);
      Tensor l0 = nets.d_c[0]->forward(fake_c);
      Tensor l1 = nets.d_c[1]->forward(h1);
      Tensor l2 = nets.d_c[2]->forward(h2);
      Tensor ld = nets.d_d->forward(fake_d);

      double cyc_total = cycle_loss(x_d, rec_d) + cycle_loss(x_c, rec_c);
      double idt_total = 0.0;
      if (config.idt_degraded_direction) idt_total += identity_loss(x_d, idt_d);
      if (config.idt_clear_direction) idt_total += identity_loss(x_c, idt_c);

      double g0, g1loss, g2loss, gd;
      Tensor gl0 = adv_generator_grad(l0, config.gan_mode, &g0);
      Tensor gl1 = adv_generator_grad(l1, config.gan_mode, &g1loss);
      Tensor gl2 = adv_generator_grad(l2, config.gan_mode, &g2loss);
      Tensor gld = adv_generator_grad(ld, config.gan_mode, &gd);
      lb.adv_g_clear = {g0, g1loss, g2loss};
      lb.adv_g_degraded = {gd, 0.0, 0.0};
      lb.cyc = cyc_total;
      lb.idt = idt_total;
      const double mul_adv = multi_adversarial_loss(lb.adv_g_clear, w) + gd;
      lb.total_g = stage1_objective(mul_adv, cyc_total, idt_total, lambdas);

      if (!std::isfinite(lb.total_g))
        throw TrainingDiverged("stage1 generator loss is non-finite at step " +
                                   std::to_string(step) + " (batch seed " +
                                   std::to_string(batch_seed) + ")",
                               step, batch_seed);

      // Backward in exact reverse order of the forwards above.
      if (config.idt_clear_direction) {
        Tensor g = mean_l1_grad(idt_c, x_c);
        g.scale_(lambdas[2]);
        nets.g_dc->backward(g);  // pops f6
      }
      {
        Tensor g = mean_l1_grad(rec_c, x_c);
        g.scale_(lambdas[1]);
        Tensor gfd = nets.g_dc->backward(g);  // pops f5
        gld.scale_(lambdas[0]);
        gfd.add_(nets.d_d->backward(gld));
        nets.g_cd->backward(gfd);  // pops f4
      }
      if (config.idt_degraded_direction) {
        Tensor g = mean_l1_grad(idt_d, x_d);
        g.scale_(lambdas[2]);
        nets.g_cd->backward(g);  // pops f3
      }
      {
        Tensor g = mean_l1_grad(rec_d, x_d);
        g.scale_(lambdas[1]);
        Tensor gfc = nets.g_cd->backward(g);  // pops f2

        gl2.scale_(lambdas[0] * w[2]);
        Tensor gh2 = nets.d_c[2]->backward(gl2);
        Tensor gh1 = nets.seg12->backward(gh2);
        gl1.scale_(lambdas[0] * w[1]);
        gh1.add_(nets.d_c[1]->backward(gl1));
        gfc.add_(nets.seg01->backward(gh1));
        gl0.scale_(lambdas[0] * w[0]);
        gfc.add_(nets.d_c[0]->backward(gl0));
        nets.g_dc->backward(gfc);  // pops f1
      }
      opt_g.step();

      // ---- Discriminator update.
      for (auto& d : nets.d_c) d->set_trainable(true);
      nets.d_d->set_trainable(true);
      opt_d.zero_grad();

      const Tensor pooled_c = pool_fake_c.query(fake_c);
      const Tensor pooled_d = pool_fake_d.query(fake_d);
      const Tensor real_taps[3] = {x_c, gather_samples(clear_t1, ci), gather_samples(clear_t2, ci)};
      Tensor fake_at_tap = pooled_c;
      for (int i = 0; i < 3; ++i) {
        if (i == 1) fake_at_tap = nets.seg01->infer(pooled_c);
        if (i == 2) fake_at_tap = nets.seg12->infer(fake_at_tap);
        Tensor lr = nets.d_c[static_cast<size_t>(i)]->forward(real_taps[i]);
        Tensor lf = nets.d_c[static_cast<size_t>(i)]->forward(fake_at_tap);
        double dr, dfk;
        Tensor glf = adv_disc_fake_grad(lf, config.gan_mode, &dfk);
        Tensor glr = adv_disc_real_grad(lr, config.gan_mode, &dr);
        lb.adv_d_clear[static_cast<size_t>(i)] = dr + dfk;
        nets.d_c[static_cast<size_t>(i)]->backward(glf);
        nets.d_c[static_cast<size_t>(i)]->backward(glr);
      }
      {
        Tensor lr = nets.d_d->forward(x_d);
        Tensor lf = nets.d_d->forward(pooled_d);
        double dr, dfk;
        Tensor glf = adv_disc_fake_grad(lf, config.gan_mode, &dfk);
        Tensor glr = adv_disc_real_grad(lr, config.gan_mode, &dr);
        lb.adv_d_degraded = {dr + dfk, 0.0, 0.0};
        nets.d_d->backward(glf);
        nets.d_d->backward(glr);
      }
      lb.total_d = lb.adv_d_clear[0] + lb.adv_d_clear[1] + lb.adv_d_clear[2] +
                   lb.adv_d_degraded[0];
      if (!std::isfinite(lb.total_d))
        throw TrainingDiverged("stage1 discriminator loss is non-finite at step " +
                                   std::to_string(step) + " (batch seed " +
                                   std::to_string(batch_seed) + ")",
                               step, batch_seed);
      opt_d.step();

      if (observer) observer->on_step(lb.to_json());
      result.log.push_back(lb);
    }
    if (observer) {
      observer->on_epoch_end(epoch);
      if (config.checkpoint_every_epochs > 0 && (epoch + 1) % config.checkpoint_every_epochs == 0) {
        observer->on_stage1_checkpoint(
            epoch, make_checkpoint(config, backbone, enhancement_tap, nets, step));
      }
    }
  }

  result.checkpoint = make_checkpoint(config, backbone, enhancement_tap, nets, step);
  return result;
}

Stage1TrainResult train_stage1(const Stage1Config& config, const DatasetManifest& clear,
                               const DatasetManifest& degraded, const BackboneHandle& backbone,
                               const TapPoint& enhancement_tap, TrainObserver* observer) {
  UFEM_CHECK(clear.size() > 0 && degraded.size() > 0, "stage1 training needs non-empty manifests");
  const Tensor clear_images = load_all_images(clear);
  const Tensor degraded_images = load_all_images(degraded);
  const FeatureMap fc = backbone.extract_features(clear_images, enhancement_tap, DomainTag::kClear);
  const FeatureMap fd =
      backbone.extract_features(degraded_images, enhancement_tap, DomainTag::kDegraded);
  return train_stage1_features(config, fc.data, fd.data, backbone, enhancement_tap, observer);
}

}  // namespace ufem
