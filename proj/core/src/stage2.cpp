// core/src/stage2.cpp

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

#include "ufem/stage2.hpp"

#include <cmath>

#include <json.hpp>

#include "ufem/dcp.hpp"

namespace ufem {

namespace {

Tensor gather_samples(const Tensor& all, const std::vector<size_t>& indices) {
  Tensor out(static_cast<int>(indices.size()), all.c(), all.h(), all.w());
  for (size_t i = 0; i < indices.size(); ++i) {
    const double* src = all.sample(static_cast<int>(indices[i]));
    std::copy(src, src + all.sample_size(), out.sample(static_cast<int>(i)));
  }
  return out;
}

int patch_layers_for(int spatial) {
  int l = 0;
  int s = spatial;
  while (s > 2 && l < 3) {
    s /= 2;
    ++l;
  }
  return l < 1 ? 1 : l;
}

// d loss / d M for G = M^T M given d loss / d G: M (dG + dG^T).
void gram_backward_into(const Tensor& features, int sample, const Eigen::MatrixXd& dg,
                        Tensor* gfeatures) {
  const int c = features.c();
  const int64_t plane = features.plane();
  Eigen::Map<const Eigen::MatrixXd> m(features.sample(sample), plane, c);
  Eigen::Map<Eigen::MatrixXd> gm(gfeatures->sample(sample), plane, c);
  gm.noalias() += m * (dg + dg.transpose());
}

}  // namespace

std::string correlation_mode_name(CorrelationMode m) {
  switch (m) {
    case CorrelationMode::kL1: return "l1";
    case CorrelationMode::kKl: return "kl";
    case CorrelationMode::kCosine: return "cosine";
  }
  return "unknown";
}

CorrelationMode correlation_mode_from_name(const std::string& s) {
  if (s == "l1") return CorrelationMode::kL1;
  if (s == "kl") return CorrelationMode::kKl;
  if (s == "cosine") return CorrelationMode::kCosine;
  throw InvalidArgument("unknown correlation mode '" + s + "'");
}

void Stage2Config::validate() const {
  UFEM_CHECK(lambda_corr >= 0 && lambda_adv >= 0 && lambda_content >= 0,
             "stage2 lambdas must be nonnegative");
  UFEM_CHECK(lr_g > 0 && lr_d > 0, "learning rates must be positive");
  UFEM_CHECK(epochs >= 0 && batch > 0 && history_buffer >= 1, "bad stage2 schedule fields");
  UFEM_CHECK(correlation_tap_names.empty() || correlation_tap_names.size() == 4,
             "correlation_taps must name exactly 4 taps when given");
}

std::string Stage2Config::to_json() const {
  nlohmann::json j;
  j["lambda_corr"] = lambda_corr;
  j["lambda_adv"] = lambda_adv;
  j["lambda_content"] = lambda_content;
  j["layer_weights"] = layer_weights;
  j["correlation_taps"] = correlation_tap_names;
  j["content_tap"] = content_tap_name;
  j["gan_mode"] = gan_mode_name(gan_mode);
  j["lr_g"] = lr_g;
  j["lr_d"] = lr_d;
  j["epochs"] = epochs;
  j["batch"] = batch;
  j["schedule"] = lr_schedule_name(schedule);
  j["history_buffer"] = history_buffer;
  j["seed"] = seed;
  j["correlation_mode"] = correlation_mode_name(correlation_mode);
  j["content_anchor_ef"] = content_anchor_ef;
  j["per_sample_gram_target"] = per_sample_gram_target;
  j["generator"] = nlohmann::json::parse(generator.to_json());
  j["disc_base_width"] = disc_base_width;
  j["checkpoint_every_epochs"] = checkpoint_every_epochs;
  return j.dump();
}

Stage2Config Stage2Config::from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  Stage2Config c;
  c.lambda_corr = j.value("lambda_corr", c.lambda_corr);
  c.lambda_adv = j.value("lambda_adv", c.lambda_adv);
  c.lambda_content = j.value("lambda_content", c.lambda_content);
  if (j.contains("layer_weights")) {
    auto w = j["layer_weights"].get<std::vector<double>>();
    UFEM_CHECK(w.size() == 4, "layer_weights must have 4 entries");
    c.layer_weights = {w[0], w[1], w[2], w[3]};
  }
  if (j.contains("correlation_taps"))
    c.correlation_tap_names = j["correlation_taps"].get<std::vector<std::string>>();
  c.content_tap_name = j.value("content_tap", c.content_tap_name);
  if (j.contains("gan_mode")) c.gan_mode = gan_mode_from_name(j["gan_mode"].get<std::string>());
  c.lr_g = j.value("lr_g", c.lr_g);
  c.lr_d = j.value("lr_d", c.lr_d);
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  if (j.contains("schedule")) c.schedule = lr_schedule_from_name(j["schedule"].get<std::string>());
  c.history_buffer = j.value("history_buffer", c.history_buffer);
  c.seed = j.value("seed", c.seed);
  if (j.contains("correlation_mode"))
    c.correlation_mode = correlation_mode_from_name(j["correlation_mode"].get<std::string>());
  c.content_anchor_ef = j.value("content_anchor_ef", c.content_anchor_ef);
  c.per_sample_gram_target = j.value("per_sample_gram_target", c.per_sample_gram_target);
  if (j.contains("generator")) c.generator = GeneratorSpec::from_json(j["generator"].dump());
  c.disc_base_width = j.value("disc_base_width", c.disc_base_width);
  c.checkpoint_every_epochs = j.value("checkpoint_every_epochs", c.checkpoint_every_epochs);
  return c;
}

bool Stage2LossBreakdown::finite() const {
  return std::isfinite(corr) && std::isfinite(adv_g) && std::isfinite(content) &&
         std::isfinite(adv_d) && std::isfinite(total_g) && std::isfinite(total_d);
}

std::string Stage2LossBreakdown::to_json() const {
  nlohmann::json j;
  j["step"] = step;
  j["epoch"] = epoch;
  j["corr"] = corr;
  j["adv_g"] = adv_g;
  j["content"] = content;
  j["adv_d"] = adv_d;
  j["total_g"] = total_g;
  j["total_d"] = total_d;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Loss primitives

double correlation_loss(const std::vector<Eigen::MatrixXd>& grams_generated,
                        const std::vector<Eigen::MatrixXd>& grams_target,
                        const std::vector<double>& layer_weights, CorrelationMode mode,
                        std::vector<Eigen::MatrixXd>* grads) {
  UFEM_CHECK(grams_generated.size() == grams_target.size() &&
                 grams_generated.size() == layer_weights.size(),
             "correlation_loss: list lengths disagree");
  if (grads) grads->assign(grams_generated.size(), Eigen::MatrixXd());

  double total = 0.0;
  for (size_t l = 0; l < grams_generated.size(); ++l) {
    const Eigen::MatrixXd& g = grams_generated[l];
    const Eigen::MatrixXd& t = grams_target[l];
    UFEM_CHECK(g.rows() == t.rows() && g.cols() == t.cols(),
               "correlation_loss: Gram shape mismatch at layer " + std::to_string(l));
    const double w = layer_weights[l];
    const double count = static_cast<double>(g.size());

    if (mode == CorrelationMode::kL1) {
      total += w * (g - t).cwiseAbs().sum() / count;
      if (grads) {
        (*grads)[l] = (w / count) * (g - t).unaryExpr([](double d) {
          return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        });
      }
    } else if (mode == CorrelationMode::kCosine) {
      const double dot = (g.array() * t.array()).sum();
      const double ng = std::sqrt((g.array() * g.array()).sum());
      const double nt = std::sqrt((t.array() * t.array()).sum());
      const double denom = std::max(ng * nt, 1e-12);
      const double cos = dot / denom;
      total += w * (1.0 - cos);
      if (grads) {
        (*grads)[l] = -w * (t / denom - cos * g / std::max(ng * ng, 1e-12));
      }
    } else {  // kKl: rows of |G| normalized to a probability simplex
      const Eigen::MatrixXd ag = g.cwiseAbs().array() + 1e-12;
      const Eigen::MatrixXd at = t.cwiseAbs().array() + 1e-12;
      const Eigen::VectorXd sg = ag.rowwise().sum();
      const Eigen::VectorXd st = at.rowwise().sum();
      double kl = 0.0;
      Eigen::MatrixXd dg;
      if (grads) dg = Eigen::MatrixXd::Zero(g.rows(), g.cols());
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        double row_dot = 0.0;  // sum_j that * (dkl/d ghat * ghat)
        for (Eigen::Index jj = 0; jj < g.cols(); ++jj) {
          const double th = at(i, jj) / st(i);
          const double gh = ag(i, jj) / sg(i);
          kl += th * std::log(th / gh);
          if (grads) row_dot += -th;  // (dkl/dghat)*ghat summed = -sum th
        }
        if (grads) {
          for (Eigen::Index jj = 0; jj < g.cols(); ++jj) {
            const double th = at(i, jj) / st(i);
            const double gh = ag(i, jj) / sg(i);
            // d kl / d ag = (dkl/dghat - sum_k dkl/dghat_k * ghat_k) / sg
            const double dkl_dgh = -th / gh;
            const double dag = (dkl_dgh - row_dot) / sg(i);
            dg(i, jj) = (g(i, jj) >= 0.0 ? 1.0 : -1.0) * dag;
          }
        }
      }
      const double rows = static_cast<double>(g.rows());
      total += w * kl / rows;
      if (grads) (*grads)[l] = (w / rows) * dg;
    }
  }
  return total;
}

double content_loss(const FeatureMap& anchor_content, const FeatureMap& stage2_content) {
  UFEM_CHECK(anchor_content.tap == stage2_content.tap,
             "content_loss: representations come from different taps");
  return Tensor::mean_abs_diff(stage2_content.data, anchor_content.data);
}

double stage2_objective(double corr, double adv, double content,
                        const std::array<double, 3>& lambdas) {
  return lambdas[0] * corr + lambdas[1] * adv + lambdas[2] * content;
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

void save_stage2_checkpoint(const Stage2Checkpoint& c, const std::string& path) {
  NamedTensors nt;
  nt.architecture_id = c.architecture_id;
  nlohmann::json meta;
  meta["kind"] = "stage2_checkpoint";
  meta["tap"] = c.tap_name;
  meta["steps"] = c.steps;
  meta["config"] = nlohmann::json::parse(c.config_json);
  meta["generator_spec"] = nlohmann::json::parse(c.gen_spec.to_json());
  meta["d_clear_spec"] = disc_spec_json(c.d_clear.first);
  nt.meta_json = meta.dump();
  append_prefixed(&nt, c.g_e2c_params, "g_e2c.");
  append_prefixed(&nt, c.d_clear.second, "d_c.");
  write_container(path, nt, Dtype::kFloat64);
}

Stage2Checkpoint load_stage2_checkpoint(const std::string& path) {
  const NamedTensors nt = read_container(path);
  const auto meta = nlohmann::json::parse(nt.meta_json);
  if (meta.value("kind", "") != "stage2_checkpoint")
    throw IoError("'" + path + "' is not a stage-2 checkpoint");
  Stage2Checkpoint c;
  c.architecture_id = nt.architecture_id;
  c.tap_name = meta.at("tap").get<std::string>();
  c.steps = meta.at("steps").get<long long>();
  c.config_json = meta.at("config").dump();
  c.gen_spec = GeneratorSpec::from_json(meta.at("generator_spec").dump());
  c.g_e2c_params = extract_prefixed(nt, "g_e2c.");
  c.d_clear = {disc_spec_from_json(meta.at("d_clear_spec")), extract_prefixed(nt, "d_c.")};
  return c;
}

// ---------------------------------------------------------------------------
// Training

Stage2TrainResult train_stage2_features(const Stage2Config& config, const Tensor& clear_features,
                                        const Tensor& degraded_features,
                                        const BackboneHandle& backbone,
                                        const TapPoint& enhancement_tap, const Generator& g_d2c,
                                        TrainObserver* observer) {
  config.validate();
  UFEM_CHECK(clear_features.n() > 0 && degraded_features.n() > 0,
             "stage2 training needs non-empty feature sets");
  UFEM_CHECK(g_d2c.spec().in_channels == enhancement_tap.channels,
             "g_d2c does not match the enhancement tap");

  // Resolve the four correlation taps and the content tap.
  std::vector<TapPoint> corr_taps;
  if (config.correlation_tap_names.empty()) {
    const auto& all = backbone.tap_points();
    size_t pos = all.size();
    for (size_t i = 0; i < all.size(); ++i) {
      if (all[i] == enhancement_tap) pos = i;
    }
    UFEM_CHECK(pos + 3 < all.size() || (pos < all.size() && all.size() - pos >= 4),
               "stage2 needs the enhancement tap plus three successors; configure "
               "correlation_taps explicitly for deeper insertion points");
    for (size_t i = pos; i < pos + 4; ++i) corr_taps.push_back(all[i]);
  } else {
    for (const auto& name : config.correlation_tap_names) corr_taps.push_back(backbone.tap(name));
    UFEM_CHECK(corr_taps.front() == enhancement_tap,
               "the first correlation tap must be the enhancement tap");
    for (size_t i = 1; i < corr_taps.size(); ++i) {
      UFEM_CHECK(corr_taps[i].index > corr_taps[i - 1].index,
                 "correlation taps must be strictly increasing in depth");
    }
  }
  const TapPoint content_tap =
      config.content_tap_name.empty() ? corr_taps.back() : backbone.tap(config.content_tap_name);
  size_t content_level = corr_taps.size();
  for (size_t i = 0; i < corr_taps.size(); ++i) {
    if (corr_taps[i] == content_tap) content_level = i;
  }
  UFEM_CHECK(content_level < corr_taps.size(),
             "the content tap must be one of the correlation taps");

  // Frozen pieces: backbone segments between consecutive taps, and g_d2c.
  std::vector<std::unique_ptr<Sequential>> segs;
  for (size_t i = 0; i + 1 < corr_taps.size(); ++i) {
    segs.push_back(backbone.clone_segment(corr_taps[i], corr_taps[i + 1]));
  }
  auto g_dc = g_d2c.clone();
  g_dc->set_trainable(false);

  GeneratorSpec gspec = config.generator;
  if (gspec.in_channels == 0) gspec.in_channels = enhancement_tap.channels;
  if (gspec.input_height == 0) gspec.input_height = enhancement_tap.height;
  if (gspec.input_width == 0) gspec.input_width = enhancement_tap.width;
  Rng seeds(Rng::seed_mix(config.seed, 0x73326e65ull));
  auto g_ec = build_generator(gspec, seeds.fork(1).state());

  DiscriminatorSpec dspec;
  dspec.in_channels = enhancement_tap.channels;
  dspec.layers = patch_layers_for(std::min(enhancement_tap.height, enhancement_tap.width));
  dspec.base_width = config.disc_base_width;
  auto d_c = build_discriminator(dspec, seeds.fork(2).state());

  Adam opt_g(g_ec->params(), config.lr_g);
  Adam opt_d(d_c->params(), config.lr_d);

  // Clear features at every correlation tap (fixed during training).
  std::vector<Tensor> clear_taps;
  clear_taps.push_back(clear_features);
  for (auto& seg : segs) clear_taps.push_back(seg->infer(clear_taps.back()));

  FeaturePool pool_fake(config.history_buffer, Rng::seed_mix(config.seed, 201));

  const std::array<double, 3> lambdas = {config.lambda_corr, config.lambda_adv,
                                         config.lambda_content};
  const std::vector<double> lw(config.layer_weights.begin(), config.layer_weights.end());

  const size_t n_min = std::min(static_cast<size_t>(clear_features.n()),
                                static_cast<size_t>(degraded_features.n()));
  const int steps_per_epoch = std::max<int>(1, static_cast<int>(n_min) / config.batch);

  Stage2TrainResult result;
  long long step = 0;
  auto make_checkpoint = [&](long long steps_done) {
    Stage2Checkpoint c;
    c.architecture_id = backbone.architecture_id();
    c.tap_name = enhancement_tap.name;
    c.config_json = config.to_json();
    c.steps = steps_done;
    c.gen_spec = g_ec->spec();
    c.g_e2c_params = g_ec->snapshot();
    c.d_clear = {d_c->spec(), d_c->snapshot()};
    return c;
  };
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double f = lr_factor(config.schedule, epoch, config.epochs);
    opt_g.set_lr(config.lr_g * f);
    opt_d.set_lr(config.lr_d * f);
    for (int s = 0; s < steps_per_epoch; ++s, ++step) {
      const uint64_t batch_seed =
          Rng::seed_mix(config.seed, 0xba7c4200ull + static_cast<uint64_t>(step));
      std::vector<size_t> ci, di;
      sample_unpaired_indices(static_cast<size_t>(clear_features.n()),
                              static_cast<size_t>(degraded_features.n()), config.batch, batch_seed,
                              /*with_replacement=*/true, &ci, &di);
      const Tensor x_c = gather_samples(clear_features, ci);
      const Tensor x_d = gather_samples(degraded_features, di);
      const int B = x_d.n();

      Stage2LossBreakdown lb;
      lb.step = step;
      lb.epoch = epoch;

      // ---- Generator update.
      opt_g.zero_grad();
      d_c->set_trainable(false);

      const Tensor ef = g_dc->infer(x_d);  // frozen stage-1 output
      Tensor eft = g_ec->forward(ef);

      // Push the stage-2 output through the frozen suffix, level by level.
      std::vector<Tensor> gen_taps;
      gen_taps.push_back(eft);
      for (auto& seg : segs) gen_taps.push_back(seg->forward(gen_taps.back()));

      // Content anchor at the content tap.
      Tensor anchor;
      if (config.content_anchor_ef) {
        anchor = ef;
        for (size_t l = 0; l < content_level; ++l) anchor = segs[l]->infer(anchor);
      } else {
        anchor = gather_samples(clear_taps[content_level], ci);
      }

      // Gram targets per tap.
      std::vector<Eigen::MatrixXd> targets(corr_taps.size());
      for (size_t l = 0; l < corr_taps.size(); ++l) {
        if (config.per_sample_gram_target) continue;  // handled per sample below
        const Tensor batch_clear = gather_samples(clear_taps[l], ci);
        Eigen::MatrixXd t =
            Eigen::MatrixXd::Zero(corr_taps[l].channels, corr_taps[l].channels);
        for (int b = 0; b < batch_clear.n(); ++b) {
          t += gram_of_sample(batch_clear, b, GramNormalization::kRaw);
        }
        targets[l] = t / static_cast<double>(batch_clear.n());
      }

      // Correlation loss and per-tap feature gradients.
      std::vector<Tensor> tap_grads;
      for (const auto& g : gen_taps) tap_grads.emplace_back(g.n(), g.c(), g.h(), g.w());
      double corr_total = 0.0;
      for (int b = 0; b < B; ++b) {
        std::vector<Eigen::MatrixXd> gen_grams(corr_taps.size());
        std::vector<Eigen::MatrixXd> tgt(corr_taps.size());
        for (size_t l = 0; l < corr_taps.size(); ++l) {
          gen_grams[l] = gram_of_sample(gen_taps[l], b, GramNormalization::kRaw);
          if (config.per_sample_gram_target) {
            const Tensor batch_clear = gather_samples(clear_taps[l], ci);
            tgt[l] = gram_of_sample(batch_clear, b % batch_clear.n(), GramNormalization::kRaw);
          } else {
            tgt[l] = targets[l];
          }
        }
        std::vector<Eigen::MatrixXd> dgs;
        corr_total +=
            correlation_loss(gen_grams, tgt, lw, config.correlation_mode, &dgs);
        for (size_t l = 0; l < corr_taps.size(); ++l) {
          Eigen::MatrixXd dg = dgs[l] * (lambdas[0] / static_cast<double>(B));
          gram_backward_into(gen_taps[l], b, dg, &tap_grads[l]);
        }
      }
      corr_total /= static_cast<double>(B);
      lb.corr = corr_total;

      // Content loss gradient lands on the content-tap activation.
      lb.content = Tensor::mean_abs_diff(gen_taps[content_level], anchor);
      {
        Tensor g = mean_l1_grad(gen_taps[content_level], anchor);
        g.scale_(lambdas[2]);
        tap_grads[content_level].add_(g);
      }

      // Adversarial term at the enhancement tap.
      Tensor ladv = d_c->forward(eft);
      double adv_g = 0.0;
      Tensor gladv = adv_generator_grad(ladv, config.gan_mode, &adv_g);
      lb.adv_g = adv_g;
      lb.total_g = stage2_objective(corr_total, adv_g, lb.content, lambdas);
      if (!std::isfinite(lb.total_g))
        throw TrainingDiverged("stage2 generator loss is non-finite at step " +
                                   std::to_string(step) + " (batch seed " +
                                   std::to_string(batch_seed) + ")",
                               step, batch_seed);

      // Backward: deepest tap first, chaining through the frozen segments.
      Tensor g = tap_grads.back();
      for (size_t l = segs.size(); l-- > 0;) {
        g = segs[l]->backward(g);
        g.add_(tap_grads[l]);
      }
      gladv.scale_(lambdas[1]);
      g.add_(d_c->backward(gladv));
      g_ec->backward(g);
      opt_g.step();

      // ---- Discriminator update.
      d_c->set_trainable(true);
      opt_d.zero_grad();
      const Tensor pooled = pool_fake.query(eft);
      Tensor lreal = d_c->forward(x_c);
      Tensor lfake = d_c->forward(pooled);
      double dr, df;
      Tensor glf = adv_disc_fake_grad(lfake, config.gan_mode, &df);
      Tensor glr = adv_disc_real_grad(lreal, config.gan_mode, &dr);
      lb.adv_d = dr + df;
      lb.total_d = lb.adv_d;
      if (!std::isfinite(lb.total_d))
        throw TrainingDiverged("stage2 discriminator loss is non-finite at step " +
                                   std::to_string(step) + " (batch seed " +
                                   std::to_string(batch_seed) + ")",
                               step, batch_seed);
      d_c->backward(glf);
      d_c->backward(glr);
      opt_d.step();

      if (observer) observer->on_step(lb.to_json());
      result.log.push_back(lb);
    }
    if (observer) {
      observer->on_epoch_end(epoch);
      if (config.checkpoint_every_epochs > 0 && (epoch + 1) % config.checkpoint_every_epochs == 0) {
        observer->on_stage2_checkpoint(epoch, make_checkpoint(step));
      }
    }
  }

  result.checkpoint = make_checkpoint(step);
  return result;
}

Stage2TrainResult train_stage2(const Stage2Config& config, const DatasetManifest& clear,
                               const DatasetManifest& degraded, const BackboneHandle& backbone,
                               const TapPoint& enhancement_tap, const Generator& g_d2c,
                               TrainObserver* observer) {
  UFEM_CHECK(clear.size() > 0 && degraded.size() > 0, "stage2 training needs non-empty manifests");
  const Tensor clear_images = load_all_images(clear);
  const Tensor degraded_images = load_all_images(degraded);
  const FeatureMap fc = backbone.extract_features(clear_images, enhancement_tap, DomainTag::kClear);
  const FeatureMap fd =
      backbone.extract_features(degraded_images, enhancement_tap, DomainTag::kDegraded);
  return train_stage2_features(config, fc.data, fd.data, backbone, enhancement_tap, g_d2c,
                               observer);
}

}  // namespace ufem
