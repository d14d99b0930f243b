// core/src/nets.cpp

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

#include "ufem/nets.hpp"

#include <json.hpp>

namespace ufem {

namespace {

constexpr double kGanInitStd = 0.02;

std::unique_ptr<Conv2d> make_conv(int in_c, int out_c, int k, int stride, int pad, bool zero_init,
                                  Rng& rng) {
  auto conv = std::make_unique<Conv2d>(in_c, out_c, k, stride, pad, PadMode::kReplicate);
  if (!zero_init) init_normal(conv->weight(), kGanInitStd, rng);
  return conv;
}

// conv(C->W) -> IN -> ReLU -> conv(W->C); the trailing conv starts at zero
// under near-identity init so the enclosing residual is exact identity.
std::unique_ptr<Layer> make_residual_block(int channels, int width, bool near_identity, Rng& rng) {
  auto body = std::make_unique<Sequential>();
  body->add("conv1", make_conv(channels, width, 3, 1, 1, false, rng));
  body->add("norm1", std::make_unique<InstanceNorm>(width));
  body->add("relu", std::make_unique<Relu>());
  body->add("conv2", make_conv(width, channels, 3, 1, 1, near_identity, rng));
  return std::make_unique<Residual>(std::move(body));
}

std::unique_ptr<Layer> build_flat_residual(const GeneratorSpec& spec, Rng& rng) {
  auto net = std::make_unique<Sequential>();
  for (int b = 0; b < spec.residual_blocks; ++b) {
    net->add("block" + std::to_string(b),
             make_residual_block(spec.in_channels, spec.base_width,
                                 spec.init == GeneratorInit::kNearIdentity, rng));
  }
  return net;
}

/// Encoder-decoder with skip connections and a global residual:
/// y = x + final(decoder(encoder(x))).
class UNetCore : public Layer {
 public:
  UNetCore(const GeneratorSpec& spec, Rng& rng) : spec_(spec) {
    const int W = spec.base_width;
    const int L = spec.down_levels;
    stem_ = make_stage(spec.in_channels, W, 1, rng);
    for (int i = 0; i < L; ++i) downs_.push_back(make_stage(W << i, W << (i + 1), 2, rng));
    mid_ = make_stage(W << L, W << L, 1, rng);
    for (int i = 0; i < L; ++i) {
      // Decoder level i consumes [upsampled (W<<(i+1)) ; skip (W<<i)].
      ups_.push_back(make_stage((W << (i + 1)) + (W << i), W << i, 1, rng));
      upsamples_.push_back(std::make_unique<UpsampleNearest2>());
    }
    final_ = make_conv(W, spec.in_channels, 3, 1, 1,
                       spec.init == GeneratorInit::kNearIdentity, rng);
  }

  Tensor forward(const Tensor& x) override {
    check_spatial(x);
    const int L = spec_.down_levels;
    std::vector<Tensor> enc(static_cast<size_t>(L) + 1);
    enc[0] = stem_->forward(x);
    for (int i = 0; i < L; ++i) enc[static_cast<size_t>(i) + 1] = downs_[static_cast<size_t>(i)]->forward(enc[static_cast<size_t>(i)]);
    Tensor h = mid_->forward(enc[static_cast<size_t>(L)]);
    for (int i = L - 1; i >= 0; --i) {
      Tensor u = upsamples_[static_cast<size_t>(i)]->forward(h);
      h = ups_[static_cast<size_t>(i)]->forward(concat_channels(u, enc[static_cast<size_t>(i)]));
    }
    Tensor y = final_->forward(h);
    y.add_(x);
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    const int L = spec_.down_levels;
    Tensor gh = final_->backward(gy);
    std::vector<Tensor> gskip(static_cast<size_t>(L));
    for (int i = 0; i < L; ++i) {
      Tensor gcat = ups_[static_cast<size_t>(i)]->backward(gh);
      const int up_width = spec_.base_width << (i + 1);
      Tensor gu, gs;
      split_channels(gcat, up_width, &gu, &gs);
      gskip[static_cast<size_t>(i)] = std::move(gs);
      gh = upsamples_[static_cast<size_t>(i)]->backward(gu);
    }
    Tensor g = mid_->backward(gh);
    for (int i = L - 1; i >= 0; --i) {
      g = downs_[static_cast<size_t>(i)]->backward(g);
      g.add_(gskip[static_cast<size_t>(i)]);
    }
    Tensor gx = stem_->backward(g);
    gx.add_(gy);  // global residual
    return gx;
  }

  Tensor infer(const Tensor& x) const override {
    check_spatial(x);
    const int L = spec_.down_levels;
    std::vector<Tensor> enc(static_cast<size_t>(L) + 1);
    enc[0] = stem_->infer(x);
    for (int i = 0; i < L; ++i) enc[static_cast<size_t>(i) + 1] = downs_[static_cast<size_t>(i)]->infer(enc[static_cast<size_t>(i)]);
    Tensor h = mid_->infer(enc[static_cast<size_t>(L)]);
    for (int i = L - 1; i >= 0; --i) {
      Tensor u = upsamples_[static_cast<size_t>(i)]->infer(h);
      h = ups_[static_cast<size_t>(i)]->infer(concat_channels(u, enc[static_cast<size_t>(i)]));
    }
    Tensor y = final_->infer(h);
    y.add_(x);
    return y;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override {
    stem_->collect_params(prefix + "stem.", out);
    for (size_t i = 0; i < downs_.size(); ++i)
      downs_[i]->collect_params(prefix + "down" + std::to_string(i) + ".", out);
    mid_->collect_params(prefix + "mid.", out);
    for (size_t i = 0; i < ups_.size(); ++i)
      ups_[i]->collect_params(prefix + "up" + std::to_string(i) + ".", out);
    final_->collect_params(prefix + "final.", out);
  }

  void set_trainable(bool t) override {
    trainable_ = t;
    stem_->set_trainable(t);
    for (auto& d : downs_) d->set_trainable(t);
    mid_->set_trainable(t);
    for (auto& u : ups_) u->set_trainable(t);
    final_->set_trainable(t);
  }

  std::unique_ptr<Layer> clone() const override {
    return std::unique_ptr<Layer>(new UNetCore(*this, CloneTag{}));
  }

  void clear_state() override {
    stem_->clear_state();
    for (auto& d : downs_) d->clear_state();
    mid_->clear_state();
    for (auto& u : ups_) u->clear_state();
    for (auto& u : upsamples_) u->clear_state();
    final_->clear_state();
  }

 private:
  struct CloneTag {};

  UNetCore(const UNetCore& o, CloneTag) : spec_(o.spec_) {
    stem_.reset(static_cast<Sequential*>(o.stem_->clone().release()));
    for (const auto& d : o.downs_)
      downs_.emplace_back(static_cast<Sequential*>(d->clone().release()));
    mid_.reset(static_cast<Sequential*>(o.mid_->clone().release()));
    for (const auto& u : o.ups_) ups_.emplace_back(static_cast<Sequential*>(u->clone().release()));
    for (size_t i = 0; i < o.upsamples_.size(); ++i)
      upsamples_.push_back(std::make_unique<UpsampleNearest2>());
    final_ = o.final_->clone();
    trainable_ = o.trainable_;
  }

  static std::unique_ptr<Sequential> make_stage(int in_c, int out_c, int stride, Rng& rng) {
    auto s = std::make_unique<Sequential>();
    s->add("conv", make_conv(in_c, out_c, 3, stride, 1, false, rng));
    s->add("norm", std::make_unique<InstanceNorm>(out_c));
    s->add("relu", std::make_unique<Relu>());
    return s;
  }

  void check_spatial(const Tensor& x) const {
    const int div = 1 << spec_.down_levels;
    UFEM_CHECK(x.h() >= div && x.w() >= div && x.h() % div == 0 && x.w() % div == 0,
               "unet with " + std::to_string(spec_.down_levels) +
                   " down-sampling levels needs spatial dims divisible by " + std::to_string(div) +
                   ", got " + x.shape_str());
  }

  static Tensor concat_channels(const Tensor& a, const Tensor& b) {
    UFEM_CHECK(a.n() == b.n() && a.h() == b.h() && a.w() == b.w(),
               "concat_channels: incompatible shapes");
    Tensor out(a.n(), a.c() + b.c(), a.h(), a.w());
    for (int s = 0; s < a.n(); ++s) {
      std::copy(a.sample(s), a.sample(s) + a.sample_size(), out.sample(s));
      std::copy(b.sample(s), b.sample(s) + b.sample_size(), out.sample(s) + a.sample_size());
    }
    return out;
  }

  static void split_channels(const Tensor& cat, int first_channels, Tensor* a, Tensor* b) {
    *a = Tensor(cat.n(), first_channels, cat.h(), cat.w());
    *b = Tensor(cat.n(), cat.c() - first_channels, cat.h(), cat.w());
    for (int s = 0; s < cat.n(); ++s) {
      std::copy(cat.sample(s), cat.sample(s) + a->sample_size(), a->sample(s));
      std::copy(cat.sample(s) + a->sample_size(), cat.sample(s) + cat.sample_size(), b->sample(s));
    }
  }

  GeneratorSpec spec_;
  std::unique_ptr<Sequential> stem_;
  std::vector<std::unique_ptr<Sequential>> downs_;
  std::unique_ptr<Sequential> mid_;
  std::vector<std::unique_ptr<Sequential>> ups_;
  std::vector<std::unique_ptr<UpsampleNearest2>> upsamples_;
  std::unique_ptr<Layer> final_;
};

}  // namespace

std::string generator_arch_name(GeneratorArch a) {
  return a == GeneratorArch::kFlatResidual ? "flat_residual" : "unet";
}

GeneratorArch generator_arch_from_name(const std::string& s) {
  if (s == "flat_residual") return GeneratorArch::kFlatResidual;
  if (s == "unet") return GeneratorArch::kUnet;
  throw InvalidArgument("unknown generator architecture '" + s + "'");
}

std::string GeneratorSpec::to_json() const {
  nlohmann::json j;
  j["architecture"] = generator_arch_name(architecture);
  j["in_channels"] = in_channels;
  j["base_width"] = base_width;
  j["residual_blocks"] = residual_blocks;
  j["down_levels"] = down_levels;
  j["init"] = init == GeneratorInit::kNearIdentity ? "near_identity" : "standard";
  j["input_height"] = input_height;
  j["input_width"] = input_width;
  return j.dump();
}

GeneratorSpec GeneratorSpec::from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  GeneratorSpec s;
  s.architecture = generator_arch_from_name(j.at("architecture").get<std::string>());
  s.in_channels = j.at("in_channels").get<int>();
  s.base_width = j.at("base_width").get<int>();
  s.residual_blocks = j.at("residual_blocks").get<int>();
  s.down_levels = j.at("down_levels").get<int>();
  const std::string init = j.at("init").get<std::string>();
  UFEM_CHECK(init == "near_identity" || init == "standard", "unknown generator init '" + init + "'");
  s.init = init == "near_identity" ? GeneratorInit::kNearIdentity : GeneratorInit::kStandard;
  s.input_height = j.value("input_height", 0);
  s.input_width = j.value("input_width", 0);
  return s;
}

Generator::Generator(GeneratorSpec spec, uint64_t init_seed) : spec_(spec) {
  UFEM_CHECK(spec.in_channels > 0, "generator needs in_channels > 0");
  UFEM_CHECK(spec.base_width > 0, "generator needs base_width > 0");
  Rng rng(Rng::seed_mix(init_seed, 0x67656e65ull));
  if (spec.architecture == GeneratorArch::kFlatResidual) {
    UFEM_CHECK(spec.residual_blocks > 0, "flat_residual needs residual_blocks > 0");
    net_ = build_flat_residual(spec_, rng);
  } else {
    UFEM_CHECK(spec.down_levels >= 1 && spec.down_levels <= 3, "unet down_levels must be in 1..3");
    if (spec.input_height > 0 || spec.input_width > 0) {
      const int div = 1 << spec.down_levels;
      UFEM_CHECK(spec.input_height >= div && spec.input_width >= div,
                 "unet with " + std::to_string(spec.down_levels) +
                     " down-sampling levels would reduce a " + std::to_string(spec.input_height) +
                     "x" + std::to_string(spec.input_width) + " feature below 1x1");
    }
    net_ = std::make_unique<UNetCore>(spec_, rng);
  }
}

void Generator::validate_input(const Tensor& x) const {
  UFEM_CHECK(x.c() == spec_.in_channels, "generator expects " + std::to_string(spec_.in_channels) +
                                             " channels, got " + std::to_string(x.c()));
}

Tensor Generator::forward(const Tensor& x) {
  validate_input(x);
  return net_->forward(x);
}

Tensor Generator::backward(const Tensor& gy) { return net_->backward(gy); }

Tensor Generator::infer(const Tensor& x) const {
  validate_input(x);
  return net_->infer(x);
}

int64_t Generator::parameter_count() {
  int64_t count = 0;
  for (const auto& p : params()) count += p.value->size();
  return count;
}

uint64_t Generator::checksum() { return params_checksum(params()); }

std::unique_ptr<Generator> Generator::clone() const {
  auto g = std::make_unique<Generator>(spec_, 0);
  g->net_ = net_->clone();
  return g;
}

std::unique_ptr<Generator> build_generator(const GeneratorSpec& spec, uint64_t init_seed) {
  return std::make_unique<Generator>(spec, init_seed);
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(DiscriminatorSpec spec, uint64_t init_seed) : spec_(spec) {
  UFEM_CHECK(spec.in_channels > 0 && spec.layers >= 1 && spec.base_width > 0,
             "bad discriminator spec");
  Rng rng(Rng::seed_mix(init_seed, 0x64697363ull));
  net_ = std::make_unique<Sequential>();
  int in_c = spec.in_channels;
  for (int l = 0; l < spec.layers; ++l) {
    const int out_c = spec.base_width << l;
    net_->add("conv" + std::to_string(l), make_conv(in_c, out_c, 4, 2, 1, false, rng));
    if (l > 0) net_->add("norm" + std::to_string(l), std::make_unique<InstanceNorm>(out_c));
    net_->add("lrelu" + std::to_string(l), std::make_unique<LeakyRelu>(0.2));
    in_c = out_c;
  }
  net_->add("logits", make_conv(in_c, 1, 3, 1, 1, false, rng));
}

Tensor Discriminator::forward(const Tensor& x) {
  UFEM_CHECK(x.c() == spec_.in_channels, "discriminator expects " +
                                             std::to_string(spec_.in_channels) + " channels, got " +
                                             std::to_string(x.c()));
  UFEM_CHECK(x.h() >= 2 && x.w() >= 2, "discriminator input must be at least 2x2");
  return net_->forward(x);
}

Tensor Discriminator::backward(const Tensor& gy) { return net_->backward(gy); }

Tensor Discriminator::infer(const Tensor& x) const { return net_->infer(x); }

int Discriminator::logit_extent(int input_extent, int layers) {
  int e = input_extent;
  for (int l = 0; l < layers; ++l) e = (e - 2) / 2 + 1;
  return e;
}

std::unique_ptr<Discriminator> build_discriminator(const DiscriminatorSpec& spec,
                                                   uint64_t init_seed) {
  return std::make_unique<Discriminator>(spec, init_seed);
}

}  // namespace ufem
