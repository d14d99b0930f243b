// core/src/backbone.cpp

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

#include "ufem/backbone.hpp"

#include <algorithm>

namespace ufem {

namespace {

// Seed for the bundled (untrained) tinyvgg initialization.
constexpr uint64_t kBundledInitSeed = 0x7f4a7c15u;

constexpr int kBlockWidths[4] = {16, 32, 64, 128};
constexpr int kLayersPerBlock = 5;  // conv relu conv relu pool

// Input normalization constants: [0,1] images map to [-1,1].
constexpr double kInputMean = 0.5;
constexpr double kInputStd = 0.5;

}  // namespace

std::string domain_tag_name(DomainTag t) {
  switch (t) {
    case DomainTag::kClear: return "clear";
    case DomainTag::kDegraded: return "degraded";
    case DomainTag::kEnhancedStage1: return "enhanced_stage1";
    case DomainTag::kEnhancedStage2: return "enhanced_stage2";
  }
  return "unknown";
}

std::vector<TapPoint> tinyvgg_taps(int input_resolution) {
  UFEM_CHECK(input_resolution >= 16 && input_resolution % 16 == 0,
             "tinyvgg requires an input resolution that is a positive multiple of 16");
  std::vector<TapPoint> taps;
  int spatial = input_resolution;
  for (int b = 0; b < 4; ++b) {
    spatial /= 2;
    TapPoint t;
    t.name = "block" + std::to_string(b + 1);
    t.index = (b + 1) * kLayersPerBlock;
    t.channels = kBlockWidths[b];
    t.height = spatial;
    t.width = spatial;
    taps.push_back(t);
  }
  return taps;
}

std::unique_ptr<Sequential> build_tinyvgg_net(int input_resolution, Rng& init_rng) {
  UFEM_CHECK(input_resolution >= 16 && input_resolution % 16 == 0,
             "tinyvgg requires an input resolution that is a positive multiple of 16");
  auto net = std::make_unique<Sequential>();
  int in_c = 3;
  for (int b = 0; b < 4; ++b) {
    const int out_c = kBlockWidths[b];
    const std::string p = "block" + std::to_string(b + 1) + ".";
    auto c1 = std::make_unique<Conv2d>(in_c, out_c, 3, 1, 1);
    init_kaiming(c1->weight(), in_c * 9, init_rng);
    auto c2 = std::make_unique<Conv2d>(out_c, out_c, 3, 1, 1);
    init_kaiming(c2->weight(), out_c * 9, init_rng);
    net->add(p + "conv1", std::move(c1));
    net->add(p + "relu1", std::make_unique<Relu>());
    net->add(p + "conv2", std::move(c2));
    net->add(p + "relu2", std::make_unique<Relu>());
    net->add(p + "pool", std::make_unique<MaxPool2>());
    in_c = out_c;
  }
  const int spatial = input_resolution / 16;
  const int head_in = kBlockWidths[3] * spatial * spatial;
  auto head = std::make_unique<Linear>(head_in, kTinyVggClassCount);
  init_kaiming(head->weight(), head_in, init_rng);
  net->add("head", std::move(head));
  return net;
}

std::shared_ptr<const BackboneHandle> load_backbone(const BackboneSpec& spec) {
  if (spec.architecture_id != "tinyvgg")
    throw InvalidArgument("unknown architecture_id '" + spec.architecture_id + "'");

  auto handle = std::shared_ptr<BackboneHandle>(new BackboneHandle());
  handle->architecture_id_ = spec.architecture_id;
  handle->class_count_ = kTinyVggClassCount;
  handle->input_resolution_ = spec.input_resolution;
  handle->taps_ = tinyvgg_taps(spec.input_resolution);

  Rng init(kBundledInitSeed);
  handle->net_ = build_tinyvgg_net(spec.input_resolution, init);

  if (!spec.weights_path.empty()) {
    NamedTensors nt = read_container(spec.weights_path);
    if (!nt.architecture_id.empty() && nt.architecture_id != spec.architecture_id)
      throw IoError("weight file is for architecture '" + nt.architecture_id + "', expected '" +
                    spec.architecture_id + "'");
    load_params(*handle->net_, nt);
  }
  handle->net_->set_trainable(false);
  return handle;
}

const TapPoint& BackboneHandle::tap(const std::string& name) const {
  for (const auto& t : taps_) {
    if (t.name == name) return t;
  }
  throw InvalidArgument("unknown tap '" + name + "' for architecture '" + architecture_id_ + "'");
}

bool BackboneHandle::has_tap(const TapPoint& t) const {
  for (const auto& own : taps_) {
    if (own == t) return true;
  }
  return false;
}

Tensor BackboneHandle::normalize(const Tensor& images01) const {
  UFEM_CHECK(images01.c() == 3, "backbone expects 3-channel images");
  UFEM_CHECK(images01.h() == input_resolution_ && images01.w() == input_resolution_,
             "backbone expects " + std::to_string(input_resolution_) + "x" +
                 std::to_string(input_resolution_) + " inputs, got " + images01.shape_str());
  Tensor x = images01;
  for (int64_t i = 0; i < x.size(); ++i) x.data()[i] = (x.data()[i] - kInputMean) / kInputStd;
  return x;
}

FeatureMap BackboneHandle::extract_features(const Tensor& images01, const TapPoint& tap,
                                            DomainTag domain) const {
  UFEM_CHECK(has_tap(tap), "tap '" + tap.name + "' does not belong to this backbone");
  FeatureMap f;
  f.data = net_->infer_range(normalize(images01), 0, static_cast<size_t>(tap.index));
  f.tap = tap;
  f.domain = domain;
  return f;
}

Tensor BackboneHandle::forward_images(const Tensor& images01) const {
  return net_->infer(normalize(images01));
}

FeatureMap BackboneHandle::forward_from(const FeatureMap& features, const TapPoint& from,
                                        const TapPoint& to) const {
  UFEM_CHECK(has_tap(from) && has_tap(to), "forward_from: tap does not belong to this backbone");
  UFEM_CHECK(features.tap == from, "forward_from: features were extracted at '" +
                                       features.tap.name + "', not '" + from.name + "'");
  UFEM_CHECK(from.index < to.index, "forward_from: tap ordering violated ('" + from.name +
                                        "' is not shallower than '" + to.name + "')");
  FeatureMap out;
  out.data = net_->infer_range(features.data, static_cast<size_t>(from.index),
                               static_cast<size_t>(to.index));
  out.tap = to;
  out.domain = features.domain;
  return out;
}

Tensor BackboneHandle::forward_to_logits(const FeatureMap& features, const TapPoint& from) const {
  UFEM_CHECK(has_tap(from), "forward_to_logits: tap does not belong to this backbone");
  UFEM_CHECK(features.tap == from, "forward_to_logits: features were extracted at '" +
                                       features.tap.name + "', not '" + from.name + "'");
  return net_->infer_range(features.data, static_cast<size_t>(from.index), net_->size());
}

uint64_t BackboneHandle::parameter_checksum() const {
  std::vector<ParamRef> refs;
  net_->collect_params("", refs);
  return params_checksum(refs);
}

std::unique_ptr<Sequential> BackboneHandle::clone_segment(const TapPoint& from,
                                                          const TapPoint& to) const {
  UFEM_CHECK(from.index < to.index, "clone_segment: tap ordering violated");
  auto seg = net_->clone_range(static_cast<size_t>(from.index), static_cast<size_t>(to.index));
  seg->set_trainable(false);
  return seg;
}

std::unique_ptr<Sequential> BackboneHandle::clone_prefix(const TapPoint& to) const {
  auto seg = net_->clone_range(0, static_cast<size_t>(to.index));
  seg->set_trainable(false);
  return seg;
}

AugmentedBackbone::AugmentedBackbone(std::shared_ptr<const BackboneHandle> backbone,
                                     std::shared_ptr<const FeatureTransform> enhancer, TapPoint tap)
    : backbone_(std::move(backbone)), enhancer_(std::move(enhancer)), tap_(std::move(tap)) {}

Tensor AugmentedBackbone::forward_images(const Tensor& images01) const {
  FeatureMap f = backbone_->extract_features(images01, tap_);
  f.data = enhancer_->apply(f.data);
  UFEM_CHECK(f.data.c() == tap_.channels && f.data.h() == tap_.height && f.data.w() == tap_.width,
             "enhancer changed the feature shape at tap '" + tap_.name + "'");
  return backbone_->forward_to_logits(f, tap_);
}

AugmentedBackbone insert_module(std::shared_ptr<const BackboneHandle> backbone,
                                std::shared_ptr<const FeatureTransform> enhancer,
                                const TapPoint& tap) {
  UFEM_CHECK(backbone && enhancer, "insert_module: null backbone or enhancer");
  UFEM_CHECK(backbone->has_tap(tap), "insert_module: tap '" + tap.name + "' not in backbone");
  Tensor probe = Tensor::zeros(1, tap.channels, tap.height, tap.width);
  Tensor out = enhancer->apply(probe);
  if (out.c() != tap.channels || out.h() != tap.height || out.w() != tap.width || out.n() != 1)
    throw InvalidArgument("enhancer does not preserve the feature shape at tap '" + tap.name +
                          "': got " + out.shape_str() + ", expected " + probe.shape_str());
  return AugmentedBackbone(std::move(backbone), std::move(enhancer), tap);
}

const TapPoint& default_insertion_tap(const BackboneHandle& backbone) {
  const int half = backbone.input_resolution() / 2;
  for (const auto& t : backbone.tap_points()) {
    if (t.height <= half && t.width <= half) return t;
  }
  throw InvalidArgument("no tap at or below half the input resolution");
}

}  // namespace ufem
