// core/include/ufem/backbone.hpp

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

#ifndef UFEM_BACKBONE_HPP_
#define UFEM_BACKBONE_HPP_

#include <memory>
#include <string>
#include <vector>

#include "ufem/nn.hpp"
#include "ufem/tensor.hpp"

namespace ufem {

enum class DomainTag { kClear, kDegraded, kEnhancedStage1, kEnhancedStage2 };

std::string domain_tag_name(DomainTag t);

/// A named boundary in the backbone's layer sequence. `index` is the number
/// of layers applied before the boundary, so taps are ordered by depth.
struct TapPoint {
  std::string name;
  int index = 0;
  int channels = 0;
  int height = 0;
  int width = 0;

  bool operator==(const TapPoint& o) const { return name == o.name && index == o.index; }
};

/// Activations read out of (or written back into) a backbone at a tap.
struct FeatureMap {
  Tensor data;  // (batch, channels, height, width)
  TapPoint tap;
  DomainTag domain = DomainTag::kClear;
};

struct BackboneSpec {
  std::string architecture_id = "tinyvgg";
  std::string weights_path;  // empty: the bundled deterministic initialization
  int input_resolution = 32;
};

/// A frozen pretrained classifier with named tap points. Parameters are
/// never updated by any trainer in this toolkit; inference is deterministic
/// and safe for concurrent readers.
class BackboneHandle {
 public:
  const std::string& architecture_id() const { return architecture_id_; }
  int class_count() const { return class_count_; }
  int input_resolution() const { return input_resolution_; }
  const std::vector<TapPoint>& tap_points() const { return taps_; }

  /// Looks a tap up by name; throws InvalidArgument for unknown names.
  const TapPoint& tap(const std::string& name) const;
  bool has_tap(const TapPoint& t) const;

  /// Maps [0,1] images onto the network's input range.
  Tensor normalize(const Tensor& images01) const;

  FeatureMap extract_features(const Tensor& images01, const TapPoint& tap,
                              DomainTag domain = DomainTag::kClear) const;
  Tensor forward_images(const Tensor& images01) const;

  /// Runs the layer suffix (from, to]; from must be shallower than to.
  FeatureMap forward_from(const FeatureMap& features, const TapPoint& from,
                          const TapPoint& to) const;
  Tensor forward_to_logits(const FeatureMap& features, const TapPoint& from) const;

  uint64_t parameter_checksum() const;

  /// Deep-copies the layers between two taps (or from a tap to the logits
  /// head). Trainers backpropagate through such clones without touching the
  /// handle; the clones are created frozen.
  std::unique_ptr<Sequential> clone_segment(const TapPoint& from, const TapPoint& to) const;
  std::unique_ptr<Sequential> clone_prefix(const TapPoint& to) const;

  friend std::shared_ptr<const BackboneHandle> load_backbone(const BackboneSpec& spec);

 private:
  BackboneHandle() = default;

  std::string architecture_id_;
  int class_count_ = 0;
  int input_resolution_ = 0;
  std::vector<TapPoint> taps_;
  std::unique_ptr<Sequential> net_;
};

/// Loads a frozen backbone. Unknown architecture ids and weight files whose
/// tensor names or shapes do not match raise errors naming the offender.
std::shared_ptr<const BackboneHandle> load_backbone(const BackboneSpec& spec);

/// Builds a trainable tinyvgg network (the only bundled architecture:
/// 4 conv blocks of two 3x3 convs + ReLU + maxpool, widths 16/32/64/128,
/// then a linear head; ~0.3M parameters, 10 classes).
std::unique_ptr<Sequential> build_tinyvgg_net(int input_resolution, Rng& init_rng);

/// Tap metadata for tinyvgg at a given input resolution.
std::vector<TapPoint> tinyvgg_taps(int input_resolution);

inline constexpr int kTinyVggClassCount = 10;

/// A shape-preserving transform applied to features at a tap.
class FeatureTransform {
 public:
  virtual ~FeatureTransform() = default;
  virtual Tensor apply(const Tensor& features) const = 0;
  virtual std::string describe() const { return "custom"; }
};

class IdentityTransform : public FeatureTransform {
 public:
  Tensor apply(const Tensor& features) const override { return features; }
  std::string describe() const override { return "identity"; }
};

/// The frozen backbone with an enhancement module spliced in at a tap:
/// logits = DPL(enhance(SPL(x))). Immutable after creation.
class AugmentedBackbone {
 public:
  AugmentedBackbone(std::shared_ptr<const BackboneHandle> backbone,
                    std::shared_ptr<const FeatureTransform> enhancer, TapPoint tap);

  Tensor forward_images(const Tensor& images01) const;
  const TapPoint& tap() const { return tap_; }
  const BackboneHandle& backbone() const { return *backbone_; }

 private:
  std::shared_ptr<const BackboneHandle> backbone_;
  std::shared_ptr<const FeatureTransform> enhancer_;
  TapPoint tap_;
};

/// Validates shape preservation on a probe tensor and returns the augmented
/// model. Shape-changing enhancers are rejected here, not at forward time.
AugmentedBackbone insert_module(std::shared_ptr<const BackboneHandle> backbone,
                                std::shared_ptr<const FeatureTransform> enhancer,
                                const TapPoint& tap);

/// Default insertion tap: the earliest tap whose spatial extent is at most
/// half the input resolution.
const TapPoint& default_insertion_tap(const BackboneHandle& backbone);

}  // namespace ufem

#endif  // UFEM_BACKBONE_HPP_
