// core/include/ufem/nets.hpp

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

#ifndef UFEM_NETS_HPP_
#define UFEM_NETS_HPP_

#include <memory>
#include <string>

#include "ufem/nn.hpp"

namespace ufem {

enum class GeneratorArch { kFlatResidual, kUnet };
enum class GeneratorInit { kNearIdentity, kStandard };

std::string generator_arch_name(GeneratorArch a);
GeneratorArch generator_arch_from_name(const std::string& s);

/// Shape-preserving feature translator description. flat_residual is a chain
/// of residual blocks at the input channel count (the default for
/// classification-scale features); unet downsamples down_levels times with
/// skip connections (for larger spatial features). Output channels always
/// equal in_channels.
struct GeneratorSpec {
  GeneratorArch architecture = GeneratorArch::kFlatResidual;
  int in_channels = 0;
  int base_width = 64;
  int residual_blocks = 4;  // flat_residual
  int down_levels = 2;      // unet, 1..3
  GeneratorInit init = GeneratorInit::kNearIdentity;
  // Declared input spatial size; 0 means unknown. When set, unet builds
  // validate that down_levels keeps the bottleneck at >= 1 pixel.
  int input_height = 0;
  int input_width = 0;

  std::string to_json() const;
  static GeneratorSpec from_json(const std::string& json_text);
};

/// A parameterized feature-to-feature translator. Forward is shape
/// preserving; near_identity initialization makes forward(f) == f exactly
/// (the last conv of every residual path starts at zero).
class Generator {
 public:
  Generator(GeneratorSpec spec, uint64_t init_seed);

  const GeneratorSpec& spec() const { return spec_; }

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  Tensor infer(const Tensor& x) const;

  std::vector<ParamRef> params() { return net_->params(); }
  int64_t parameter_count();
  void set_trainable(bool t) { net_->set_trainable(t); }
  uint64_t checksum();
  void clear_state() { net_->clear_state(); }

  NamedTensors snapshot(const std::string& prefix = "") { return snapshot_params(*net_, prefix); }
  void load(const NamedTensors& nt, const std::string& prefix = "") {
    load_params(*net_, nt, prefix);
  }

  std::unique_ptr<Generator> clone() const;

 private:
  void validate_input(const Tensor& x) const;

  GeneratorSpec spec_;
  std::unique_ptr<Layer> net_;
};

std::unique_ptr<Generator> build_generator(const GeneratorSpec& spec, uint64_t init_seed);

/// PatchGAN discriminator description: `layers` stride-2 4x4 convolutions
/// (instance-normalized after the first) with LeakyReLU, then a stride-1
/// 3x3 conv to a 1-channel patch logit map. No output activation.
struct DiscriminatorSpec {
  int in_channels = 0;
  int layers = 3;
  int base_width = 64;
};

class Discriminator {
 public:
  Discriminator(DiscriminatorSpec spec, uint64_t init_seed);

  const DiscriminatorSpec& spec() const { return spec_; }

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gy);
  Tensor infer(const Tensor& x) const;

  std::vector<ParamRef> params() { return net_->params(); }
  void set_trainable(bool t) { net_->set_trainable(t); }
  void clear_state() { net_->clear_state(); }

  NamedTensors snapshot(const std::string& prefix = "") { return snapshot_params(*net_, prefix); }
  void load(const NamedTensors& nt, const std::string& prefix = "") {
    load_params(*net_, nt, prefix);
  }

  /// Patch-logit spatial extent for a given input extent.
  static int logit_extent(int input_extent, int layers);

 private:
  DiscriminatorSpec spec_;
  std::unique_ptr<Sequential> net_;
};

std::unique_ptr<Discriminator> build_discriminator(const DiscriminatorSpec& spec,
                                                   uint64_t init_seed);

}  // namespace ufem

#endif  // UFEM_NETS_HPP_
