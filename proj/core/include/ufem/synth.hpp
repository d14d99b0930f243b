// core/include/ufem/synth.hpp

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

#ifndef UFEM_SYNTH_HPP_
#define UFEM_SYNTH_HPP_

#include <string>

#include "ufem/tensor.hpp"

namespace ufem {

/// Procedural 10-class shape/texture dataset at CIFAR scale. The classes are
/// fixed archetypes (disk, ring, square, frame, triangle, cross, horizontal
/// stripes, vertical stripes, checkerboard, diagonal cross) rendered over
/// gradient backgrounds with jittered position, size, colors, and noise.
/// Everything is a pure function of the seed.
inline constexpr int kSynthClassCount = 10;

struct SynthSpec {
  int per_class = 100;
  int resolution = 32;
  uint64_t seed = 1;
};

/// Renders one image of the given class as a (1,3,r,r) tensor in [0,1].
Tensor render_synth_image(int class_id, uint64_t seed, int resolution);

/// Writes per_class images per class into out_dir/cls00 .. cls09 as .ppm.
void generate_synth_dataset(const SynthSpec& spec, const std::string& out_dir);

}  // namespace ufem

#endif  // UFEM_SYNTH_HPP_
