// core/include/ufem/image.hpp

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

#ifndef UFEM_IMAGE_HPP_
#define UFEM_IMAGE_HPP_

#include <string>
#include <vector>

#include "ufem/tensor.hpp"

namespace ufem {

/// Images are (1, 3, h, w) tensors with values in [0, 1]. On disk they are
/// binary PPM (P6, 8-bit); decoding maps byte v to v/255.
Tensor read_ppm(const std::string& path);

/// Writes canonical P6 bytes (deterministic for a given tensor). Values are
/// clamped to [0, 1] and quantized with round(v * 255).
void write_ppm(const std::string& path, const Tensor& image);

/// Stacks single images (1,3,h,w) into a batch (n,3,h,w).
Tensor stack_images(const std::vector<Tensor>& images);

}  // namespace ufem

#endif  // UFEM_IMAGE_HPP_
