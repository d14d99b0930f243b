// core/include/ufem/serialize.hpp

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

#ifndef UFEM_SERIALIZE_HPP_
#define UFEM_SERIALIZE_HPP_

#include <string>
#include <utility>
#include <vector>

#include "ufem/tensor.hpp"

namespace ufem {

/// Payload element type of a named-tensor container. Backbone weight files
/// use Float32 (the interchange convention); training checkpoints use
/// Float64 so that save/load round-trips reproduce forward outputs bitwise.
enum class Dtype { kFloat32, kFloat64 };

std::string dtype_name(Dtype d);
Dtype dtype_from_name(const std::string& s);

/// In-memory form of a named-tensor container: an ordered list of named
/// tensors plus free-form JSON metadata. The byte layout is documented in
/// docs/formats.md (magic, JSON manifest, raw little-endian payload, FNV-1a
/// digest trailer).
struct NamedTensors {
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::string architecture_id;  // empty when not applicable
  std::string meta_json = "{}"; // must parse as a JSON object

  const Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
      if (n == name) return &t;
    }
    return nullptr;
  }
};

void write_container(const std::string& path, const NamedTensors& nt, Dtype dtype);
NamedTensors read_container(const std::string& path);

}  // namespace ufem

#endif  // UFEM_SERIALIZE_HPP_
