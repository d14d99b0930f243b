// core/include/ufem/config.hpp

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

#ifndef UFEM_CONFIG_HPP_
#define UFEM_CONFIG_HPP_

#include <optional>
#include <string>

#include "ufem/backbone.hpp"
#include "ufem/data.hpp"
#include "ufem/stage1.hpp"
#include "ufem/stage2.hpp"

namespace ufem {

struct EvalConfig {
  std::string manifest_path;
  std::optional<DegradationSpec> degradation;
  int batch = 32;
  int threads = 1;
};

/// Configuration document with sections {backbone, data, stage1, stage2,
/// eval}. Unknown keys are rejected; defaults mirror the trainer defaults.
/// The fully-resolved document is echoed into every run directory.
struct RunConfig {
  BackboneSpec backbone;
  std::string tap_name;  // empty: the default insertion tap
  std::string clear_manifest_path;
  std::string degraded_manifest_path;
  Stage1Config stage1;
  Stage2Config stage2;
  EvalConfig eval;

  std::string to_json() const;  // fully resolved, stable key order

  /// Parses and validates; any key outside the schema raises InvalidArgument
  /// naming the offending key.
  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_file(const std::string& path);
};

void write_run_config(const RunConfig& config, const std::string& path);

}  // namespace ufem

#endif  // UFEM_CONFIG_HPP_
