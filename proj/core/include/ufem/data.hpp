// core/include/ufem/data.hpp

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

#ifndef UFEM_DATA_HPP_
#define UFEM_DATA_HPP_

#include <optional>
#include <string>
#include <vector>

#include "ufem/tensor.hpp"

namespace ufem {

enum class DegradationKind { kFog, kMotionBlur, kLowLight };

std::string degradation_kind_name(DegradationKind k);
DegradationKind degradation_kind_from_name(const std::string& s);

struct DegradationSpec {
  DegradationKind kind = DegradationKind::kFog;
  int severity = 3;  // 1..5
  uint64_t seed = 0;
};

// Severity parameter tables (this artifact's convention).
double fog_transmission(int severity);       // {0.85, 0.70, 0.55, 0.40, 0.25}
int motion_blur_length(int severity);        // {3, 5, 9, 15, 21}
double low_light_gamma(int severity);        // {1.5, 2.0, 2.5, 3.0, 3.5}

/// out = t*J + (1-t)*A with airlight A = 1, clipped to [0,1].
Tensor apply_fog(const Tensor& image, const DegradationSpec& spec);

/// Convolution with a normalized linear kernel; length set by severity, the
/// angle drawn once from the stream seeded by spec.seed; borders are
/// symmetric-reflect padded.
Tensor apply_motion_blur(const Tensor& image, const DegradationSpec& spec);

/// Same, with the angle given explicitly (radians).
Tensor apply_motion_blur_angle(const Tensor& image, int severity, double angle);

/// out = in^gamma.
Tensor apply_low_light(const Tensor& image, const DegradationSpec& spec);

Tensor apply_degradation(const Tensor& image, const DegradationSpec& spec);

/// L x L row-major kernel rasterizing a line of the given length through the
/// center at the given angle; entries sum to 1.
std::vector<double> motion_blur_kernel(int length, double angle);

// ---------------------------------------------------------------------------
// Manifests

struct ManifestEntry {
  std::string path;  // relative to the manifest root
  int label = 0;
  std::string domain = "clear";  // "clear" | "degraded"
  std::optional<DegradationSpec> degradation;
};

/// Immutable after load. One record per line on disk, tab-separated fields
/// (path, label, domain, kind, severity, seed), paths relative to root.
struct DatasetManifest {
  std::string root;
  std::vector<ManifestEntry> entries;

  size_t size() const { return entries.size(); }
  std::string abspath(size_t i) const;
};

struct BuildManifestResult {
  DatasetManifest manifest;
  int skipped = 0;  // unreadable images skipped with a warning count
};

/// Scans root's class subdirectories (sorted lexicographically; subdirectory
/// order defines the labels) for .ppm images. Entry order is lexicographic
/// by path, so re-running on the same tree gives a byte-identical manifest.
BuildManifestResult build_manifest(const std::string& root, const std::string& domain,
                                   const std::optional<DegradationSpec>& degradation = std::nullopt);

void write_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

// ---------------------------------------------------------------------------
// Unpaired sampling

/// Two independently drawn image batches; no index correspondence implied.
struct UnpairedBatch {
  Tensor clear_images;
  Tensor degraded_images;
  std::vector<size_t> clear_indices;
  std::vector<size_t> degraded_indices;
};

/// Draws batch indices for both sides from streams forked off the seed; the
/// clear-side draws depend only on the seed and the clear manifest size.
UnpairedBatch sample_unpaired_batch(const DatasetManifest& clear, const DatasetManifest& degraded,
                                    int batch, uint64_t seed, bool with_replacement = true);

/// Index-only variant (no decoding); used by tests and feature-cached loops.
void sample_unpaired_indices(size_t clear_size, size_t degraded_size, int batch, uint64_t seed,
                             bool with_replacement, std::vector<size_t>* clear_idx,
                             std::vector<size_t>* degraded_idx);

/// Loads and stacks every image of a manifest in entry order.
Tensor load_all_images(const DatasetManifest& m);

/// Applies one degradation to every .ppm under in_dir, mirroring the tree
/// into out_dir. The per-image seed mixes the base seed with the relative
/// path, so re-runs are byte-identical regardless of traversal order.
/// Returns the number of images written.
int degrade_tree(const std::string& in_dir, const std::string& out_dir, DegradationKind kind,
                 int severity, uint64_t seed);

}  // namespace ufem

#endif  // UFEM_DATA_HPP_
