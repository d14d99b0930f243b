// core/include/ufem/dcp.hpp

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

#ifndef UFEM_DCP_HPP_
#define UFEM_DCP_HPP_

#include <array>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ufem/backbone.hpp"
#include "ufem/data.hpp"

namespace ufem {

enum class GramNormalization { kRaw, kPerPixel };

/// Channel correlation matrix G = F F^T of one feature, where F flattens the
/// channels row-wise over spatial positions (C x H*W). Symmetric positive
/// semidefinite by construction.
struct GramMatrix {
  Eigen::MatrixXd data;
  TapPoint tap;
  GramNormalization normalization = GramNormalization::kRaw;
};

/// Strict upper triangle of a Gram matrix in row-major order; the compact
/// degradation fingerprint used for embeddings.
struct CorrelationVector {
  std::vector<double> data;
  TapPoint source_tap;
};

/// Per-channel fraction of exactly-zero responses, one vector per sample.
std::vector<std::vector<double>> channel_sparsity(const FeatureMap& feature);

/// Mean of channel_sparsity over all samples and channels.
double mean_sparsity(const FeatureMap& feature);

/// Gram matrix of a single (batch of one) feature.
GramMatrix gram_matrix(const FeatureMap& feature,
                       GramNormalization normalization = GramNormalization::kPerPixel);

/// Gram matrix of sample `index` within a batched tensor.
Eigen::MatrixXd gram_of_sample(const Tensor& features, int index,
                               GramNormalization normalization = GramNormalization::kRaw);

/// Row-major strict upper triangle (i < j); the diagonal is excluded unless
/// include_diagonal is set.
CorrelationVector upper_triangle(const GramMatrix& g, bool include_diagonal = false);

/// Deterministic 2-D embedding of >= 10 equal-dimension vectors: an exact
/// t-SNE with fixed perplexity 30 (clamped to (n-1)/3 for small inputs) and
/// a fixed iteration budget.
std::vector<std::array<double, 2>> embed_2d(const std::vector<std::vector<double>>& vectors,
                                            uint64_t seed);

/// Mean silhouette coefficient under Euclidean distance, in [-1, 1].
/// Requires >= 2 labels with >= 2 points each.
double separability_score(const std::vector<std::vector<double>>& vectors,
                          const std::vector<int>& labels);

struct DCPSetStats {
  std::string name;
  double mean_sparsity = 0.0;
  std::vector<double> per_channel_sparsity;  // averaged over images
};

/// Deep-channel-prior evidence for a collection of labeled image sets: the
/// separability of raw flattened features versus channel-correlation vectors
/// in a common 2-D embedding, plus sparsity summaries.
struct DCPReport {
  std::string tap_name;
  std::vector<DCPSetStats> sets;
  std::vector<int> set_labels;  // per embedded point
  std::vector<std::array<double, 2>> raw_embedding;
  std::vector<std::array<double, 2>> corr_embedding;
  double raw_separability = 0.0;   // silhouette of the 2-D embedding
  double corr_separability = 0.0;
  double raw_separability_highdim = 0.0;   // silhouette before embedding
  double corr_separability_highdim = 0.0;
  bool include_diagonal = false;
};

DCPReport dcp_report(const BackboneHandle& backbone, const TapPoint& tap,
                     const std::vector<std::pair<std::string, DatasetManifest>>& image_sets,
                     uint64_t seed, bool include_diagonal = false);

/// Structured-text (JSON) serialization of the report.
void write_dcp_report(const DCPReport& report, const std::string& path);

}  // namespace ufem

#endif  // UFEM_DCP_HPP_
