// core/src/dcp.cpp

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

#include "ufem/dcp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "ufem/image.hpp"
#include "ufem/rng.hpp"

namespace ufem {

std::vector<std::vector<double>> channel_sparsity(const FeatureMap& feature) {
  const Tensor& t = feature.data;
  UFEM_CHECK(t.n() >= 1, "channel_sparsity: empty feature");
  std::vector<std::vector<double>> out(static_cast<size_t>(t.n()));
  const int64_t plane = t.plane();
  for (int s = 0; s < t.n(); ++s) {
    out[s].resize(static_cast<size_t>(t.c()));
    for (int c = 0; c < t.c(); ++c) {
      const double* p = t.channel(s, c);
      int64_t zeros = 0;
      for (int64_t i = 0; i < plane; ++i) {
        if (p[i] == 0.0) ++zeros;
      }
      out[s][c] = static_cast<double>(zeros) / static_cast<double>(plane);
    }
  }
  return out;
}

double mean_sparsity(const FeatureMap& feature) {
  const auto per_sample = channel_sparsity(feature);
  double acc = 0.0;
  size_t count = 0;
  for (const auto& v : per_sample) {
    for (double x : v) {
      acc += x;
      ++count;
    }
  }
  return count ? acc / static_cast<double>(count) : 0.0;
}

Eigen::MatrixXd gram_of_sample(const Tensor& features, int index, GramNormalization normalization) {
  UFEM_CHECK(index >= 0 && index < features.n(), "gram_of_sample: index out of range");
  const int c = features.c();
  const int64_t plane = features.plane();
  Eigen::Map<const Eigen::MatrixXd> m(features.sample(index), plane, c);
  // Rank update fills one triangle; mirroring it makes symmetry exact by
  // construction (a general product can differ in the last ulp across the
  // diagonal).
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(c, c);
  g.selfadjointView<Eigen::Lower>().rankUpdate(m.transpose());
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  if (normalization == GramNormalization::kPerPixel) g /= static_cast<double>(plane);
  return g;
}

GramMatrix gram_matrix(const FeatureMap& feature, GramNormalization normalization) {
  UFEM_CHECK(feature.data.n() == 1, "gram_matrix expects a single feature (batch of one); got " +
                                        feature.data.shape_str());
  GramMatrix g;
  g.data = gram_of_sample(feature.data, 0, normalization);
  g.tap = feature.tap;
  g.normalization = normalization;
  return g;
}

CorrelationVector upper_triangle(const GramMatrix& g, bool include_diagonal) {
  const auto rows = g.data.rows();
  UFEM_CHECK(g.data.cols() == rows, "upper_triangle: matrix is not square");
  CorrelationVector v;
  v.source_tap = g.tap;
  v.data.reserve(static_cast<size_t>(rows * (rows - 1) / 2 + (include_diagonal ? rows : 0)));
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = include_diagonal ? i : i + 1; j < rows; ++j) {
      v.data.push_back(g.data(i, j));
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Exact t-SNE

namespace {

// Conditional probabilities for one point via binary search over the
// Gaussian bandwidth until the row entropy matches log(perplexity).
void tsne_row(const Eigen::MatrixXd& d2, Eigen::Index i, double perplexity, Eigen::MatrixXd& p) {
  const Eigen::Index n = d2.rows();
  double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
  const double target = std::log(perplexity);
  std::vector<double> row(static_cast<size_t>(n), 0.0);
  for (int it = 0; it < 64; ++it) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      row[static_cast<size_t>(j)] = j == i ? 0.0 : std::exp(-beta * d2(i, j));
      sum += row[static_cast<size_t>(j)];
    }
    if (sum <= 0.0) {
      // Degenerate row (all identical points): uniform fallback.
      for (Eigen::Index j = 0; j < n; ++j)
        row[static_cast<size_t>(j)] = j == i ? 0.0 : 1.0 / static_cast<double>(n - 1);
      break;
    }
    double entropy = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double pj = row[static_cast<size_t>(j)] / sum;
      row[static_cast<size_t>(j)] = pj;
      if (pj > 1e-300) entropy -= pj * std::log(pj);
    }
    const double diff = entropy - target;
    if (std::fabs(diff) < 1e-5) break;
    if (diff > 0.0) {
      beta_lo = beta;
      beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
    } else {
      beta_hi = beta;
      beta = beta_lo == 0.0 ? beta / 2.0 : 0.5 * (beta + beta_lo);
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) p(i, j) = row[static_cast<size_t>(j)];
}

}  // namespace

std::vector<std::array<double, 2>> embed_2d(const std::vector<std::vector<double>>& vectors,
                                            uint64_t seed) {
  const Eigen::Index n = static_cast<Eigen::Index>(vectors.size());
  UFEM_CHECK(n >= 10, "embed_2d needs at least 10 vectors, got " + std::to_string(n));
  const size_t dim = vectors.front().size();
  for (const auto& v : vectors)
    UFEM_CHECK(v.size() == dim, "embed_2d: vectors have inconsistent dimensionality");

  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (size_t j = 0; j < dim; ++j) x(i, static_cast<Eigen::Index>(j)) = vectors[static_cast<size_t>(i)][j];
  }

  // Pairwise squared distances.
  Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = sq.replicate(1, n) + sq.transpose().replicate(n, 1) - 2.0 * x * x.transpose();
  d2 = d2.cwiseMax(0.0);

  const double perplexity = std::min(30.0, static_cast<double>(n - 1) / 3.0);
  Eigen::MatrixXd p(n, n);
  for (Eigen::Index i = 0; i < n; ++i) tsne_row(d2, i, perplexity, p);
  Eigen::MatrixXd pj = (p + p.transpose()) / (2.0 * static_cast<double>(n));
  pj = pj.cwiseMax(1e-12);

  Rng rng(Rng::seed_mix(seed, 0x74534e45ull));
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i, 0) = rng.normal(0.0, 1e-4);
    y(i, 1) = rng.normal(0.0, 1e-4);
  }

  const int iters = 500;
  const double lr = 200.0;
  Eigen::MatrixXd vel = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd grad(n, 2), q(n, n);

  for (int it = 0; it < iters; ++it) {
    const double exaggeration = it < 100 ? 12.0 : 1.0;
    const double momentum = it < 250 ? 0.5 : 0.8;

    double qsum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      q(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double dy0 = y(i, 0) - y(j, 0), dy1 = y(i, 1) - y(j, 1);
        const double t = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
        q(i, j) = t;
        q(j, i) = t;
        qsum += 2.0 * t;
      }
    }
    qsum = std::max(qsum, 1e-12);

    grad.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double t = q(i, j);
        const double mult = (exaggeration * pj(i, j) - t / qsum) * t;
        grad(i, 0) += 4.0 * mult * (y(i, 0) - y(j, 0));
        grad(i, 1) += 4.0 * mult * (y(i, 1) - y(j, 1));
      }
    }

    for (Eigen::Index i = 0; i < n; ++i) {
      for (int d = 0; d < 2; ++d) {
        gains(i, d) = (grad(i, d) > 0.0) == (vel(i, d) > 0.0) ? gains(i, d) * 0.8
                                                              : gains(i, d) + 0.2;
        gains(i, d) = std::max(gains(i, d), 0.01);
        vel(i, d) = momentum * vel(i, d) - lr * gains(i, d) * grad(i, d);
        y(i, d) += vel(i, d);
      }
    }
    const Eigen::RowVector2d mean = y.colwise().mean();
    y.rowwise() -= mean;
  }

  std::vector<std::array<double, 2>> out(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<size_t>(i)] = {y(i, 0), y(i, 1)};
  return out;
}

// ---------------------------------------------------------------------------
// Silhouette

double separability_score(const std::vector<std::vector<double>>& vectors,
                          const std::vector<int>& labels) {
  const size_t n = vectors.size();
  UFEM_CHECK(n >= 4 && labels.size() == n, "separability_score: need >= 4 labeled points");

  std::vector<int> uniq(labels);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  UFEM_CHECK(uniq.size() >= 2, "separability_score: need at least 2 distinct labels");
  std::vector<size_t> counts(uniq.size(), 0);
  auto label_pos = [&uniq](int l) {
    return static_cast<size_t>(std::lower_bound(uniq.begin(), uniq.end(), l) - uniq.begin());
  };
  for (int l : labels) ++counts[label_pos(l)];
  for (size_t c : counts)
    UFEM_CHECK(c >= 2, "separability_score: every label needs at least 2 points");

  const size_t dim = vectors.front().size();
  auto dist = [dim](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t k = 0; k < dim; ++k) {
      const double d = a[k] - b[k];
      s += d * d;
    }
    return std::sqrt(s);
  };

  double total = 0.0;
  std::vector<double> sums(uniq.size());
  for (size_t i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      sums[label_pos(labels[j])] += dist(vectors[i], vectors[j]);
    }
    const size_t own = label_pos(labels[i]);
    const double a = sums[own] / static_cast<double>(counts[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (size_t g = 0; g < uniq.size(); ++g) {
      if (g == own) continue;
      b = std::min(b, sums[g] / static_cast<double>(counts[g]));
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Report

DCPReport dcp_report(const BackboneHandle& backbone, const TapPoint& tap,
                     const std::vector<std::pair<std::string, DatasetManifest>>& image_sets,
                     uint64_t seed, bool include_diagonal) {
  UFEM_CHECK(image_sets.size() >= 2, "dcp_report needs at least 2 image sets");

  DCPReport report;
  report.tap_name = tap.name;
  report.include_diagonal = include_diagonal;

  std::vector<std::vector<double>> raw_vectors, corr_vectors;
  for (size_t s = 0; s < image_sets.size(); ++s) {
    const auto& [name, manifest] = image_sets[s];
    const Tensor images = load_all_images(manifest);
    const FeatureMap features = backbone.extract_features(images, tap);

    DCPSetStats stats;
    stats.name = name;
    const auto sparsity = channel_sparsity(features);
    stats.per_channel_sparsity.assign(static_cast<size_t>(features.data.c()), 0.0);
    for (const auto& per_image : sparsity) {
      for (size_t c = 0; c < per_image.size(); ++c) stats.per_channel_sparsity[c] += per_image[c];
    }
    for (double& v : stats.per_channel_sparsity) v /= static_cast<double>(sparsity.size());
    stats.mean_sparsity = mean_sparsity(features);
    report.sets.push_back(std::move(stats));

    for (int i = 0; i < features.data.n(); ++i) {
      raw_vectors.emplace_back(features.data.sample(i),
                               features.data.sample(i) + features.data.sample_size());
      const Eigen::MatrixXd g = gram_of_sample(features.data, i, GramNormalization::kPerPixel);
      GramMatrix gm{g, tap, GramNormalization::kPerPixel};
      corr_vectors.push_back(upper_triangle(gm, include_diagonal).data);
      report.set_labels.push_back(static_cast<int>(s));
    }
  }

  Rng rng(seed);
  report.raw_embedding = embed_2d(raw_vectors, rng.fork(1).state());
  report.corr_embedding = embed_2d(corr_vectors, rng.fork(2).state());

  auto to_vecs = [](const std::vector<std::array<double, 2>>& pts) {
    std::vector<std::vector<double>> v;
    v.reserve(pts.size());
    for (const auto& p : pts) v.push_back({p[0], p[1]});
    return v;
  };
  report.raw_separability = separability_score(to_vecs(report.raw_embedding), report.set_labels);
  report.corr_separability = separability_score(to_vecs(report.corr_embedding), report.set_labels);
  report.raw_separability_highdim = separability_score(raw_vectors, report.set_labels);
  report.corr_separability_highdim = separability_score(corr_vectors, report.set_labels);
  return report;
}

void write_dcp_report(const DCPReport& report, const std::string& path) {
  nlohmann::json j;
  j["tap"] = report.tap_name;
  j["include_diagonal"] = report.include_diagonal;
  j["raw_separability"] = report.raw_separability;
  j["corr_separability"] = report.corr_separability;
  j["raw_separability_highdim"] = report.raw_separability_highdim;
  j["corr_separability_highdim"] = report.corr_separability_highdim;
  j["sets"] = nlohmann::json::array();
  for (const auto& s : report.sets) {
    nlohmann::json js;
    js["name"] = s.name;
    js["mean_sparsity"] = s.mean_sparsity;
    js["per_channel_sparsity"] = s.per_channel_sparsity;
    j["sets"].push_back(js);
  }
  j["set_labels"] = report.set_labels;
  auto dump_points = [](const std::vector<std::array<double, 2>>& pts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : pts) arr.push_back({p[0], p[1]});
    return arr;
  };
  j["raw_embedding"] = dump_points(report.raw_embedding);
  j["corr_embedding"] = dump_points(report.corr_embedding);

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << j.dump(2) << "\n";
}

}  // namespace ufem
