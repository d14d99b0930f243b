// core/include/ufem/tensor.hpp

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

#ifndef UFEM_TENSOR_HPP_
#define UFEM_TENSOR_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ufem/error.hpp"

namespace ufem {

/// A dense 4-D double tensor with (batch, channels, height, width) layout,
/// row-major with width fastest. Vectors and matrices are carried with the
/// trailing dims set to 1, e.g. logits are (n, classes, 1, 1).
///
/// All numerics in this library run in double precision; file formats decide
/// separately whether to store float32 or float64 payloads.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w) : n_(n), c_(c), h_(h), w_(w), v_(size_of(n, c, h, w), 0.0) {}

  static Tensor zeros(int n, int c, int h, int w) { return Tensor(n, c, h, w); }

  static Tensor full(int n, int c, int h, int w, double value) {
    Tensor t(n, c, h, w);
    for (auto& x : t.v_) x = value;
    return t;
  }

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }

  int64_t size() const { return static_cast<int64_t>(v_.size()); }
  int64_t sample_size() const { return static_cast<int64_t>(c_) * h_ * w_; }
  int64_t plane() const { return static_cast<int64_t>(h_) * w_; }
  bool empty() const { return v_.empty(); }

  bool same_shape(const Tensor& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  std::string shape_str() const {
    return "(" + std::to_string(n_) + "," + std::to_string(c_) + "," +
           std::to_string(h_) + "," + std::to_string(w_) + ")";
  }

  double& at(int n, int c, int y, int x) { return v_[index(n, c, y, x)]; }
  double at(int n, int c, int y, int x) const { return v_[index(n, c, y, x)]; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  double* sample(int n) { return v_.data() + n * sample_size(); }
  const double* sample(int n) const { return v_.data() + n * sample_size(); }
  double* channel(int n, int c) { return v_.data() + (static_cast<int64_t>(n) * c_ + c) * plane(); }
  const double* channel(int n, int c) const {
    return v_.data() + (static_cast<int64_t>(n) * c_ + c) * plane();
  }

  void fill(double value) { for (auto& x : v_) x = value; }

  void add_(const Tensor& o) {
    UFEM_CHECK(same_shape(o), "tensor add: shape mismatch " + shape_str() + " vs " + o.shape_str());
    for (size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  }

  void axpy_(double a, const Tensor& o) {
    UFEM_CHECK(same_shape(o), "tensor axpy: shape mismatch");
    for (size_t i = 0; i < v_.size(); ++i) v_[i] += a * o.v_[i];
  }

  void scale_(double a) { for (auto& x : v_) x *= a; }

  bool all_finite() const {
    for (double x : v_) if (!std::isfinite(x)) return false;
    return true;
  }

  double min() const {
    double m = v_.empty() ? 0.0 : v_[0];
    for (double x : v_) if (x < m) m = x;
    return m;
  }

  double max() const {
    double m = v_.empty() ? 0.0 : v_[0];
    for (double x : v_) if (x > m) m = x;
    return m;
  }

  double abs_max() const {
    double m = 0.0;
    for (double x : v_) { double a = std::fabs(x); if (a > m) m = a; }
    return m;
  }

  double sum() const {
    double s = 0.0;
    for (double x : v_) s += x;
    return s;
  }

  /// Mean absolute elementwise difference; the L1 reduction used by the
  /// cycle, identity, and content losses.
  static double mean_abs_diff(const Tensor& a, const Tensor& b) {
    UFEM_CHECK(a.same_shape(b), "mean_abs_diff: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    double s = 0.0;
    for (int64_t i = 0; i < a.size(); ++i) s += std::fabs(a.v_[i] - b.v_[i]);
    return a.size() ? s / static_cast<double>(a.size()) : 0.0;
  }

  bool bitwise_equal(const Tensor& o) const {
    if (!same_shape(o)) return false;
    for (size_t i = 0; i < v_.size(); ++i) {
      if (v_[i] != o.v_[i]) return false;
    }
    return true;
  }

  std::vector<double>& raw() { return v_; }
  const std::vector<double>& raw() const { return v_; }

 private:
  static size_t size_of(int n, int c, int h, int w) {
    UFEM_CHECK(n >= 0 && c >= 0 && h >= 0 && w >= 0, "tensor dims must be nonnegative");
    return static_cast<size_t>(n) * c * h * w;
  }

  int64_t index(int n, int c, int y, int x) const {
    return ((static_cast<int64_t>(n) * c_ + c) * h_ + y) * w_ + x;
  }

  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<double> v_;
};

}  // namespace ufem

#endif  // UFEM_TENSOR_HPP_
