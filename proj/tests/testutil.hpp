// tests/testutil.hpp

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

#ifndef UFEM_TESTS_TESTUTIL_HPP_
#define UFEM_TESTS_TESTUTIL_HPP_

#include <algorithm>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ufem/nn.hpp"
#include "ufem/rng.hpp"
#include "ufem/tensor.hpp"

namespace ufem::test {

inline Tensor random_tensor(int n, int c, int h, int w, Rng& rng, double scale = 1.0) {
  Tensor t(n, c, h, w);
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0, scale);
  return t;
}

inline Tensor random_positive_tensor(int n, int c, int h, int w, Rng& rng, double scale = 1.0) {
  Tensor t(n, c, h, w);
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = std::fabs(rng.normal(0.0, scale)) + 0.05;
  return t;
}

/// Scratch directory unique to a test; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() /
            ("ufem_test_" + name + "_" + std::to_string(Rng(42).next_u64() % 100000) + "_" +
             std::to_string(reinterpret_cast<uintptr_t>(this) % 100000));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

struct FdReport {
  double max_rel_err = 0.0;
  int checked = 0;
};

/// Central-difference check of analytic parameter gradients.
/// `loss` evaluates the objective without leaving caches behind;
/// `compute_grads` zeroes grads and runs one forward+backward.
/// Probes the `probes` largest-magnitude gradient entries plus a few random
/// ones; relative error is |fd - an| / max(|fd|, |an|, 1e-8).
inline FdReport fd_check(std::vector<ParamRef> params, const std::function<double()>& loss,
                         const std::function<void()>& compute_grads, int probes, uint64_t seed,
                         double h = 1e-5) {
  compute_grads();
  struct Entry {
    size_t param;
    int64_t index;
    double analytic;
  };
  std::vector<Entry> entries;
  for (size_t p = 0; p < params.size(); ++p) {
    for (int64_t i = 0; i < params[p].grad->size(); ++i) {
      entries.push_back({p, i, params[p].grad->data()[i]});
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return std::fabs(a.analytic) > std::fabs(b.analytic); });

  std::vector<Entry> picked;
  const int top = std::min<int>(probes * 3 / 4, static_cast<int>(entries.size()));
  for (int i = 0; i < top; ++i) picked.push_back(entries[static_cast<size_t>(i)]);
  Rng rng(seed);
  while (static_cast<int>(picked.size()) < probes && picked.size() < entries.size()) {
    picked.push_back(entries[static_cast<size_t>(
        rng.uniform_int(static_cast<int64_t>(entries.size())))]);
  }

  FdReport report;
  for (const auto& e : picked) {
    double* theta = params[e.param].value->data() + e.index;
    const double keep = *theta;
    const double step = h * std::max(1.0, std::fabs(keep));
    *theta = keep + step;
    const double up = loss();
    *theta = keep - step;
    const double down = loss();
    *theta = keep;
    const double fd = (up - down) / (2.0 * step);
    const double rel =
        std::fabs(fd - e.analytic) / std::max({std::fabs(fd), std::fabs(e.analytic), 1e-8});
    report.max_rel_err = std::max(report.max_rel_err, rel);
    ++report.checked;
  }
  return report;
}

}  // namespace ufem::test

#endif  // UFEM_TESTS_TESTUTIL_HPP_
