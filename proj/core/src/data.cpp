// core/src/data.cpp

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

#include "ufem/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ufem/error.hpp"
#include "ufem/image.hpp"
#include "ufem/rng.hpp"

namespace fs = std::filesystem;

namespace ufem {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_severity(int severity) {
  UFEM_CHECK(severity >= 1 && severity <= 5,
             "degradation severity must be in [1,5], got " + std::to_string(severity));
}

// Symmetric reflection: ..., 1, 0 | 0, 1, ..., n-1 | n-1, n-2, ...
int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace

std::string degradation_kind_name(DegradationKind k) {
  switch (k) {
    case DegradationKind::kFog: return "fog";
    case DegradationKind::kMotionBlur: return "motion_blur";
    case DegradationKind::kLowLight: return "low_light";
  }
  return "unknown";
}

DegradationKind degradation_kind_from_name(const std::string& s) {
  if (s == "fog") return DegradationKind::kFog;
  if (s == "motion_blur") return DegradationKind::kMotionBlur;
  if (s == "low_light") return DegradationKind::kLowLight;
  throw InvalidArgument("unknown degradation kind '" + s + "'");
}

double fog_transmission(int severity) {
  check_severity(severity);
  constexpr double t[5] = {0.85, 0.70, 0.55, 0.40, 0.25};
  return t[severity - 1];
}

int motion_blur_length(int severity) {
  check_severity(severity);
  constexpr int len[5] = {3, 5, 9, 15, 21};
  return len[severity - 1];
}

double low_light_gamma(int severity) {
  check_severity(severity);
  constexpr double g[5] = {1.5, 2.0, 2.5, 3.0, 3.5};
  return g[severity - 1];
}

Tensor apply_fog(const Tensor& image, const DegradationSpec& spec) {
  UFEM_CHECK(spec.kind == DegradationKind::kFog, "apply_fog called with non-fog spec");
  const double t = fog_transmission(spec.severity);
  Tensor out = image;
  for (int64_t i = 0; i < out.size(); ++i) {
    double v = t * out.data()[i] + (1.0 - t);  // airlight A = 1
    out.data()[i] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  }
  return out;
}

std::vector<double> motion_blur_kernel(int length, double angle) {
  UFEM_CHECK(length >= 1 && length % 2 == 1, "motion blur kernel length must be odd and positive");
  std::vector<double> k(static_cast<size_t>(length) * length, 0.0);
  const double cx = (length - 1) / 2.0;
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (int i = 0; i < length; ++i) {
    const double t = i - cx;
    const double y = cx + t * sa;
    const double x = cx + t * ca;
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const double fy = y - y0, fx = x - x0;
    const double w[4] = {(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx};
    const int yy[4] = {y0, y0, y0 + 1, y0 + 1};
    const int xx[4] = {x0, x0 + 1, x0, x0 + 1};
    for (int j = 0; j < 4; ++j) {
      if (yy[j] >= 0 && yy[j] < length && xx[j] >= 0 && xx[j] < length && w[j] > 0.0) {
        k[static_cast<size_t>(yy[j]) * length + xx[j]] += w[j];
      }
    }
  }
  double s = 0.0;
  for (double v : k) s += v;
  for (double& v : k) v /= s;
  return k;
}

Tensor apply_motion_blur_angle(const Tensor& image, int severity, double angle) {
  const int L = motion_blur_length(severity);
  const std::vector<double> kern = motion_blur_kernel(L, angle);
  const int r = (L - 1) / 2;
  Tensor out(image.n(), image.c(), image.h(), image.w());
  for (int s = 0; s < image.n(); ++s) {
    for (int c = 0; c < image.c(); ++c) {
      const double* src = image.channel(s, c);
      double* dst = out.channel(s, c);
      for (int y = 0; y < image.h(); ++y) {
        for (int x = 0; x < image.w(); ++x) {
          double acc = 0.0;
          for (int ky = 0; ky < L; ++ky) {
            const int yy = reflect_index(y + ky - r, image.h());
            for (int kx = 0; kx < L; ++kx) {
              const int xx = reflect_index(x + kx - r, image.w());
              acc += kern[static_cast<size_t>(ky) * L + kx] * src[yy * image.w() + xx];
            }
          }
          dst[y * image.w() + x] = acc;
        }
      }
    }
  }
  return out;
}

Tensor apply_motion_blur(const Tensor& image, const DegradationSpec& spec) {
  UFEM_CHECK(spec.kind == DegradationKind::kMotionBlur, "apply_motion_blur called with wrong kind");
  Rng rng(spec.seed);
  const double angle = rng.uniform(0.0, kPi);
  return apply_motion_blur_angle(image, spec.severity, angle);
}

Tensor apply_low_light(const Tensor& image, const DegradationSpec& spec) {
  UFEM_CHECK(spec.kind == DegradationKind::kLowLight, "apply_low_light called with wrong kind");
  const double gamma = low_light_gamma(spec.severity);
  Tensor out = image;
  for (int64_t i = 0; i < out.size(); ++i) {
    const double v = out.data()[i];
    out.data()[i] = v <= 0.0 ? 0.0 : std::pow(v, gamma);
  }
  return out;
}

Tensor apply_degradation(const Tensor& image, const DegradationSpec& spec) {
  switch (spec.kind) {
    case DegradationKind::kFog: return apply_fog(image, spec);
    case DegradationKind::kMotionBlur: return apply_motion_blur(image, spec);
    case DegradationKind::kLowLight: return apply_low_light(image, spec);
  }
  throw InvalidArgument("unknown degradation kind");
}

// ---------------------------------------------------------------------------
// Manifests

std::string DatasetManifest::abspath(size_t i) const {
  return (fs::path(root) / entries.at(i).path).string();
}

BuildManifestResult build_manifest(const std::string& root, const std::string& domain,
                                   const std::optional<DegradationSpec>& degradation) {
  UFEM_CHECK(domain == "clear" || domain == "degraded", "domain must be 'clear' or 'degraded'");
  if (!fs::is_directory(root)) throw IoError("manifest root '" + root + "' is not a directory");

  std::vector<std::string> class_dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw IoError("manifest root '" + root + "' has no class subdirectories");

  BuildManifestResult result;
  result.manifest.root = root;
  for (size_t label = 0; label < class_dirs.size(); ++label) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(fs::path(root) / class_dirs[label])) {
      if (e.is_regular_file() && e.path().extension() == ".ppm") {
        files.push_back((fs::path(class_dirs[label]) / e.path().filename()).generic_string());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      // Validate the header up front; undecodable entries are skipped.
      try {
        read_ppm((fs::path(root) / f).string());
      } catch (const IoError&) {
        ++result.skipped;
        continue;
      }
      ManifestEntry entry;
      entry.path = f;
      entry.label = static_cast<int>(label);
      entry.domain = domain;
      entry.degradation = degradation;
      result.manifest.entries.push_back(std::move(entry));
    }
  }
  if (result.manifest.entries.empty())
    throw IoError("manifest root '" + root + "' contains no readable .ppm images");
  return result;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
  std::ostringstream out;
  out << "#ufem-manifest v1\n";
  out << "#root\t" << m.root << "\n";
  for (const auto& e : m.entries) {
    out << e.path << "\t" << e.label << "\t" << e.domain << "\t";
    if (e.degradation) {
      out << degradation_kind_name(e.degradation->kind) << "\t" << e.degradation->severity << "\t"
          << e.degradation->seed << "\n";
    } else {
      out << "-\t-\t-\n";
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  const std::string s = out.str();
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!f) throw IoError("short write to '" + path + "'");
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest '" + path + "'");
  std::string line;
  if (!std::getline(f, line) || line != "#ufem-manifest v1")
    throw IoError("'" + path + "' is not a ufem manifest");
  DatasetManifest m;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line.rfind("#root\t", 0) == 0) {
      m.root = line.substr(6);
      continue;
    }
    if (line[0] == '#') continue;
    std::vector<std::string> fields;
    size_t pos = 0;
    while (true) {
      const size_t tab = line.find('\t', pos);
      fields.push_back(line.substr(pos, tab == std::string::npos ? tab : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (fields.size() != 6) throw IoError("malformed manifest record in '" + path + "': " + line);
    ManifestEntry e;
    e.path = fields[0];
    e.label = std::stoi(fields[1]);
    e.domain = fields[2];
    if (fields[3] != "-") {
      DegradationSpec d;
      d.kind = degradation_kind_from_name(fields[3]);
      d.severity = std::stoi(fields[4]);
      d.seed = std::stoull(fields[5]);
      e.degradation = d;
    }
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) throw IoError("manifest '" + path + "' has no entries");
  for (size_t i = 0; i < m.entries.size(); ++i) {
    if (!fs::exists(m.abspath(i)))
      throw IoError("manifest '" + path + "' references missing image '" + m.abspath(i) + "'");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Unpaired sampling

void sample_unpaired_indices(size_t clear_size, size_t degraded_size, int batch, uint64_t seed,
                             bool with_replacement, std::vector<size_t>* clear_idx,
                             std::vector<size_t>* degraded_idx) {
  UFEM_CHECK(clear_size > 0 && degraded_size > 0, "unpaired sampling from an empty manifest");
  UFEM_CHECK(batch > 0, "batch size must be positive");
  if (!with_replacement) {
    UFEM_CHECK(static_cast<size_t>(batch) <= clear_size &&
                   static_cast<size_t>(batch) <= degraded_size,
               "batch of " + std::to_string(batch) +
                   " exceeds manifest size with replacement disabled");
  }
  Rng base(seed);
  Rng rc = base.fork(1);
  Rng rd = base.fork(2);
  auto draw = [batch, with_replacement](Rng& rng, size_t size, std::vector<size_t>* out) {
    out->clear();
    if (with_replacement) {
      for (int i = 0; i < batch; ++i)
        out->push_back(static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(size))));
    } else {
      std::vector<size_t> pool(size);
      for (size_t i = 0; i < size; ++i) pool[i] = i;
      for (int i = 0; i < batch; ++i) {
        const int64_t j = i + rng.uniform_int(static_cast<int64_t>(size) - i);
        std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
        out->push_back(pool[static_cast<size_t>(i)]);
      }
    }
  };
  draw(rc, clear_size, clear_idx);
  draw(rd, degraded_size, degraded_idx);
}

UnpairedBatch sample_unpaired_batch(const DatasetManifest& clear, const DatasetManifest& degraded,
                                    int batch, uint64_t seed, bool with_replacement) {
  UnpairedBatch b;
  sample_unpaired_indices(clear.size(), degraded.size(), batch, seed, with_replacement,
                          &b.clear_indices, &b.degraded_indices);
  std::vector<Tensor> ci, di;
  ci.reserve(b.clear_indices.size());
  di.reserve(b.degraded_indices.size());
  for (size_t i : b.clear_indices) ci.push_back(read_ppm(clear.abspath(i)));
  for (size_t i : b.degraded_indices) di.push_back(read_ppm(degraded.abspath(i)));
  b.clear_images = stack_images(ci);
  b.degraded_images = stack_images(di);
  return b;
}

Tensor load_all_images(const DatasetManifest& m) {
  std::vector<Tensor> imgs;
  imgs.reserve(m.size());
  for (size_t i = 0; i < m.size(); ++i) imgs.push_back(read_ppm(m.abspath(i)));
  return stack_images(imgs);
}

int degrade_tree(const std::string& in_dir, const std::string& out_dir, DegradationKind kind,
                 int severity, uint64_t seed) {
  if (!fs::is_directory(in_dir)) throw IoError("input '" + in_dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(in_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .ppm images found under '" + in_dir + "'");
  for (const auto& src : files) {
    const fs::path rel = fs::relative(src, in_dir);
    DegradationSpec spec;
    spec.kind = kind;
    spec.severity = severity;
    const std::string rel_str = rel.generic_string();
    spec.seed = Rng::seed_mix(seed, fnv1a64(rel_str.data(), rel_str.size()));
    const Tensor degraded = apply_degradation(read_ppm(src.string()), spec);
    const fs::path dst = fs::path(out_dir) / rel;
    fs::create_directories(dst.parent_path());
    write_ppm(dst.string(), degraded);
  }
  return static_cast<int>(files.size());
}

}  // namespace ufem
