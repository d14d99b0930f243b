// core/src/synth.cpp

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

#include "ufem/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "ufem/error.hpp"
#include "ufem/image.hpp"
#include "ufem/rng.hpp"

namespace fs = std::filesystem;

namespace ufem {

namespace {

struct Color {
  double r, g, b;
  double luma() const { return 0.299 * r + 0.587 * g + 0.114 * b; }
};

Color random_color(Rng& rng, double lo, double hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Signed distance-like shape coverage in [0,1]; dx/dy are offsets from the
// shape center in pixels, s is the shape radius, aa the edge softness.
double shape_alpha(int cls, double dx, double dy, double s, double stripe_period, Rng& rng) {
  (void)rng;
  const double aa = 1.2;
  auto soft = [aa](double signed_dist) { return clamp01(0.5 - signed_dist / aa); };
  const double r = std::sqrt(dx * dx + dy * dy);
  const double box = std::max(std::fabs(dx), std::fabs(dy));
  switch (cls) {
    case 0:  // disk
      return soft(r - s);
    case 1:  // ring
      return soft(std::fabs(r - 0.78 * s) - 0.24 * s);
    case 2:  // square
      return soft(box - 0.82 * s);
    case 3:  // frame
      return soft(std::fabs(box - 0.68 * s) - 0.2 * s);
    case 4: {  // triangle, apex up (image y grows downward)
      // Max of signed line distances of the equilateral triangle with
      // circumradius s; negative inside.
      const double d1 = dy - 0.5 * s;
      const double d2 = 0.866 * dx - 0.5 * dy - 0.5 * s;
      const double d3 = -0.866 * dx - 0.5 * dy - 0.5 * s;
      return soft(std::max({d1, d2, d3}));
    }
    case 5: {  // plus
      const double bar = std::min(std::fabs(dx), std::fabs(dy));
      return box <= s ? soft(bar - 0.3 * s) : 0.0;
    }
    case 6:  // horizontal stripes within a square patch
      if (box > 0.9 * s) return 0.0;
      return std::fmod(std::fabs(dy) + stripe_period, 2.0 * stripe_period) < stripe_period ? 1.0 : 0.0;
    case 7:  // vertical stripes
      if (box > 0.9 * s) return 0.0;
      return std::fmod(std::fabs(dx) + stripe_period, 2.0 * stripe_period) < stripe_period ? 1.0 : 0.0;
    case 8: {  // checkerboard
      if (box > 0.9 * s) return 0.0;
      const int cx = static_cast<int>(std::floor(dx / stripe_period));
      const int cy = static_cast<int>(std::floor(dy / stripe_period));
      return ((cx + cy) % 2 + 2) % 2 == 0 ? 1.0 : 0.0;
    }
    case 9: {  // diagonal cross (X)
      const double d1 = std::fabs(dx - dy) / std::sqrt(2.0);
      const double d2 = std::fabs(dx + dy) / std::sqrt(2.0);
      const double bar = std::min(d1, d2);
      return box <= s ? soft(bar - 0.22 * s) : 0.0;
    }
    default:
      throw InvalidArgument("synth class id out of range: " + std::to_string(cls));
  }
}

}  // namespace

namespace {

// Band-limited value texture: a few random sinusoidal plane waves. Gives
// the images natural-ish texture statistics so channel correlations are not
// dominated by the foreground shape.
struct TextureField {
  static constexpr int kWaves = 4;
  double fx[kWaves], fy[kWaves], phase[kWaves], amp[kWaves];

  static TextureField random(Rng& rng, double amplitude) {
    TextureField t;
    for (int k = 0; k < kWaves; ++k) {
      const double freq = rng.uniform(3.0, 12.0);
      const double angle = rng.uniform(0.0, 6.283185307179586);
      t.fx[k] = freq * std::cos(angle);
      t.fy[k] = freq * std::sin(angle);
      t.phase[k] = rng.uniform(0.0, 6.283185307179586);
      // Narrow amplitude spread: texture energy is a stable image statistic,
      // not a per-image style choice.
      t.amp[k] = amplitude * rng.uniform(0.8, 1.0) / kWaves * 2.0;
    }
    return t;
  }

  double at(double u, double v) const {
    double s = 0.0;
    for (int k = 0; k < kWaves; ++k) {
      s += amp[k] * std::sin(6.283185307179586 * (fx[k] * u + fy[k] * v) + phase[k]);
    }
    return s;
  }
};

}  // namespace

Tensor render_synth_image(int class_id, uint64_t seed, int resolution) {
  UFEM_CHECK(class_id >= 0 && class_id < kSynthClassCount, "synth class id out of range");
  UFEM_CHECK(resolution >= 16, "synth resolution too small");
  Rng rng(Rng::seed_mix(seed, 0x53594e54ull));  // per-image stream

  const int n = resolution;
  Color bg0 = random_color(rng, 0.12, 0.55);
  Color bg1 = random_color(rng, 0.12, 0.55);
  Color fg = random_color(rng, 0.35, 0.95);
  // Guarantee figure/ground contrast.
  for (int tries = 0; tries < 64; ++tries) {
    const double mid = 0.5 * (bg0.luma() + bg1.luma());
    if (std::fabs(fg.luma() - mid) >= 0.22) break;
    fg = random_color(rng, 0.35, 0.95);
  }

  const int grad_dir = static_cast<int>(rng.uniform_int(3));  // 0 vert, 1 horz, 2 diag
  const double cx = n / 2.0 + rng.uniform(-n / 7.0, n / 7.0);
  const double cy = n / 2.0 + rng.uniform(-n / 7.0, n / 7.0);
  const double s = rng.uniform(0.21, 0.34) * n;
  const double stripe_period = rng.uniform(1.6, 3.0) * n / 32.0;
  const double gain = rng.uniform(0.92, 1.08);
  const double offset = rng.uniform(-0.04, 0.04);
  const double noise_sigma = rng.uniform(0.010, 0.022);

  // Two luma textures (background coarse, foreground finer) plus a mild
  // chroma texture decorrelating the channels.
  const TextureField bg_tex = TextureField::random(rng, 0.18);
  const TextureField fg_tex = TextureField::random(rng, 0.14);
  const TextureField chroma_tex = TextureField::random(rng, 0.05);

  Tensor img(1, 3, n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double u = static_cast<double>(x) / n;
      const double v = static_cast<double>(y) / n;
      double t = 0.0;
      if (grad_dir == 0) t = static_cast<double>(y) / (n - 1);
      else if (grad_dir == 1) t = static_cast<double>(x) / (n - 1);
      else t = (x + y) / (2.0 * (n - 1));
      double r = bg0.r + t * (bg1.r - bg0.r);
      double g = bg0.g + t * (bg1.g - bg0.g);
      double b = bg0.b + t * (bg1.b - bg0.b);
      const double a = shape_alpha(class_id, x - cx, y - cy, s, stripe_period, rng);
      r = r + a * (fg.r - r);
      g = g + a * (fg.g - g);
      b = b + a * (fg.b - b);
      const double luma = (1.0 - a) * bg_tex.at(u, v) + a * fg_tex.at(u, v);
      const double chroma = chroma_tex.at(u, v);
      r += luma + chroma;
      g += luma - 0.5 * chroma;
      b += luma + 0.3 * chroma_tex.at(v, u);
      img.at(0, 0, y, x) = clamp01(gain * r + offset + rng.normal(0.0, noise_sigma));
      img.at(0, 1, y, x) = clamp01(gain * g + offset + rng.normal(0.0, noise_sigma));
      img.at(0, 2, y, x) = clamp01(gain * b + offset + rng.normal(0.0, noise_sigma));
    }
  }
  return img;
}

void generate_synth_dataset(const SynthSpec& spec, const std::string& out_dir) {
  UFEM_CHECK(spec.per_class > 0, "per_class must be positive");
  for (int cls = 0; cls < kSynthClassCount; ++cls) {
    char sub[16];
    std::snprintf(sub, sizeof(sub), "cls%02d", cls);
    const fs::path dir = fs::path(out_dir) / sub;
    fs::create_directories(dir);
    for (int i = 0; i < spec.per_class; ++i) {
      const uint64_t img_seed =
          Rng::seed_mix(spec.seed, static_cast<uint64_t>(cls) * 1000003ull + static_cast<uint64_t>(i));
      const Tensor img = render_synth_image(cls, img_seed, spec.resolution);
      char name[24];
      std::snprintf(name, sizeof(name), "img%05d.ppm", i);
      write_ppm((dir / name).string(), img);
    }
  }
}

}  // namespace ufem
