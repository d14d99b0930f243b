// core/src/plot.cpp

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

#include "ufem/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ufem/error.hpp"
#include "ufem/image.hpp"
#include "ufem/tensor.hpp"

namespace ufem {

namespace {

constexpr double kPalette[8][3] = {
    {0.85, 0.25, 0.20}, {0.20, 0.45, 0.85}, {0.20, 0.70, 0.30}, {0.90, 0.65, 0.10},
    {0.60, 0.30, 0.75}, {0.15, 0.70, 0.70}, {0.80, 0.40, 0.60}, {0.40, 0.40, 0.40},
};

struct Canvas {
  explicit Canvas(int size) : img(1, 3, size, size) { img.fill(1.0); }

  void dot(double x, double y, int color, int radius = 3) {
    const auto* rgb = kPalette[color % 8];
    const int cy = static_cast<int>(std::lround(y));
    const int cx = static_cast<int>(std::lround(x));
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        if (dx * dx + dy * dy > radius * radius) continue;
        const int py = cy + dy, px = cx + dx;
        if (py < 0 || py >= img.h() || px < 0 || px >= img.w()) continue;
        for (int c = 0; c < 3; ++c) img.at(0, c, py, px) = rgb[c];
      }
    }
  }

  void vline_rect(int x0, int x1, int y0, int y1, int color) {
    const auto* rgb = kPalette[color % 8];
    for (int y = std::max(0, y0); y <= std::min(img.h() - 1, y1); ++y) {
      for (int x = std::max(0, x0); x <= std::min(img.w() - 1, x1); ++x) {
        for (int c = 0; c < 3; ++c) img.at(0, c, y, x) = rgb[c];
      }
    }
  }

  void line(double x0, double y0, double x1, double y1, int color) {
    const int steps = static_cast<int>(std::max(std::fabs(x1 - x0), std::fabs(y1 - y0))) + 1;
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      dot(x0 + t * (x1 - x0), y0 + t * (y1 - y0), color, 1);
    }
  }

  Tensor img;
};

}  // namespace

void plot_scatter(const std::string& path, const std::vector<std::array<double, 2>>& points,
                  const std::vector<int>& labels, int size) {
  UFEM_CHECK(points.size() == labels.size() && !points.empty(), "plot_scatter: bad inputs");
  double xmin = std::numeric_limits<double>::max(), xmax = std::numeric_limits<double>::lowest();
  double ymin = xmin, ymax = xmax;
  for (const auto& p : points) {
    xmin = std::min(xmin, p[0]);
    xmax = std::max(xmax, p[0]);
    ymin = std::min(ymin, p[1]);
    ymax = std::max(ymax, p[1]);
  }
  const double xr = xmax - xmin > 0 ? xmax - xmin : 1.0;
  const double yr = ymax - ymin > 0 ? ymax - ymin : 1.0;
  const int margin = 16;
  Canvas canvas(size);
  for (size_t i = 0; i < points.size(); ++i) {
    const double x = margin + (points[i][0] - xmin) / xr * (size - 2 * margin);
    const double y = size - margin - (points[i][1] - ymin) / yr * (size - 2 * margin);
    canvas.dot(x, y, labels[i]);
  }
  write_ppm(path, canvas.img);
}

void plot_bars(const std::string& path, const std::vector<std::vector<double>>& series, int size) {
  UFEM_CHECK(!series.empty() && !series.front().empty(), "plot_bars: empty series");
  double vmax = 0.0;
  for (const auto& s : series) {
    for (double v : s) vmax = std::max(vmax, v);
  }
  if (vmax <= 0.0) vmax = 1.0;
  const size_t bars = series.front().size();
  const int margin = 16;
  const double slot = static_cast<double>(size - 2 * margin) / static_cast<double>(bars);
  const double bar_w = std::max(1.0, slot / static_cast<double>(series.size() + 1));
  Canvas canvas(size);
  for (size_t s = 0; s < series.size(); ++s) {
    for (size_t b = 0; b < std::min(bars, series[s].size()); ++b) {
      const double h = series[s][b] / vmax * (size - 2 * margin);
      const int x0 = static_cast<int>(margin + b * slot + s * bar_w);
      canvas.vline_rect(x0, static_cast<int>(x0 + bar_w - 1), static_cast<int>(size - margin - h),
                        size - margin, static_cast<int>(s));
    }
  }
  write_ppm(path, canvas.img);
}

void plot_lines(const std::string& path, const std::vector<std::vector<double>>& series, int size) {
  UFEM_CHECK(!series.empty(), "plot_lines: empty series");
  double vmin = std::numeric_limits<double>::max(), vmax = std::numeric_limits<double>::lowest();
  size_t len = 0;
  for (const auto& s : series) {
    len = std::max(len, s.size());
    for (double v : s) {
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  }
  UFEM_CHECK(len >= 2, "plot_lines: need at least 2 points");
  const double vr = vmax - vmin > 0 ? vmax - vmin : 1.0;
  const int margin = 16;
  Canvas canvas(size);
  for (size_t s = 0; s < series.size(); ++s) {
    for (size_t i = 0; i + 1 < series[s].size(); ++i) {
      auto px = [&](size_t k) {
        return margin + static_cast<double>(k) / (len - 1) * (size - 2 * margin);
      };
      auto py = [&](double v) { return size - margin - (v - vmin) / vr * (size - 2 * margin); };
      canvas.line(px(i), py(series[s][i]), px(i + 1), py(series[s][i + 1]), static_cast<int>(s));
    }
  }
  write_ppm(path, canvas.img);
}

}  // namespace ufem
