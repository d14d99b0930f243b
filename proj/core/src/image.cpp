// core/src/image.cpp

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

#include "ufem/image.hpp"

#include <cmath>
#include <fstream>

#include "ufem/error.hpp"

namespace ufem {

namespace {

// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {}
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

}  // namespace

Tensor read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open image '" + path + "'");
  if (next_token(f) != "P6") throw IoError("'" + path + "' is not a binary PPM (P6)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token(f));
    h = std::stoi(next_token(f));
    maxval = std::stoi(next_token(f));
  } catch (const std::exception&) {
    throw IoError("bad PPM header in '" + path + "'");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw IoError("unsupported PPM header in '" + path + "'");

  std::vector<unsigned char> bytes(static_cast<size_t>(w) * h * 3);
  f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (f.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw IoError("truncated PPM payload in '" + path + "'");

  Tensor img(1, 3, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t p = (static_cast<size_t>(y) * w + x) * 3;
      for (int c = 0; c < 3; ++c) {
        img.at(0, c, y, x) = static_cast<double>(bytes[p + c]) / 255.0;
      }
    }
  }
  return img;
}

void write_ppm(const std::string& path, const Tensor& image) {
  UFEM_CHECK(image.n() == 1 && image.c() == 3, "write_ppm expects a (1,3,h,w) tensor, got " +
                                                   image.shape_str());
  const int h = image.h(), w = image.w();
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + static_cast<size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = image.at(0, c, y, x);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        out.push_back(static_cast<char>(static_cast<int>(std::lround(v * 255.0))));
      }
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to '" + path + "'");
}

Tensor stack_images(const std::vector<Tensor>& images) {
  UFEM_CHECK(!images.empty(), "stack_images: empty batch");
  const Tensor& first = images.front();
  Tensor out(static_cast<int>(images.size()), first.c(), first.h(), first.w());
  for (size_t i = 0; i < images.size(); ++i) {
    UFEM_CHECK(images[i].n() == 1 && images[i].c() == first.c() && images[i].h() == first.h() &&
                   images[i].w() == first.w(),
               "stack_images: inconsistent image shapes");
    std::copy(images[i].data(), images[i].data() + images[i].size(), out.sample(static_cast<int>(i)));
  }
  return out;
}

}  // namespace ufem
