// Copyright 2026 The streetlabel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "streetlabel/error.hpp"

namespace streetlabel {

using ClassIndex = std::uint8_t;
inline constexpr ClassIndex kVoid = 0;

using Rgb = std::array<std::uint8_t, 3>;

struct Lab {
  double L = 0.0;
  double a = 0.0;
  double b = 0.0;

  friend bool operator==(const Lab&, const Lab&) = default;
};

// Row-major raster of one pixel type.
template <typename Pixel>
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<Pixel> pixels;

  Raster() = default;
  Raster(int w, int h, Pixel fill = Pixel{})
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    if (w < 0 || h < 0) throw Error("negative raster dimensions");
  }

  std::size_t size() const { return pixels.size(); }
  bool empty() const { return pixels.empty(); }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
  }
  Pixel& at(int x, int y) { return pixels[index(x, y)]; }
  const Pixel& at(int x, int y) const { return pixels[index(x, y)]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  friend bool operator==(const Raster&, const Raster&) = default;
};

using RgbImage = Raster<Rgb>;
using LabImage = Raster<Lab>;
using LabelMap = Raster<ClassIndex>;

template <typename Pixel>
Raster<Pixel> flip_horizontal(const Raster<Pixel>& src) {
  Raster<Pixel> out(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) out.at(src.width - 1 - x, y) = src.at(x, y);
  return out;
}

// Nearest-neighbour resize; the only resize that is legal for label maps.
template <typename Pixel>
Raster<Pixel> resize_nearest(const Raster<Pixel>& src, int width, int height) {
  if (src.empty() || width <= 0 || height <= 0) throw Error("resize of empty raster");
  if (src.width == width && src.height == height) return src;
  Raster<Pixel> out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(src.height - 1, static_cast<int>((y + 0.5) * src.height / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(src.width - 1, static_cast<int>((x + 0.5) * src.width / width));
      out.at(x, y) = src.at(sx, sy);
    }
  }
  return out;
}

// Bilinear resize with half-pixel centres, for colour images.
inline RgbImage resize_bilinear(const RgbImage& src, int width, int height) {
  if (src.empty() || width <= 0 || height <= 0) throw Error("resize of empty raster");
  if (src.width == width && src.height == height) return src;
  RgbImage out(width, height);
  const double sx_scale = static_cast<double>(src.width) / width;
  const double sy_scale = static_cast<double>(src.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy_scale - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx_scale - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double tx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = src.at(x0, y0)[c] * (1 - tx) + src.at(x1, y0)[c] * tx;
        const double bottom = src.at(x0, y1)[c] * (1 - tx) + src.at(x1, y1)[c] * tx;
        out.at(x, y)[c] = static_cast<std::uint8_t>(std::lround(std::clamp(top * (1 - ty) + bottom * ty, 0.0, 255.0)));
      }
    }
  }
  return out;
}

} // namespace streetlabel
