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
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "streetlabel/binary_io.hpp"
#include "streetlabel/classes.hpp"

namespace streetlabel {

struct SlicParams {
  int target_count = 150;
  double compactness = 10.0;
  int iterations = 10;

  void validate() const {
    if (target_count < 1) throw Error("SLIC target count must be >= 1");
    if (!(compactness > 0.0)) throw Error("SLIC compactness must be > 0");
    if (iterations < 1) throw Error("SLIC iterations must be >= 1");
  }
};

struct BoundingBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0; // inclusive

  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Segment {
  std::uint32_t pixel_count = 0;
  double centroid_x = 0.0;
  double centroid_y = 0.0;
  BoundingBox bbox;

  friend bool operator==(const Segment&, const Segment&) = default;
};

// Dense partition of an image into superpixels.
struct SuperpixelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> assignment;
  std::vector<Segment> segments;
  bool flipped = false;

  std::size_t size() const { return segments.size(); }
  std::uint32_t at(int x, int y) const {
    return assignment[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }

  // Rebuilds the per-segment records from `assignment`, which must use the
  // ids 0..n_segments-1 with every id present.
  static SuperpixelMap from_assignment(int width, int height, std::vector<std::uint32_t> assignment,
                                       std::uint32_t n_segments, bool flipped = false) {
    if (assignment.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
      throw Error("superpixel assignment size does not match dimensions");
    SuperpixelMap out;
    out.width = width;
    out.height = height;
    out.flipped = flipped;
    out.segments.resize(n_segments);
    std::vector<double> sx(n_segments, 0.0), sy(n_segments, 0.0);
    for (auto& s : out.segments) s.bbox = {width, height, -1, -1};
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::uint32_t id = assignment[static_cast<std::size_t>(y) * width + x];
        if (id >= n_segments) throw Error("superpixel id " + std::to_string(id) + " out of range");
        auto& s = out.segments[id];
        ++s.pixel_count;
        sx[id] += x;
        sy[id] += y;
        s.bbox.x0 = std::min(s.bbox.x0, x);
        s.bbox.y0 = std::min(s.bbox.y0, y);
        s.bbox.x1 = std::max(s.bbox.x1, x);
        s.bbox.y1 = std::max(s.bbox.y1, y);
      }
    }
    for (std::uint32_t i = 0; i < n_segments; ++i) {
      auto& s = out.segments[i];
      if (s.pixel_count == 0) throw Error("superpixel id " + std::to_string(i) + " has no pixels");
      s.centroid_x = sx[i] / s.pixel_count;
      s.centroid_y = sy[i] / s.pixel_count;
    }
    out.assignment = std::move(assignment);
    return out;
  }
};

namespace slic_detail {

struct Centre {
  double L, a, b, x, y;
};

inline double lab_sq(const Lab& p, const Lab& q) {
  const double dL = p.L - q.L, da = p.a - q.a, db = p.b - q.b;
  return dL * dL + da * da + db * db;
}

// G(x,y) = |I(x+1,y) - I(x-1,y)|^2 + |I(x,y+1) - I(x,y-1)|^2, borders clamped.
inline double gradient(const LabImage& img, int x, int y) {
  const int xl = std::max(0, x - 1), xr = std::min(img.width - 1, x + 1);
  const int yu = std::max(0, y - 1), yd = std::min(img.height - 1, y + 1);
  return lab_sq(img.at(xr, y), img.at(xl, y)) + lab_sq(img.at(x, yd), img.at(x, yu));
}

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
  std::uint32_t find(std::uint32_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  }
};

// Splits clusters into 4-connected components and merges every component
// smaller than `min_size` into its largest neighbour. Returns dense ids in
// raster order of first appearance.
inline std::uint32_t enforce_connectivity(int width, int height, std::vector<std::uint32_t>& labels,
                                          double min_size) {
  const std::size_t n = labels.size();
  constexpr std::uint32_t kUnset = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> comp(n, kUnset);
  std::vector<std::uint32_t> comp_size;
  std::vector<std::size_t> stack;
  const int dx[4] = {-1, 1, 0, 0};
  const int dy[4] = {0, 0, -1, 1};

  for (std::size_t start = 0; start < n; ++start) {
    if (comp[start] != kUnset) continue;
    const auto id = static_cast<std::uint32_t>(comp_size.size());
    comp_size.push_back(0);
    comp[start] = id;
    stack.assign(1, start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++comp_size[id];
      const int x = static_cast<int>(p % width), y = static_cast<int>(p / width);
      for (int k = 0; k < 4; ++k) {
        const int nx = x + dx[k], ny = y + dy[k];
        if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
        const std::size_t q = static_cast<std::size_t>(ny) * width + nx;
        if (comp[q] == kUnset && labels[q] == labels[p]) {
          comp[q] = id;
          stack.push_back(q);
        }
      }
    }
  }

  // Component ids are already in raster order of first pixel, so comparing
  // ids is comparing first-pixel positions.
  const std::size_t n_comp = comp_size.size();
  std::vector<std::set<std::uint32_t>> adjacency(n_comp);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * width + x;
      if (x + 1 < width && comp[p] != comp[p + 1]) {
        adjacency[comp[p]].insert(comp[p + 1]);
        adjacency[comp[p + 1]].insert(comp[p]);
      }
      if (y + 1 < height && comp[p] != comp[p + width]) {
        adjacency[comp[p]].insert(comp[p + width]);
        adjacency[comp[p + width]].insert(comp[p]);
      }
    }
  }

  std::vector<std::uint32_t> small;
  for (std::uint32_t c = 0; c < n_comp; ++c)
    if (comp_size[c] < min_size) small.push_back(c);
  std::stable_sort(small.begin(), small.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return comp_size[a] < comp_size[b]; });

  UnionFind uf(n_comp);
  std::vector<std::uint32_t> size = comp_size;
  for (std::uint32_t c : small) {
    const std::uint32_t r = uf.find(c);
    if (size[r] >= min_size) continue;
    std::uint32_t best = kUnset;
    for (std::uint32_t nb : adjacency[r]) {
      const std::uint32_t nr = uf.find(nb);
      if (nr == r) continue;
      if (best == kUnset || size[nr] > size[best] || (size[nr] == size[best] && nr < best)) best = nr;
    }
    if (best == kUnset) continue;
    // The merged root keeps the smaller id so roots stay first-pixel ordered.
    const std::uint32_t keep = std::min(r, best), drop = std::max(r, best);
    uf.parent[drop] = keep;
    size[keep] = size[r] + size[best];
    for (std::uint32_t nb : adjacency[drop]) adjacency[keep].insert(nb);
    adjacency[drop].clear();
  }

  std::vector<std::uint32_t> dense(n_comp, kUnset);
  std::uint32_t next = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const std::uint32_t r = uf.find(comp[p]);
    if (dense[r] == kUnset) dense[r] = next++;
    labels[p] = dense[r];
  }
  return next;
}

} // namespace slic_detail

// SLIC over-segmentation. With `flip` set the image is mirrored first and
// the returned map describes the mirrored image.
inline SuperpixelMap segment(const LabImage& input, const SlicParams& params, bool flip = false) {
  using namespace slic_detail;
  params.validate();
  if (input.empty()) throw Error("segment: empty image");
  const LabImage flipped_copy = flip ? flip_horizontal(input) : LabImage{};
  const LabImage& img = flip ? flipped_copy : input;
  const int w = img.width, h = img.height;
  const std::size_t n = img.size();
  const int k = params.target_count;
  if (static_cast<std::size_t>(k) > n)
    throw Error("segment: target count " + std::to_string(k) + " exceeds pixel count " + std::to_string(n));

  const double step = std::sqrt(static_cast<double>(n) / k);
  const int nx = std::clamp(static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k) * w / h) - 1e-9)), 1, std::min(w, k));
  const int ny = std::clamp(static_cast<int>(std::lround(static_cast<double>(k) / nx)), 1, h);

  std::vector<Centre> centres;
  centres.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int cx = static_cast<int>((i + 0.5) * w / nx);
      int cy = static_cast<int>((j + 0.5) * h / ny);
      int bx = cx, by = cy;
      double best = gradient(img, cx, cy);
      for (int oy = -1; oy <= 1; ++oy) {
        for (int ox = -1; ox <= 1; ++ox) {
          const int px = cx + ox, py = cy + oy;
          if (!img.contains(px, py)) continue;
          const double g = gradient(img, px, py);
          if (g < best) {
            best = g;
            bx = px;
            by = py;
          }
        }
      }
      const Lab& c = img.at(bx, by);
      centres.push_back({c.L, c.a, c.b, static_cast<double>(bx), static_cast<double>(by)});
    }
  }

  const double spatial_weight = params.compactness / step;
  constexpr std::uint32_t kUnset = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> labels(n, kUnset);
  std::vector<double> dist(n);

  auto distance = [&](const Centre& c, int x, int y) {
    const Lab& p = img.at(x, y);
    const double dL = p.L - c.L, da = p.a - c.a, db = p.b - c.b;
    const double ex = x - c.x, ey = y - c.y;
    return std::sqrt(dL * dL + da * da + db * db) + spatial_weight * std::sqrt(ex * ex + ey * ey);
  };

  for (int iter = 0; iter < params.iterations; ++iter) {
    std::fill(labels.begin(), labels.end(), kUnset);
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    for (std::uint32_t ci = 0; ci < centres.size(); ++ci) {
      const Centre& c = centres[ci];
      const int x0 = std::max(0, static_cast<int>(std::floor(c.x - step)));
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(c.x + step)));
      const int y0 = std::max(0, static_cast<int>(std::floor(c.y - step)));
      const int y1 = std::min(h - 1, static_cast<int>(std::ceil(c.y + step)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double d = distance(c, x, y);
          const std::size_t p = img.index(x, y);
          if (d < dist[p]) {
            dist[p] = d;
            labels[p] = ci;
          }
        }
      }
    }
    // Pixels outside every search window fall back to a global search.
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t p = img.index(x, y);
        if (labels[p] != kUnset) continue;
        for (std::uint32_t ci = 0; ci < centres.size(); ++ci) {
          const double d = distance(centres[ci], x, y);
          if (d < dist[p]) {
            dist[p] = d;
            labels[p] = ci;
          }
        }
      }
    }

    std::vector<Centre> sums(centres.size(), Centre{0, 0, 0, 0, 0});
    std::vector<std::size_t> counts(centres.size(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t p = img.index(x, y);
        auto& s = sums[labels[p]];
        const Lab& px = img.pixels[p];
        s.L += px.L;
        s.a += px.a;
        s.b += px.b;
        s.x += x;
        s.y += y;
        ++counts[labels[p]];
      }
    }
    for (std::size_t ci = 0; ci < centres.size(); ++ci) {
      if (counts[ci] == 0) continue;
      const double inv = 1.0 / static_cast<double>(counts[ci]);
      centres[ci] = {sums[ci].L * inv, sums[ci].a * inv, sums[ci].b * inv, sums[ci].x * inv, sums[ci].y * inv};
    }
  }

  const std::uint32_t n_segments = enforce_connectivity(w, h, labels, step * step / 4.0);
  return SuperpixelMap::from_assignment(w, h, std::move(labels), n_segments, flip);
}

// Most frequent non-void ground-truth class per segment; void only when the
// segment is entirely void. Ties go to the lower class index.
inline std::vector<ClassIndex> superpixel_majority_label(const SuperpixelMap& spx, const LabelMap& gt,
                                                         const ClassTable& classes) {
  if (spx.width != gt.width || spx.height != gt.height)
    throw Error("superpixel_majority_label: dimension mismatch");
  const std::size_t nc = classes.size();
  std::vector<std::uint32_t> counts(spx.size() * nc, 0);
  for (std::size_t p = 0; p < gt.size(); ++p) {
    const ClassIndex c = gt.pixels[p];
    if (c >= nc) throw Error("superpixel_majority_label: class index out of range");
    ++counts[spx.assignment[p] * nc + c];
  }
  std::vector<ClassIndex> out(spx.size(), kVoid);
  for (std::size_t s = 0; s < spx.size(); ++s) {
    std::uint32_t best = 0;
    for (std::size_t c = 1; c < nc; ++c) {
      if (counts[s * nc + c] > best) {
        best = counts[s * nc + c];
        out[s] = static_cast<ClassIndex>(c);
      }
    }
  }
  return out;
}

inline void save_superpixel_map(const std::string& path, const SuperpixelMap& spx) {
  binio::Writer w;
  w.magic("SPXM");
  w.u32(static_cast<std::uint32_t>(spx.width));
  w.u32(static_cast<std::uint32_t>(spx.height));
  w.u32(static_cast<std::uint32_t>(spx.size()));
  for (std::uint32_t id : spx.assignment) w.u32(id);
  w.save(path);
}

inline SuperpixelMap load_superpixel_map(const std::string& path, bool flipped = false) {
  auto r = binio::Reader::from_file(path);
  r.expect_magic("SPXM");
  const std::uint32_t w = r.u32(), h = r.u32(), n = r.u32();
  if (static_cast<std::uint64_t>(w) * h * 4 != r.remaining()) throw Error(path + ": payload size mismatch");
  std::vector<std::uint32_t> assignment(static_cast<std::size_t>(w) * h);
  for (auto& id : assignment) id = r.u32();
  return SuperpixelMap::from_assignment(static_cast<int>(w), static_cast<int>(h), std::move(assignment), n, flipped);
}

} // namespace streetlabel
