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
#include <string>
#include <vector>

#include "streetlabel/binary_io.hpp"
#include "streetlabel/image.hpp"

namespace streetlabel {

using GlobalFeature = std::vector<double>;

struct Neighbour {
  std::size_t image_id = 0;
  double distance = 0.0;
  friend bool operator==(const Neighbour&, const Neighbour&) = default;
};

using RetrievalSet = std::vector<Neighbour>;

struct CorpusItem {
  std::size_t image_id = 0;
  GlobalFeature feature;
};

inline constexpr int kDescriptorGrid = 4;

// 4x4 grid of mean (L, a, b) cells, row-major, 48 values.
inline GlobalFeature builtin_global_feature(const LabImage& image) {
  if (image.empty()) throw Error("builtin_global_feature: empty image");
  constexpr int g = kDescriptorGrid;
  std::vector<double> sum(g * g * 3, 0.0);
  std::vector<std::size_t> count(g * g, 0);
  for (int y = 0; y < image.height; ++y) {
    const int cy = static_cast<int>(static_cast<long long>(y) * g / image.height);
    for (int x = 0; x < image.width; ++x) {
      const int cx = static_cast<int>(static_cast<long long>(x) * g / image.width);
      const int cell = cy * g + cx;
      const Lab& p = image.at(x, y);
      sum[cell * 3] += p.L;
      sum[cell * 3 + 1] += p.a;
      sum[cell * 3 + 2] += p.b;
      ++count[cell];
    }
  }
  GlobalFeature out(g * g * 3, 0.0);
  for (int cell = 0; cell < g * g; ++cell)
    if (count[cell] > 0)
      for (int c = 0; c < 3; ++c) out[cell * 3 + c] = sum[cell * 3 + c] / static_cast<double>(count[cell]);
  return out;
}

// Exact k nearest neighbours by Euclidean distance, ties to the lower image id.
inline RetrievalSet knn_retrieve(const GlobalFeature& query, const std::vector<CorpusItem>& corpus, std::size_t k) {
  if (corpus.empty()) throw Error("knn_retrieve: empty corpus");
  if (k == 0) throw Error("knn_retrieve: k must be >= 1");
  RetrievalSet all;
  all.reserve(corpus.size());
  for (const auto& item : corpus) {
    if (item.feature.size() != query.size())
      throw Error("knn_retrieve: feature dimension " + std::to_string(item.feature.size()) + " of image " +
                  std::to_string(item.image_id) + " does not match query dimension " + std::to_string(query.size()));
    double d2 = 0.0;
    for (std::size_t i = 0; i < query.size(); ++i) {
      const double d = item.feature[i] - query[i];
      d2 += d * d;
    }
    all.push_back({item.image_id, std::sqrt(d2)});
  }
  const std::size_t take = std::min(k, all.size());
  auto less = [](const Neighbour& a, const Neighbour& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.image_id < b.image_id);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), less);
  all.resize(take);
  return all;
}

inline void save_global_feature(const std::string& path, const GlobalFeature& f) {
  binio::Writer w;
  w.magic("GFEA");
  w.u32(static_cast<std::uint32_t>(f.size()));
  for (double v : f) w.f32(static_cast<float>(v));
  w.save(path);
}

inline GlobalFeature load_global_feature(const std::string& path) {
  auto r = binio::Reader::from_file(path);
  r.expect_magic("GFEA");
  const std::uint32_t dim = r.u32();
  if (static_cast<std::uint64_t>(dim) * 4 != r.remaining()) throw Error(path + ": payload size mismatch");
  GlobalFeature f(dim);
  for (double& v : f) {
    v = r.f32();
    if (!std::isfinite(v)) throw Error(path + ": non-finite feature value");
  }
  return f;
}

// Packed corpus: one feature per row, rows in the given order.
inline void save_feature_corpus(const std::string& path, const std::vector<GlobalFeature>& rows) {
  binio::Writer w;
  w.magic("GFEC");
  w.u32(static_cast<std::uint32_t>(rows.size()));
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  w.u32(static_cast<std::uint32_t>(dim));
  for (const auto& row : rows) {
    if (row.size() != dim) throw Error("save_feature_corpus: ragged feature rows");
    for (double v : row) w.f32(static_cast<float>(v));
  }
  w.save(path);
}

inline std::vector<GlobalFeature> load_feature_corpus(const std::string& path) {
  auto r = binio::Reader::from_file(path);
  r.expect_magic("GFEC");
  const std::uint32_t count = r.u32(), dim = r.u32();
  if (static_cast<std::uint64_t>(count) * dim * 4 != r.remaining()) throw Error(path + ": payload size mismatch");
  std::vector<GlobalFeature> rows(count, GlobalFeature(dim));
  for (auto& row : rows)
    for (double& v : row) {
      v = r.f32();
      if (!std::isfinite(v)) throw Error(path + ": non-finite feature value");
    }
  return rows;
}

} // namespace streetlabel
