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
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "streetlabel/classes.hpp"
#include "streetlabel/error.hpp"
#include "streetlabel/image.hpp"
#include "streetlabel/manifest.hpp"
#include "streetlabel/png_io.hpp"

namespace streetlabel {

// Synthetic street datasets with known layout, used by tests and demos.
//   street         sky band, building band, road band, cars on the road, a sign
//   twin-bands     two classes sharing one colour in disjoint vertical bands
//   small-objects  two similar-looking backgrounds sprinkled with small objects
//   skewed         street layout where every foreground class stays under 3%
enum class SynthKind { kStreet, kTwinBands, kSmallObjects, kSkewed };

inline const char* synth_kind_name(SynthKind k) {
  switch (k) {
  case SynthKind::kStreet: return "street";
  case SynthKind::kTwinBands: return "twin-bands";
  case SynthKind::kSmallObjects: return "small-objects";
  case SynthKind::kSkewed: return "skewed";
  }
  return "?";
}

inline SynthKind parse_synth_kind(const std::string& s) {
  for (SynthKind k : {SynthKind::kStreet, SynthKind::kTwinBands, SynthKind::kSmallObjects, SynthKind::kSkewed})
    if (s == synth_kind_name(k)) return k;
  throw Error("unknown synthetic dataset kind '" + s + "'");
}

struct SynthParams {
  SynthKind kind = SynthKind::kStreet;
  std::size_t n_train = 200;
  std::size_t n_test = 20;
  int size = 64;
  std::uint64_t seed = 1;
  double noise = 10.0; // std of additive per-channel colour noise

  void validate() const {
    if (size < 16) throw Error("synth: image size must be >= 16");
    if (n_train == 0) throw Error("synth: need at least one training image");
    if (!(noise >= 0.0)) throw Error("synth: noise must be >= 0");
  }
};

inline ClassTable synth_classes(SynthKind kind) {
  switch (kind) {
  case SynthKind::kStreet:
    return ClassTable({"void", "sky", "building", "road", "car", "sign"},
                      {{0, 0, 0}, {128, 128, 255}, {128, 0, 0}, {128, 64, 128}, {64, 0, 128}, {192, 128, 128}});
  case SynthKind::kTwinBands:
    return ClassTable({"void", "upper", "lower"}, {{0, 0, 0}, {220, 60, 60}, {60, 60, 220}});
  case SynthKind::kSmallObjects:
    return ClassTable({"void", "building", "road", "sign", "car"},
                      {{0, 0, 0}, {128, 0, 0}, {128, 64, 128}, {192, 128, 128}, {64, 0, 128}});
  case SynthKind::kSkewed:
    return ClassTable({"void", "sky", "building", "road", "tree", "car", "sign", "pedestrian"},
                      {{0, 0, 0},
                       {128, 128, 255},
                       {128, 0, 0},
                       {128, 64, 128},
                       {128, 128, 0},
                       {64, 0, 128},
                       {192, 128, 128},
                       {64, 64, 0}});
  }
  throw Error("synth: bad kind");
}

struct SynthImage {
  RgbImage image;
  LabelMap labels;
};

namespace synth_detail {

struct Canvas {
  std::vector<std::array<double, 3>> colour;
  LabelMap labels;
  std::mt19937_64& rng;

  Canvas(int s, std::mt19937_64& r) : colour(static_cast<std::size_t>(s) * s), labels(s, s, kVoid), rng(r) {}

  int size() const { return labels.width; }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  int randint(int lo, int hi) { return hi <= lo ? lo : std::uniform_int_distribution<int>(lo, hi)(rng); }

  // Base colour jittered once per region so images differ slightly in tone.
  std::array<double, 3> tone(Rgb base, double jitter = 8.0) {
    std::array<double, 3> c{};
    for (int i = 0; i < 3; ++i) c[i] = base[i] + uniform(-jitter, jitter);
    return c;
  }

  void fill(int x0, int y0, int x1, int y1, ClassIndex label, const std::array<double, 3>& c) {
    x0 = std::clamp(x0, 0, size());
    x1 = std::clamp(x1, 0, size());
    y0 = std::clamp(y0, 0, size());
    y1 = std::clamp(y1, 0, size());
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        labels.at(x, y) = label;
        colour[labels.index(x, y)] = c;
      }
  }

  // Rectangle of the given fractional size placed uniformly in [ylo, yhi).
  void object(double wmin, double wmax, double hmin, double hmax, int ylo, int yhi, ClassIndex label, Rgb base) {
    const int s = size();
    const int w = std::max(2, static_cast<int>(std::lround(s * uniform(wmin, wmax))));
    const int h = std::max(2, static_cast<int>(std::lround(s * uniform(hmin, hmax))));
    const int x0 = randint(0, s - w);
    const int y0 = randint(ylo, std::max(ylo, yhi - h));
    fill(x0, y0, x0 + w, y0 + h, label, tone(base));
  }

  SynthImage finish(double noise) {
    std::normal_distribution<double> n(0.0, noise);
    SynthImage out{RgbImage(size(), size()), labels};
    for (std::size_t p = 0; p < colour.size(); ++p)
      for (int i = 0; i < 3; ++i) {
        const double v = colour[p][i] + (noise > 0 ? n(rng) : 0.0);
        out.image.pixels[p][i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    return out;
  }
};

inline constexpr Rgb kSky{130, 180, 235}, kBuilding{150, 105, 85}, kRoad{75, 75, 80}, kCar{205, 35, 35},
    kSign{235, 205, 40}, kTree{60, 140, 60}, kPedestrian{40, 60, 170}, kTwin{120, 120, 120};

// Returns the first row of the building band and of the road band.
inline std::pair<int, int> street_bands(Canvas& c, ClassIndex sky, ClassIndex building, ClassIndex road) {
  const int s = c.size();
  const int sky_end = static_cast<int>(std::lround(s * c.uniform(0.26, 0.34)));
  const int road_start = static_cast<int>(std::lround(s * c.uniform(0.58, 0.66)));
  c.fill(0, 0, s, sky_end, sky, c.tone(kSky));
  c.fill(0, sky_end, s, road_start, building, c.tone(kBuilding));
  c.fill(0, road_start, s, s, road, c.tone(kRoad));
  return {sky_end, road_start};
}

} // namespace synth_detail

// Image number `index` of the dataset; depends only on (params, index).
inline SynthImage synth_image(const SynthParams& params, std::size_t index) {
  params.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(params.seed), static_cast<std::uint32_t>(params.seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(params.kind)};
  std::mt19937_64 rng(seq);
  synth_detail::Canvas c(params.size, rng);
  const int s = params.size;
  using namespace synth_detail;

  switch (params.kind) {
  case SynthKind::kStreet: {
    const auto [sky_end, road_start] = street_bands(c, 1, 2, 3);
    c.object(0.09, 0.13, 0.11, 0.15, sky_end, road_start, 5, kSign);
    const int cars = c.randint(1, 2);
    for (int i = 0; i < cars; ++i) c.object(0.16, 0.24, 0.09, 0.13, road_start, s, 4, kCar);
    break;
  }
  case SynthKind::kTwinBands: {
    const int split = s / 2 + c.randint(-s / 32, s / 32);
    const auto tone = c.tone(kTwin, 0.0);
    c.fill(0, 0, s, split, 1, tone);
    c.fill(0, split, s, s, 2, tone);
    break;
  }
  case SynthKind::kSmallObjects: {
    const int split = static_cast<int>(std::lround(s * c.uniform(0.45, 0.55)));
    c.fill(0, 0, s, split, 1, c.tone({120, 110, 100}, 4.0));
    c.fill(0, split, s, s, 2, c.tone({105, 105, 110}, 4.0));
    for (int i = 0; i < 3; ++i) c.object(0.08, 0.12, 0.08, 0.12, 0, split, 3, kSign);
    for (int i = 0; i < 2; ++i) c.object(0.08, 0.12, 0.08, 0.12, split, s, 4, kCar);
    break;
  }
  case SynthKind::kSkewed: {
    const auto [sky_end, road_start] = street_bands(c, 1, 2, 3);
    // Tree sits in the unusual band; car, sign and pedestrian stay under 3%.
    c.object(0.22, 0.28, 0.26, 0.30, sky_end, road_start, 4, kTree);
    c.object(0.10, 0.12, 0.14, 0.17, sky_end, road_start, 6, kSign);
    c.object(0.18, 0.22, 0.11, 0.13, road_start, s, 5, kCar);
    c.object(0.05, 0.07, 0.20, 0.25, road_start - s / 10, s, 7, kPedestrian);
    break;
  }
  }
  return c.finish(params.noise);
}

// Writes images/, labels/ and manifest.json (train entries first) under dir.
inline DatasetManifest write_synth_dataset(const std::filesystem::path& dir, const SynthParams& params) {
  params.validate();
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "labels");
  DatasetManifest manifest{synth_classes(params.kind), {}, dir};
  const std::size_t total = params.n_train + params.n_test;
  for (std::size_t i = 0; i < total; ++i) {
    const bool train = i < params.n_train;
    char name[48];
    std::snprintf(name, sizeof name, "%s_%04zu.png", train ? "train" : "test", train ? i : i - params.n_train);
    const SynthImage img = synth_image(params, i);
    save_rgb_png((dir / "images" / name).string(), img.image);
    save_label_map((dir / "labels" / name).string(), img.labels);
    manifest.entries.push_back({std::string("images/") + name, std::string("labels/") + name,
                                train ? Split::kTrain : Split::kTest, std::nullopt, std::nullopt});
  }
  save_manifest((dir / "manifest.json").string(), manifest);
  return manifest;
}

} // namespace streetlabel
