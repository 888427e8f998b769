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

#include <gtest/gtest.h>

#include "streetlabel/augment.hpp"
#include "streetlabel/synth.hpp"
#include "test_util.hpp"

using namespace streetlabel;
using streetlabel::testing::TempDir;

namespace {

constexpr SynthKind kAllKinds[] = {SynthKind::kStreet, SynthKind::kTwinBands, SynthKind::kSmallObjects,
                                   SynthKind::kSkewed};

std::vector<double> dataset_proportions(const SynthParams& params, std::size_t count) {
  const ClassTable classes = synth_classes(params.kind);
  std::vector<double> sum(classes.size(), 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    const auto p = label_proportions(synth_image(params, i).labels, classes);
    for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += p[c];
  }
  for (double& v : sum) v /= static_cast<double>(count);
  return sum;
}

} // namespace

TEST(Synth, KindNamesRoundTrip) {
  for (SynthKind k : kAllKinds) EXPECT_EQ(parse_synth_kind(synth_kind_name(k)), k);
  EXPECT_THROW(parse_synth_kind("forest"), Error);
}

TEST(Synth, ImagesDependOnlyOnParamsAndIndex) {
  for (SynthKind k : kAllKinds) {
    SynthParams p;
    p.kind = k;
    const auto a = synth_image(p, 3), b = synth_image(p, 3), c = synth_image(p, 4);
    EXPECT_EQ(a.image.pixels, b.image.pixels);
    EXPECT_EQ(a.labels.pixels, b.labels.pixels);
    EXPECT_NE(a.image.pixels, c.image.pixels);
    p.seed = 2;
    EXPECT_NE(synth_image(p, 3).image.pixels, a.image.pixels);
  }
}

TEST(Synth, EveryPixelCarriesAKnownClass) {
  for (SynthKind k : kAllKinds) {
    SynthParams p;
    p.kind = k;
    p.size = 48;
    const std::size_t n = synth_classes(k).size();
    for (std::size_t i = 0; i < 10; ++i) {
      const auto img = synth_image(p, i);
      EXPECT_EQ(img.image.width, 48);
      EXPECT_EQ(img.labels.height, 48);
      for (ClassIndex l : img.labels.pixels) {
        EXPECT_NE(l, kVoid);
        EXPECT_LT(l, n);
      }
    }
  }
}

TEST(Synth, TwinBandsShareOneColour) {
  SynthParams p;
  p.kind = SynthKind::kTwinBands;
  p.noise = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    const auto img = synth_image(p, i);
    for (const Rgb& px : img.image.pixels) EXPECT_EQ(px, img.image.pixels.front());
    // Upper class on top, lower class below, split near the middle.
    EXPECT_EQ(img.labels.at(0, 0), 1);
    EXPECT_EQ(img.labels.at(0, 63), 2);
    int split = 0;
    while (img.labels.at(0, split) == 1) ++split;
    EXPECT_NEAR(split, 32, 2);
  }
}

TEST(Synth, SkewedScarceClassesStayBelowThreePercent) {
  SynthParams p;
  p.kind = SynthKind::kSkewed;
  const auto share = dataset_proportions(p, 100);
  const ClassTable classes = synth_classes(p.kind);
  for (const char* name : {"car", "sign", "pedestrian"}) {
    const double v = share[*classes.find(name)];
    EXPECT_GT(v, 0.0) << name;
    EXPECT_LE(v, 0.03) << name;
  }
  for (const char* name : {"sky", "building", "road"}) EXPECT_GT(share[*classes.find(name)], 0.15) << name;
}

TEST(Synth, StreetHasPositionalLayout) {
  SynthParams p;
  const auto img = synth_image(p, 0);
  EXPECT_EQ(img.labels.at(10, 0), 1);
  EXPECT_EQ(img.labels.at(10, 63), 3);
  const auto share = dataset_proportions(p, 50);
  for (std::size_t c = 1; c < share.size(); ++c) EXPECT_GT(share[c], 0.01) << c;
}

TEST(Synth, WritesLoadableDataset) {
  TempDir dir("synth");
  SynthParams p;
  p.n_train = 3;
  p.n_test = 2;
  p.size = 32;
  write_synth_dataset(dir.path() / "data", p);
  const auto m = load_manifest((dir.path() / "data" / "manifest.json").string());
  ASSERT_EQ(m.entries.size(), 5u);
  EXPECT_EQ(m.indices(Split::kTrain), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(m.entries[3].image, "images/test_0000.png");
  EXPECT_EQ(m.classes, synth_classes(p.kind));
  const auto expected = synth_image(p, 4);
  EXPECT_EQ(load_rgb_png(m.resolve(m.entries[4].image)).pixels, expected.image.pixels);
  EXPECT_EQ(load_label_map(m.resolve(m.entries[4].labels), m.classes).pixels, expected.labels.pixels);
}

TEST(Synth, RejectsBadParams) {
  SynthParams p;
  p.size = 4;
  EXPECT_THROW(synth_image(p, 0), Error);
  p = {};
  p.noise = -1;
  EXPECT_THROW(synth_image(p, 0), Error);
}
