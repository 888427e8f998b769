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

#include <map>
#include <random>

#include "streetlabel/augment.hpp"
#include "test_util.hpp"

using namespace streetlabel;

namespace {

// In-memory source: per image, proportions and a labels-per-(K, flip) table.
// Unknown (K, flip) pairs fall back to `fallback`.
struct FakeSource {
  struct Image {
    std::vector<double> proportions;
    std::map<std::pair<int, bool>, std::vector<ClassIndex>> labels;
    std::vector<ClassIndex> fallback;
  };
  std::vector<Image> images;
  mutable int requests = 0;

  std::size_t size() const { return images.size(); }
  std::size_t image_id(std::size_t i) const { return 10 + i; }
  std::vector<double> proportions(std::size_t i) const { return images[i].proportions; }
  std::vector<ClassIndex> segment_labels(std::size_t i, int k, bool flipped) const {
    ++requests;
    auto it = images[i].labels.find({k, flipped});
    return it == images[i].labels.end() ? images[i].fallback : it->second;
  }
};

static_assert(AugmentationSource<FakeSource>);

const ClassTable kClasses = streetlabel::testing::street_classes(); // void sky building road car sign

std::vector<double> props(double sky, double building, double road, double car, double sign) {
  return {0.0, sky, building, road, car, sign};
}

std::size_t count_class(const std::vector<TrainingUnit>& units, ClassIndex c) {
  return static_cast<std::size_t>(std::count_if(units.begin(), units.end(), [&](auto& u) { return u.label == c; }));
}

} // namespace

TEST(LabelProportions, Counting) {
  LabelMap m(10, 10);
  for (std::size_t i = 0; i < 100; ++i) m.pixels[i] = i < 50 ? 3 : (i < 80 ? 1 : 4);
  const auto p = label_proportions(m, kClasses);
  EXPECT_DOUBLE_EQ(p[3], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.3);
  EXPECT_DOUBLE_EQ(p[4], 0.2);
  EXPECT_DOUBLE_EQ(p[2], 0.0);

  const auto uniform = label_proportions(LabelMap(4, 4, 5), kClasses);
  EXPECT_DOUBLE_EQ(uniform[5], 1.0);
  for (std::size_t c = 0; c < 5; ++c) EXPECT_DOUBLE_EQ(uniform[c], 0.0);

  for (double v : label_proportions(LabelMap(3, 3, kVoid), kClasses)) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(LabelProportions, DenominatorIncludesVoidPixels) {
  LabelMap m(4, 1);
  m.pixels = {kVoid, kVoid, 4, 4};
  EXPECT_DOUBLE_EQ(label_proportions(m, kClasses)[4], 0.5);
}

TEST(TierOf, Categories) {
  const TierThresholds t;
  EXPECT_EQ(tier_of(5, 0.12, t, kClasses), Tier::kCommon);
  EXPECT_EQ(tier_of(4, 0.05, t, kClasses), Tier::kUnusual);
  EXPECT_EQ(tier_of(4, 0.01, t, kClasses), Tier::kScarce);
  EXPECT_EQ(tier_of(3, 0.01, t, kClasses), Tier::kMajority);
  EXPECT_EQ(tier_of(1, 0.90, t, kClasses), Tier::kMajority);
}

TEST(TierOf, BoundariesFallDownward) {
  const TierThresholds t;
  EXPECT_EQ(tier_of(4, 0.10, t, kClasses), Tier::kUnusual);
  EXPECT_EQ(tier_of(4, 0.03, t, kClasses), Tier::kScarce);
  EXPECT_EQ(tier_of(4, std::nextafter(0.10, 1.0), t, kClasses), Tier::kCommon);
  EXPECT_EQ(tier_of(4, std::nextafter(0.03, 1.0), t, kClasses), Tier::kUnusual);
}

TEST(Thresholds, Validation) {
  TierThresholds t;
  t.unusual_min = 0.2;
  EXPECT_THROW(t.validate(), Error);
  AugmentationPlan plan;
  plan.tier_params[Tier::kScarce] = {100};
  EXPECT_THROW(plan.validate(), Error);
  AugmentationPlan majority;
  majority.flip_enabled[Tier::kMajority] = true;
  EXPECT_THROW(majority.validate(), Error);
}

TEST(BuildTrainingUnits, MajorityOnlyIsNotExpanded) {
  FakeSource src;
  src.images.push_back({props(0.4, 0.3, 0.3, 0, 0), {}, {1, 1, 2, 3, 3, kVoid, 2}});
  const auto units = build_training_units(src, AugmentationPlan{}, TierThresholds{}, kClasses);
  EXPECT_EQ(units.size(), 6u);
  for (const auto& u : units) {
    EXPECT_EQ(u.k, 150);
    EXPECT_FALSE(u.flipped);
    EXPECT_EQ(u.tier, Tier::kMajority);
    EXPECT_EQ(u.image_id, 10u);
  }
  EXPECT_EQ(src.requests, 1);
}

TEST(BuildTrainingUnits, ScarceClassEnumeration) {
  // Class car (scarce) covers exactly three segments at every K and flip:
  // 3 (main) + 3 (main flipped) + 6 extra K x 2 orientations x 3 = 42.
  FakeSource src;
  src.images.push_back({props(0.5, 0, 0.48, 0.02, 0), {}, {1, 4, 3, 4, 1, 3, 4, 1}});
  const auto units = build_training_units(src, AugmentationPlan{}, TierThresholds{}, kClasses);
  EXPECT_EQ(count_class(units, 4), 42u);
  EXPECT_EQ(count_class(units, 1), 3u);
  EXPECT_EQ(count_class(units, 3), 2u);
  for (const auto& u : units) {
    if (u.label == 4) {
      EXPECT_EQ(u.tier, Tier::kScarce);
    }
  }
}

TEST(BuildTrainingUnits, CommonGetsOnlyFlippedMainCopy) {
  FakeSource src;
  src.images.push_back({props(0.5, 0, 0.3, 0.2, 0), {}, {1, 4, 3, 4}});
  const auto units = build_training_units(src, AugmentationPlan{}, TierThresholds{}, kClasses);
  EXPECT_EQ(count_class(units, 4), 4u);
  for (const auto& u : units) EXPECT_EQ(u.k, 150);
}

TEST(BuildTrainingUnits, OrderingIsImageKFlipSegment) {
  FakeSource src;
  src.images.push_back({props(0.5, 0, 0.45, 0.05, 0), {}, {4, 1, 4}});
  src.images.push_back({props(0.5, 0, 0.48, 0.02, 0), {}, {3, 4}});
  const auto units = build_training_units(src, AugmentationPlan{}, TierThresholds{}, kClasses);
  for (std::size_t i = 1; i < units.size(); ++i) {
    const auto& a = units[i - 1];
    const auto& b = units[i];
    const auto key = [](const TrainingUnit& u) { return std::tuple(u.image_id, u.k, u.flipped, u.segment_id); };
    EXPECT_LT(key(a), key(b)) << i;
  }
  EXPECT_EQ(build_training_units(src, AugmentationPlan{}, TierThresholds{}, kClasses), units);
}

TEST(BuildTrainingUnits, EmptyTrainSplitRejected) {
  EXPECT_THROW(build_training_units(FakeSource{}, AugmentationPlan{}, TierThresholds{}, kClasses), Error);
}

TEST(BuildTrainingUnits, SkewedDatasetGetsMoreBalanced) {
  // 90% background / 10% scarce pixels: background occupies 18 of 20
  // segments, the scarce class 2, at every K.
  FakeSource src;
  for (int i = 0; i < 5; ++i) {
    std::vector<ClassIndex> labels(20, 3);
    labels[3 + i] = 5;
    labels[11] = 5;
    src.images.push_back({props(0, 0, 0.9, 0, 0.02), {}, labels});
  }
  const auto pre = build_training_units(src, AugmentationPlan{.tier_params = {}, .flip_enabled = {}}, TierThresholds{},
                                        kClasses);
  const auto post = build_training_units(src, AugmentationPlan{}, TierThresholds{}, kClasses);
  const double pre_share = static_cast<double>(count_class(pre, 5)) / pre.size();
  const double post_share = static_cast<double>(count_class(post, 5)) / post.size();
  EXPECT_DOUBLE_EQ(pre_share, 0.1);
  EXPECT_GT(post_share, pre_share);
  EXPECT_EQ(count_class(post, 3), count_class(pre, 3));
}

TEST(BuildTrainingUnits, PropertyScarceNeverFewerThanUnusualAndNoMajorityInflation) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> cls(0, 5);
  for (int trial = 0; trial < 50; ++trial) {
    FakeSource unusual, scarce;
    FakeSource::Image img;
    img.fallback.resize(12);
    for (auto& c : img.fallback) c = static_cast<ClassIndex>(cls(rng));
    for (int k : {100, 125, 130, 150, 170, 175, 200})
      for (bool f : {false, true}) {
        std::vector<ClassIndex> labels(8 + rng() % 8);
        for (auto& c : labels) c = static_cast<ClassIndex>(cls(rng));
        img.labels[{k, f}] = labels;
      }
    img.proportions = props(0.3, 0.2, 0.2, 0.05, 0.2);
    unusual.images.push_back(img);
    img.proportions = props(0.3, 0.2, 0.2, 0.02, 0.2);
    scarce.images.push_back(img);
    const auto u = build_training_units(unusual, AugmentationPlan{}, TierThresholds{}, kClasses);
    const auto s = build_training_units(scarce, AugmentationPlan{}, TierThresholds{}, kClasses);
    EXPECT_GE(count_class(s, 4), count_class(u, 4));
    const auto& main = img.labels.at({150, false});
    for (ClassIndex c : {ClassIndex{1}, ClassIndex{2}, ClassIndex{3}})
      EXPECT_EQ(count_class(s, c), static_cast<std::size_t>(std::count(main.begin(), main.end(), c)));
    for (const auto& unit : s) EXPECT_NE(unit.label, kVoid);
  }
}

TEST(ClassHistogram, Proportions) {
  std::vector<TrainingUnit> units(4);
  units[0].label = units[1].label = units[2].label = 1;
  units[3].label = 2;
  const auto h = class_histogram(units);
  ASSERT_EQ(h.size(), 2u);
  EXPECT_DOUBLE_EQ(h.at(1).proportion, 0.75);
  EXPECT_DOUBLE_EQ(h.at(2).proportion, 0.25);
  EXPECT_EQ(h.at(1).count, 3u);
  EXPECT_TRUE(class_histogram({}).empty());
  std::vector<TrainingUnit> same(5);
  for (auto& u : same) u.label = 4;
  EXPECT_DOUBLE_EQ(class_histogram(same).at(4).proportion, 1.0);
}

TEST(UnitsCsv, RoundTrip) {
  streetlabel::testing::TempDir dir("units");
  std::vector<TrainingUnit> units{{3, 150, false, 7, 4, Tier::kScarce}, {3, 200, true, 1, 5, Tier::kUnusual}};
  save_units(dir.file("u.csv"), units);
  EXPECT_EQ(load_units(dir.file("u.csv")), units);
  EXPECT_EQ(units_csv(units).substr(0, 40), "image_id,K,flipped,segment_id,class,tier");
}
