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
#include <concepts>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "streetlabel/classes.hpp"

namespace streetlabel {

enum class Tier { kMajority = 0, kCommon = 1, kUnusual = 2, kScarce = 3 };

inline const char* tier_name(Tier t) {
  switch (t) {
    case Tier::kMajority: return "majority";
    case Tier::kCommon: return "common";
    case Tier::kUnusual: return "unusual";
    case Tier::kScarce: return "scarce";
  }
  return "?";
}

inline Tier parse_tier(const std::string& s) {
  if (s == "majority") return Tier::kMajority;
  if (s == "common") return Tier::kCommon;
  if (s == "unusual") return Tier::kUnusual;
  if (s == "scarce") return Tier::kScarce;
  throw Error("unknown tier \"" + s + "\"");
}

struct TierThresholds {
  double common_min = 0.10;
  double unusual_min = 0.03;
  std::set<std::string> majority_classes{"sky", "building", "road"};

  void validate() const {
    if (!(0.0 < unusual_min && unusual_min < common_min && common_min < 1.0))
      throw Error("tier thresholds must satisfy 0 < unusual_min < common_min < 1");
  }
};

struct AugmentationPlan {
  int main_param = 150;
  std::map<Tier, std::vector<int>> tier_params{
      {Tier::kMajority, {}},
      {Tier::kCommon, {}},
      {Tier::kUnusual, {100, 125, 200}},
      {Tier::kScarce, {100, 125, 200, 175, 130, 170}},
  };
  std::map<Tier, bool> flip_enabled{
      {Tier::kMajority, false}, {Tier::kCommon, true}, {Tier::kUnusual, true}, {Tier::kScarce, true}};

  const std::vector<int>& extras(Tier t) const {
    static const std::vector<int> none;
    auto it = tier_params.find(t);
    return it == tier_params.end() ? none : it->second;
  }
  bool flips(Tier t) const {
    auto it = flip_enabled.find(t);
    return it != flip_enabled.end() && it->second;
  }

  void validate() const {
    if (main_param < 1) throw Error("main segmentation parameter must be >= 1");
    if (!extras(Tier::kMajority).empty() || flips(Tier::kMajority))
      throw Error("majority tier must not be augmented");
    const auto& unusual = extras(Tier::kUnusual);
    const auto& scarce = extras(Tier::kScarce);
    for (int k : unusual)
      if (std::find(scarce.begin(), scarce.end(), k) == scarce.end())
        throw Error("scarce parameter list must contain every unusual parameter");
    for (const auto& [tier, ks] : tier_params)
      for (int k : ks)
        if (k < 1) throw Error("segmentation parameter must be >= 1");
  }
};

struct TrainingUnit {
  std::size_t image_id = 0;
  int k = 0;
  bool flipped = false;
  std::uint32_t segment_id = 0;
  ClassIndex label = kVoid;
  Tier tier = Tier::kMajority;

  friend bool operator==(const TrainingUnit&, const TrainingUnit&) = default;
};

// Fraction of all image pixels carrying each class; void reports 0.
inline std::vector<double> label_proportions(const LabelMap& gt, const ClassTable& classes) {
  std::vector<double> out(classes.size(), 0.0);
  if (gt.empty()) return out;
  std::vector<std::size_t> counts(classes.size(), 0);
  for (ClassIndex c : gt.pixels) {
    if (c >= classes.size()) throw Error("label_proportions: class index out of range");
    ++counts[c];
  }
  for (std::size_t c = 1; c < classes.size(); ++c)
    out[c] = static_cast<double>(counts[c]) / static_cast<double>(gt.size());
  return out;
}

// "More than" thresholds: p == common_min is unusual, p == unusual_min is scarce.
inline Tier tier_of(ClassIndex c, double proportion, const TierThresholds& thresholds, const ClassTable& classes) {
  if (thresholds.majority_classes.contains(classes.name(c))) return Tier::kMajority;
  if (proportion > thresholds.common_min) return Tier::kCommon;
  if (proportion > thresholds.unusual_min) return Tier::kUnusual;
  return Tier::kScarce;
}

// Anything that can report, per training image, its label proportions and the
// per-segment majority labels of a segmentation at (k, flipped).
template <typename S>
concept AugmentationSource = requires(const S& s, std::size_t i, int k, bool flipped) {
  { s.size() } -> std::convertible_to<std::size_t>;
  { s.image_id(i) } -> std::convertible_to<std::size_t>;
  { s.proportions(i) } -> std::convertible_to<std::vector<double>>;
  { s.segment_labels(i, k, flipped) } -> std::convertible_to<std::vector<ClassIndex>>;
};

// Expands one training image into units. Ordering: K ascending, unflipped
// before flipped, then segment id.
template <AugmentationSource Source>
std::vector<TrainingUnit> image_training_units(const Source& source, std::size_t i, const AugmentationPlan& plan,
                                               const TierThresholds& thresholds, const ClassTable& classes) {
  const std::vector<double> props = source.proportions(i);
  std::vector<Tier> tiers(classes.size(), Tier::kMajority);
  for (std::size_t c = 1; c < classes.size(); ++c)
    tiers[c] = tier_of(static_cast<ClassIndex>(c), props.at(c), thresholds, classes);

  std::set<Tier> present;
  for (std::size_t c = 1; c < classes.size(); ++c)
    if (props[c] > 0.0) present.insert(tiers[c]);

  std::set<int> ks{plan.main_param};
  for (Tier t : present)
    for (int k : plan.extras(t)) ks.insert(k);

  // Which tiers a segmentation at (k, flipped) contributes.
  auto admits = [&](int k, bool flipped, Tier t) {
    if (k == plan.main_param && !flipped) return true;
    if (flipped && !plan.flips(t)) return false;
    if (k == plan.main_param) return true;
    const auto& ex = plan.extras(t);
    return std::find(ex.begin(), ex.end(), k) != ex.end();
  };

  std::vector<TrainingUnit> units;
  for (int k : ks) {
    for (bool flipped : {false, true}) {
      bool any = false;
      for (Tier t : present) any = any || admits(k, flipped, t);
      if (!any) continue;
      const std::vector<ClassIndex> labels = source.segment_labels(i, k, flipped);
      for (std::uint32_t s = 0; s < labels.size(); ++s) {
        const ClassIndex c = labels[s];
        if (c == kVoid || !admits(k, flipped, tiers[c])) continue;
        units.push_back({source.image_id(i), k, flipped, s, c, tiers[c]});
      }
    }
  }
  return units;
}

template <AugmentationSource Source>
std::vector<TrainingUnit> build_training_units(const Source& source, const AugmentationPlan& plan,
                                               const TierThresholds& thresholds, const ClassTable& classes) {
  plan.validate();
  thresholds.validate();
  if (source.size() == 0) throw Error("build_training_units: empty train split");
  std::vector<TrainingUnit> units;
  for (std::size_t i = 0; i < source.size(); ++i) {
    auto part = image_training_units(source, i, plan, thresholds, classes);
    units.insert(units.end(), part.begin(), part.end());
  }
  return units;
}

struct HistogramBin {
  std::size_t count = 0;
  double proportion = 0.0;
};

using ClassHistogram = std::map<ClassIndex, HistogramBin>;

inline ClassHistogram class_histogram(const std::vector<TrainingUnit>& units) {
  ClassHistogram out;
  for (const auto& u : units) ++out[u.label].count;
  for (auto& [c, bin] : out) bin.proportion = static_cast<double>(bin.count) / static_cast<double>(units.size());
  return out;
}

inline std::string units_csv(const std::vector<TrainingUnit>& units) {
  std::ostringstream out;
  out << "image_id,K,flipped,segment_id,class,tier\n";
  for (const auto& u : units)
    out << u.image_id << ',' << u.k << ',' << (u.flipped ? 1 : 0) << ',' << u.segment_id << ','
        << static_cast<int>(u.label) << ',' << tier_name(u.tier) << '\n';
  return out.str();
}

inline void save_units(const std::string& path, const std::vector<TrainingUnit>& units) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << units_csv(units);
}

inline std::vector<TrainingUnit> load_units(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open units file " + path);
  std::string line;
  if (!std::getline(in, line) || line != "image_id,K,flipped,segment_id,class,tier")
    throw Error(path + ": missing units header");
  std::vector<TrainingUnit> units;
  for (std::size_t row = 1; std::getline(in, line); ++row) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field[6];
    for (auto& f : field)
      if (!std::getline(ls, f, ',')) throw Error(path + ": malformed row " + std::to_string(row));
    try {
      TrainingUnit u;
      u.image_id = std::stoull(field[0]);
      u.k = std::stoi(field[1]);
      u.flipped = field[2] == "1";
      u.segment_id = static_cast<std::uint32_t>(std::stoul(field[3]));
      const int c = std::stoi(field[4]);
      if (c <= 0 || c > 255) throw Error("class out of range");
      u.label = static_cast<ClassIndex>(c);
      u.tier = parse_tier(field[5]);
      units.push_back(u);
    } catch (const std::exception& e) {
      throw Error(path + ": malformed row " + std::to_string(row) + ": " + e.what());
    }
  }
  return units;
}

inline std::string histogram_csv(const ClassHistogram& hist, const ClassTable& classes) {
  std::ostringstream out;
  out << "class,name,count,proportion\n";
  out.precision(10);
  for (const auto& [c, bin] : hist)
    out << static_cast<int>(c) << ',' << classes.name(c) << ',' << bin.count << ',' << bin.proportion << '\n';
  return out.str();
}

} // namespace streetlabel
