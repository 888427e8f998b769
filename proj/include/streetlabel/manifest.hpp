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

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "streetlabel/classes.hpp"

namespace streetlabel {

enum class Split { kTrain, kTest };

struct ManifestEntry {
  std::string image;
  std::string labels;
  Split split = Split::kTrain;
  std::optional<std::string> features;
  std::optional<std::string> scores;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

// Paths are kept exactly as written in the file so that saving a loaded
// manifest reproduces it; resolve() maps them against the manifest directory.
struct DatasetManifest {
  ClassTable classes;
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  std::string resolve(const std::string& path) const {
    std::filesystem::path p(path);
    return (p.is_absolute() ? p : base_dir / p).lexically_normal().string();
  }

  std::vector<std::size_t> indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].split == split) out.push_back(i);
    return out;
  }
};

inline nlohmann::ordered_json manifest_to_json(const DatasetManifest& manifest) {
  nlohmann::ordered_json j;
  j["classes"] = manifest.classes.names();
  auto palette = nlohmann::ordered_json::array();
  for (const auto& c : manifest.classes.palette()) palette.push_back({c[0], c[1], c[2]});
  j["palette"] = palette;
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : manifest.entries) {
    nlohmann::ordered_json je;
    je["image"] = e.image;
    je["labels"] = e.labels;
    je["split"] = e.split == Split::kTrain ? "train" : "test";
    if (e.features) je["features"] = *e.features;
    if (e.scores) je["scores"] = *e.scores;
    entries.push_back(std::move(je));
  }
  j["entries"] = entries;
  return j;
}

inline std::string manifest_to_string(const DatasetManifest& manifest) {
  return manifest_to_json(manifest).dump(2) + "\n";
}

inline void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write manifest " + path);
  out << manifest_to_string(manifest);
}

struct ManifestOptions {
  bool check_files = true;
};

inline DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                                      ManifestOptions options = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error("manifest must be a JSON object");

  DatasetManifest manifest;
  manifest.base_dir = base_dir;
  try {
    auto names = j.at("classes").get<std::vector<std::string>>();
    std::vector<Rgb> palette;
    for (const auto& c : j.at("palette")) {
      auto v = c.get<std::vector<int>>();
      if (v.size() != 3) throw Error("palette colour must have 3 components");
      for (int x : v)
        if (x < 0 || x > 255) throw Error("palette component out of range");
      palette.push_back({static_cast<std::uint8_t>(v[0]), static_cast<std::uint8_t>(v[1]),
                         static_cast<std::uint8_t>(v[2])});
    }
    manifest.classes = ClassTable(std::move(names), std::move(palette));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("manifest class table malformed: ") + e.what());
  }

  if (!j.contains("entries") || !j["entries"].is_array()) throw Error("manifest has no entries");
  const auto& entries = j["entries"];
  if (entries.empty()) throw Error("manifest has no entries");

  std::set<std::string> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& je = entries[i];
    const std::string where = " at entry " + std::to_string(i);
    ManifestEntry e;
    try {
      e.image = je.at("image").get<std::string>();
      e.labels = je.at("labels").get<std::string>();
      const auto split = je.at("split").get<std::string>();
      if (split == "train") e.split = Split::kTrain;
      else if (split == "test") e.split = Split::kTest;
      else throw Error("unknown split \"" + split + "\"" + where);
      if (je.contains("features")) e.features = je["features"].get<std::string>();
      if (je.contains("scores")) e.scores = je["scores"].get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw Error("malformed record" + where + ": " + ex.what());
    }

    std::vector<std::string> paths{e.image, e.labels};
    if (e.features) paths.push_back(*e.features);
    if (e.scores) paths.push_back(*e.scores);
    for (const auto& p : paths) {
      const std::string resolved = manifest.resolve(p);
      if (!seen.insert(resolved).second) throw Error("duplicate path" + where);
      if (options.check_files && !std::filesystem::exists(resolved))
        throw Error("missing file" + where + ": " + resolved);
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

inline DatasetManifest load_manifest(const std::string& path, ManifestOptions options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing manifest file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), std::filesystem::path(path).parent_path(), options);
}

} // namespace streetlabel
