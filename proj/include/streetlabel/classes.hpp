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

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "streetlabel/image.hpp"

namespace streetlabel {

// Ordered class names with a render palette. Index 0 is always void.
class ClassTable {
public:
  ClassTable() = default;

  ClassTable(std::vector<std::string> names, std::vector<Rgb> palette)
      : names_(std::move(names)), palette_(std::move(palette)) {
    if (names_.empty()) throw Error("class table has no classes");
    if (names_.size() > 256) throw Error("class table exceeds 256 classes");
    if (palette_.size() != names_.size())
      throw Error("palette has " + std::to_string(palette_.size()) + " colours for " +
                  std::to_string(names_.size()) + " classes");
    std::set<std::string> seen;
    for (const auto& name : names_)
      if (!seen.insert(name).second) throw Error("duplicate class name \"" + name + "\"");
  }

  std::size_t size() const { return names_.size(); }
  ClassIndex void_index() const { return kVoid; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Rgb>& palette() const { return palette_; }
  const std::string& name(ClassIndex c) const { return names_.at(c); }
  const Rgb& colour(ClassIndex c) const { return palette_.at(c); }

  std::optional<ClassIndex> find(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<ClassIndex>(i);
    return std::nullopt;
  }

  friend bool operator==(const ClassTable&, const ClassTable&) = default;

private:
  std::vector<std::string> names_;
  std::vector<Rgb> palette_;
};

} // namespace streetlabel
