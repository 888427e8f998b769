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

#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "streetlabel/classes.hpp"

namespace streetlabel {

// counts(i, j): pixels of true class i predicted as class j. Void truth is
// never counted; void predictions count as errors.
class ConfusionMatrix {
public:
  explicit ConfusionMatrix(std::size_t n_classes = 0) : n_(n_classes), counts_(n_classes * n_classes, 0) {}

  std::size_t n_classes() const { return n_; }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * n_ + predicted]; }
  std::uint64_t& at(std::size_t truth, std::size_t predicted) { return counts_[truth * n_ + predicted]; }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto v : counts_) t += v;
    return t;
  }
  std::uint64_t row_total(std::size_t truth) const {
    std::uint64_t t = 0;
    for (std::size_t j = 0; j < n_; ++j) t += at(truth, j);
    return t;
  }
  std::uint64_t trace() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < n_; ++i) t += at(i, i);
    return t;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    if (other.n_ != n_) throw Error("confusion matrix size mismatch");
    for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
    return *this;
  }

  static ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
    ConfusionMatrix m(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw Error("confusion matrix must be square");
      for (std::size_t j = 0; j < rows.size(); ++j) m.at(i, j) = rows[i][j];
    }
    return m;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

inline void accumulate(ConfusionMatrix& confusion, const LabelMap& predicted, const LabelMap& truth) {
  if (predicted.width != truth.width || predicted.height != truth.height)
    throw Error("accumulate: prediction and ground truth dimensions differ");
  const std::size_t n = confusion.n_classes();
  for (std::size_t p = 0; p < truth.size(); ++p) {
    const ClassIndex t = truth.pixels[p];
    if (t == kVoid) continue;
    const ClassIndex q = predicted.pixels[p];
    if (t >= n || q >= n) throw Error("accumulate: class index out of range");
    ++confusion.at(t, q);
  }
}

inline double per_pixel_accuracy(const ConfusionMatrix& confusion) {
  const std::uint64_t total = confusion.total();
  if (total == 0) throw Error("per_pixel_accuracy: empty confusion matrix");
  return static_cast<double>(confusion.trace()) / static_cast<double>(total);
}

// Recall of one class, or nothing if the class never occurs in the truth.
inline std::optional<double> class_accuracy(const ConfusionMatrix& confusion, std::size_t c) {
  const std::uint64_t row = confusion.row_total(c);
  if (row == 0) return std::nullopt;
  return static_cast<double>(confusion.at(c, c)) / static_cast<double>(row);
}

// Mean recall over classes present in the ground truth.
inline double mean_class_accuracy(const ConfusionMatrix& confusion) {
  double sum = 0.0;
  std::size_t evaluated = 0;
  for (std::size_t c = 0; c < confusion.n_classes(); ++c) {
    if (auto acc = class_accuracy(confusion, c)) {
      sum += *acc;
      ++evaluated;
    }
  }
  if (evaluated == 0) throw Error("mean_class_accuracy: no class present in ground truth");
  return sum / static_cast<double>(evaluated);
}

inline std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
  return buf;
}

inline nlohmann::ordered_json metrics_report(const ConfusionMatrix& confusion, const ClassTable& classes) {
  nlohmann::ordered_json j;
  j["per_pixel"] = per_pixel_accuracy(confusion);
  j["mean_class"] = mean_class_accuracy(confusion);
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (std::size_t c = 1; c < confusion.n_classes(); ++c) {
    auto acc = class_accuracy(confusion, c);
    per_class[classes.name(static_cast<ClassIndex>(c))] = acc ? nlohmann::ordered_json(*acc) : nlohmann::ordered_json();
  }
  j["per_class"] = per_class;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < confusion.n_classes(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < confusion.n_classes(); ++k) row.push_back(confusion.at(i, k));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j;
}

// Classes as columns, one decimal; classes absent from the truth show "-".
inline std::string metrics_table(const ConfusionMatrix& confusion, const ClassTable& classes) {
  std::ostringstream out;
  auto cell = [&](const std::string& s) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%11s", s.c_str());
    out << buf;
  };
  cell("");
  for (std::size_t c = 1; c < confusion.n_classes(); ++c) cell(classes.name(static_cast<ClassIndex>(c)));
  cell("per-pixel");
  cell("mean-class");
  out << "\n";
  cell("accuracy");
  for (std::size_t c = 1; c < confusion.n_classes(); ++c) {
    auto acc = class_accuracy(confusion, c);
    cell(acc ? percent(*acc) : "-");
  }
  cell(percent(per_pixel_accuracy(confusion)));
  cell(percent(mean_class_accuracy(confusion)));
  out << "\n";
  return out.str();
}

} // namespace streetlabel
