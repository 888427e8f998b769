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
#include <concepts>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "streetlabel/classes.hpp"
#include "streetlabel/retrieval.hpp"
#include "streetlabel/slic.hpp"

namespace streetlabel {

struct Edge {
  std::uint32_t a = 0;
  std::uint32_t b = 0; // a < b
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct AdjacencyGraph {
  std::size_t n_nodes = 0;
  std::vector<Edge> edges; // sorted, unique

  static AdjacencyGraph from_pairs(std::size_t n_nodes, std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs) {
    std::set<Edge> unique;
    for (auto [u, v] : pairs) {
      if (u == v) throw Error("adjacency: self-loop on node " + std::to_string(u));
      if (u >= n_nodes || v >= n_nodes) throw Error("adjacency: node index out of range");
      unique.insert({std::min(u, v), std::max(u, v)});
    }
    return {n_nodes, {unique.begin(), unique.end()}};
  }
};

// Two superpixels are adjacent iff some pair of their pixels is 4-connected.
inline AdjacencyGraph build_adjacency(const SuperpixelMap& spx) {
  std::set<Edge> unique;
  for (int y = 0; y < spx.height; ++y) {
    for (int x = 0; x < spx.width; ++x) {
      const std::uint32_t s = spx.at(x, y);
      if (x + 1 < spx.width) {
        const std::uint32_t t = spx.at(x + 1, y);
        if (s != t) unique.insert({std::min(s, t), std::max(s, t)});
      }
      if (y + 1 < spx.height) {
        const std::uint32_t t = spx.at(x, y + 1);
        if (s != t) unique.insert({std::min(s, t), std::max(s, t)});
      }
    }
  }
  return {spx.size(), {unique.begin(), unique.end()}};
}

// Symmetric label-pair counts over adjacency edges; void-touching edges skipped.
struct PairCounts {
  std::size_t n_classes = 0;
  std::vector<std::uint64_t> counts; // counts[i * n + j]

  explicit PairCounts(std::size_t n = 0) : n_classes(n), counts(n * n, 0) {}

  std::uint64_t at(std::size_t i, std::size_t j) const { return counts[i * n_classes + j]; }

  void add(const AdjacencyGraph& graph, const std::vector<ClassIndex>& labels) {
    if (labels.size() != graph.n_nodes) throw Error("cooccurrence: label count does not match graph");
    for (const Edge& e : graph.edges) {
      const ClassIndex li = labels[e.a], lj = labels[e.b];
      if (li == kVoid || lj == kVoid) continue;
      if (li >= n_classes || lj >= n_classes) throw Error("cooccurrence: label out of range");
      ++counts[static_cast<std::size_t>(li) * n_classes + lj];
      ++counts[static_cast<std::size_t>(lj) * n_classes + li];
    }
  }

  PairCounts& operator+=(const PairCounts& other) {
    for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += other.counts[k];
    return *this;
  }
};

struct CooccurrenceParams {
  double alpha = 1.0;
  double floor = 1e-6;
};

// cond[i][j] = P(l_i | l_j); every column sums to one.
struct CooccurrenceModel {
  std::size_t n_classes = 0;
  std::vector<double> cond;
  CooccurrenceParams params;

  double p(std::size_t i, std::size_t j) const { return cond[i * n_classes + j]; }
};

// Column j: (c[i][j] + alpha) / (sum_i c[i][j] + alpha * n). Entries below
// the floor are raised to it and the remaining mass of the column is rescaled
// so the floored entries stay at exactly the floor.
inline CooccurrenceModel cooccurrence_from_counts(const PairCounts& counts, CooccurrenceParams params = {}) {
  const std::size_t n = counts.n_classes;
  if (n == 0) throw Error("cooccurrence: no classes");
  if (params.alpha < 0.0 || params.floor < 0.0 || params.floor * n >= 1.0)
    throw Error("cooccurrence: invalid smoothing parameters");
  CooccurrenceModel model{n, std::vector<double>(n * n, 0.0), params};
  std::vector<double> col(n);
  for (std::size_t j = 0; j < n; ++j) {
    double total = params.alpha * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) total += static_cast<double>(counts.at(i, j));
    for (std::size_t i = 0; i < n; ++i)
      col[i] = total > 0.0 ? (static_cast<double>(counts.at(i, j)) + params.alpha) / total : 1.0 / n;

    std::vector<bool> floored(n, false);
    for (bool changed = true; changed;) {
      changed = false;
      double free_mass = 0.0;
      std::size_t n_floored = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!floored[i] && col[i] < params.floor) {
          floored[i] = true;
          changed = true;
        }
        if (floored[i]) ++n_floored;
        else free_mass += col[i];
      }
      const double target = 1.0 - params.floor * static_cast<double>(n_floored);
      for (std::size_t i = 0; i < n; ++i) col[i] = floored[i] ? params.floor : col[i] * target / free_mass;
    }
    for (std::size_t i = 0; i < n; ++i) model.cond[i * n + j] = col[i];
  }
  return model;
}

// Anything that yields, for a train image id, the adjacency graph and
// majority labels of its main-parameter segmentation.
template <typename P>
concept ContextProvider = requires(const P& p, std::size_t image_id) {
  { p.context_of(image_id) } -> std::convertible_to<std::pair<AdjacencyGraph, std::vector<ClassIndex>>>;
};

template <ContextProvider Provider>
CooccurrenceModel estimate_cooccurrence(const RetrievalSet& retrieval, const Provider& provider,
                                        std::size_t n_classes, CooccurrenceParams params = {}) {
  if (retrieval.empty()) throw Error("estimate_cooccurrence: empty retrieval set");
  PairCounts counts(n_classes);
  for (const auto& nb : retrieval) {
    const auto [graph, labels] = provider.context_of(nb.image_id);
    counts.add(graph, labels);
  }
  return cooccurrence_from_counts(counts, params);
}

inline std::string cooccurrence_csv(const CooccurrenceModel& model, const ClassTable& classes) {
  if (classes.size() != model.n_classes) throw Error("cooccurrence_csv: class count mismatch");
  std::ostringstream out;
  out << std::setprecision(17);
  for (std::size_t j = 0; j < classes.size(); ++j) out << (j ? "," : "") << classes.name(static_cast<ClassIndex>(j));
  out << "\n";
  for (std::size_t i = 0; i < model.n_classes; ++i) {
    for (std::size_t j = 0; j < model.n_classes; ++j) out << (j ? "," : "") << model.p(i, j);
    out << "\n";
  }
  return out.str();
}

inline void save_cooccurrence(const std::string& csv_path, const std::string& json_path, const CooccurrenceModel& model,
                              const ClassTable& classes, std::size_t k, const RetrievalSet& retrieval) {
  {
    std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + csv_path);
    out << cooccurrence_csv(model, classes);
  }
  nlohmann::ordered_json j;
  j["alpha"] = model.params.alpha;
  j["epsilon"] = model.params.floor;
  j["k"] = k;
  auto ids = nlohmann::ordered_json::array();
  for (const auto& nb : retrieval) ids.push_back(nb.image_id);
  j["retrieval_ids"] = ids;
  std::ofstream out(json_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + json_path);
  out << j.dump(2) << "\n";
}

} // namespace streetlabel
