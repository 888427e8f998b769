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

#include <cmath>
#include <random>
#include <set>

#include "streetlabel/mrf.hpp"

namespace streetlabel::testing {

// Random instance: softmax-like rows, a random graph and a co-occurrence
// model built from random counts.
inline MRFProblem random_problem(std::mt19937_64& rng, std::size_t n_nodes, std::size_t n_classes, double lambda,
                                 double edge_density = 0.3) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabelScoreMatrix scores(n_nodes, n_classes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    double sum = 0.0;
    for (auto& v : scores.row(i)) sum += (v = std::exp(3.0 * u(rng)));
    for (auto& v : scores.row(i)) v /= sum;
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (std::uint32_t i = 1; i < n_nodes; ++i) pairs.push_back({std::uniform_int_distribution<std::uint32_t>(0, i - 1)(rng), i});
  for (std::uint32_t i = 0; i < n_nodes; ++i)
    for (std::uint32_t j = i + 1; j < n_nodes; ++j)
      if (u(rng) < edge_density) pairs.push_back({i, j});
  PairCounts counts(n_classes);
  for (std::size_t i = 0; i < n_classes; ++i)
    for (std::size_t j = i; j < n_classes; ++j) {
      const auto c = std::uniform_int_distribution<std::uint64_t>(0, 40)(rng);
      counts.counts[i * n_classes + j] = counts.counts[j * n_classes + i] = c;
    }
  return {std::move(scores), AdjacencyGraph::from_pairs(n_nodes, pairs), cooccurrence_from_counts(counts), lambda,
          false};
}

// Energy recomputed from the raw definition, sharing nothing with the solver.
inline double oracle_energy(const MRFProblem& p, const Labeling& l) {
  const std::size_t c = p.scores.cols();
  double data = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i)
    for (std::size_t k = 0; k < c; ++k) {
      const double d = p.scores.at(i, k) - (k == l[i] ? 1.0 : 0.0);
      data += d * d;
    }
  double smooth = 0.0;
  for (const auto& e : p.graph.edges) {
    if (l[e.a] == l[e.b]) continue;
    double w = 1.0;
    if (!p.hard) {
      w = 0.0;
      for (std::size_t k = 0; k < c; ++k) w += std::pow(p.scores.at(e.a, k) - p.scores.at(e.b, k), 2);
    }
    const double pij = p.cooccurrence.cond[l[e.a] * c + l[e.b]], pji = p.cooccurrence.cond[l[e.b] * c + l[e.a]];
    smooth += w * -std::log(0.5 * (pij + pji));
  }
  return data + p.lambda * smooth;
}

// Lowest energy over every labeling one alpha-beta swap away from l.
inline double best_swap_neighbour(const MRFProblem& p, const Labeling& l, ClassIndex a, ClassIndex b) {
  std::vector<std::size_t> movable;
  for (std::size_t i = 0; i < l.size(); ++i)
    if (l[i] == a || l[i] == b) movable.push_back(i);
  double best = oracle_energy(p, l);
  Labeling trial = l;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << movable.size()); ++mask) {
    for (std::size_t k = 0; k < movable.size(); ++k) trial[movable[k]] = (mask >> k) & 1 ? b : a;
    best = std::min(best, oracle_energy(p, trial));
  }
  return best;
}

} // namespace streetlabel::testing
