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
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "streetlabel/context.hpp"
#include "streetlabel/maxflow.hpp"
#include "streetlabel/scorer.hpp"

namespace streetlabel {

using Labeling = std::vector<ClassIndex>;

// E(l) = sum_i |A_i - e_{l_i}|^2 + lambda * sum_{(i,j)} E_s(l_i, l_j), with
// E_s = -w_ij * ln((P(l_i|l_j) + P(l_j|l_i)) / 2) for l_i != l_j and
// w_ij = |A_i - A_j|^2 (or 1 for the hard variant).
struct MRFProblem {
  LabelScoreMatrix scores;
  AdjacencyGraph graph;
  CooccurrenceModel cooccurrence;
  double lambda = 0.5;
  bool hard = false;

  std::size_t n_nodes() const { return scores.rows(); }
  std::size_t n_classes() const { return scores.cols(); }

  void validate() const {
    if (graph.n_nodes != scores.rows()) throw Error("MRF: graph node count does not match score rows");
    if (cooccurrence.n_classes != scores.cols()) throw Error("MRF: co-occurrence class count does not match scores");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("MRF: lambda must be finite and >= 0");
    for (const Edge& e : graph.edges)
      if (e.a >= e.b || e.b >= graph.n_nodes) throw Error("MRF: malformed edge");
  }
};

inline double data_term(const MRFProblem& p, std::size_t node, ClassIndex label) {
  const auto row = p.scores.row(node);
  double sum = 0.0;
  for (std::size_t c = 0; c < row.size(); ++c) {
    const double d = row[c] - (c == label ? 1.0 : 0.0);
    sum += d * d;
  }
  return sum;
}

inline double pair_weight(const MRFProblem& p, std::size_t i, std::size_t j) {
  if (p.hard) return 1.0;
  const auto a = p.scores.row(i), b = p.scores.row(j);
  double sum = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) sum += (a[c] - b[c]) * (a[c] - b[c]);
  return sum;
}

// Label-pair factor -ln((P(l|m) + P(m|l)) / 2), zero on the diagonal.
inline double label_pair_cost(const CooccurrenceModel& model, ClassIndex l, ClassIndex m) {
  if (l == m) return 0.0;
  return -std::log((model.p(l, m) + model.p(m, l)) / 2.0);
}

inline double smoothness_term(const MRFProblem& p, const Edge& edge, ClassIndex li, ClassIndex lj) {
  if (li == lj) return 0.0;
  return pair_weight(p, edge.a, edge.b) * label_pair_cost(p.cooccurrence, li, lj);
}

inline double total_energy(const MRFProblem& p, const Labeling& labels) {
  if (labels.size() != p.n_nodes()) throw Error("total_energy: labeling size mismatch");
  double data = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= p.n_classes()) throw Error("total_energy: label out of range");
    data += data_term(p, i, labels[i]);
  }
  double smooth = 0.0;
  for (const Edge& e : p.graph.edges) smooth += smoothness_term(p, e, labels[e.a], labels[e.b]);
  return data + p.lambda * smooth;
}

enum class MoveKind { kSwap, kExpansion };

struct Move {
  ClassIndex alpha = 0;
  ClassIndex beta = 0; // equals alpha for expansion moves
  double energy_before = 0.0;
  double energy_after = 0.0;
};

struct SolveOptions {
  MoveKind kind = MoveKind::kSwap;
  double min_improvement = 1e-12;
};

struct SolveResult {
  Labeling labels;
  double energy = 0.0;
  std::vector<Move> trace;
  int sweeps = 0;
};

namespace mrf_detail {

// Per-edge weights and label-pair costs, computed once per problem.
struct Tables {
  std::vector<double> edge_weight;
  std::vector<double> pair_cost; // n_classes^2
  std::vector<std::vector<std::pair<std::uint32_t, std::size_t>>> neighbours; // (node, edge index)
  std::size_t n_classes = 0;

  explicit Tables(const MRFProblem& p) : n_classes(p.n_classes()) {
    edge_weight.reserve(p.graph.edges.size());
    neighbours.resize(p.n_nodes());
    for (std::size_t k = 0; k < p.graph.edges.size(); ++k) {
      const Edge& e = p.graph.edges[k];
      edge_weight.push_back(pair_weight(p, e.a, e.b));
      neighbours[e.a].push_back({e.b, k});
      neighbours[e.b].push_back({e.a, k});
    }
    pair_cost.resize(n_classes * n_classes);
    for (std::size_t l = 0; l < n_classes; ++l)
      for (std::size_t m = 0; m < n_classes; ++m)
        pair_cost[l * n_classes + m] =
            label_pair_cost(p.cooccurrence, static_cast<ClassIndex>(l), static_cast<ClassIndex>(m));
  }

  double v(ClassIndex l, ClassIndex m) const { return pair_cost[static_cast<std::size_t>(l) * n_classes + m]; }
};

// Binary swap subproblem over the nodes labelled alpha or beta. Source side
// of the cut takes alpha, sink side takes beta.
inline Labeling swap_move(const MRFProblem& p, const Tables& t, const Labeling& current, ClassIndex alpha,
                          ClassIndex beta) {
  std::vector<std::uint32_t> active;
  std::vector<std::int64_t> local(current.size(), -1);
  for (std::uint32_t i = 0; i < current.size(); ++i) {
    if (current[i] == alpha || current[i] == beta) {
      local[i] = static_cast<std::int64_t>(active.size());
      active.push_back(i);
    }
  }
  Labeling next = current;
  if (active.empty()) return next;

  MaxFlow flow(active.size());
  for (std::size_t a = 0; a < active.size(); ++a) {
    const std::uint32_t i = active[a];
    double cost_alpha = data_term(p, i, alpha);
    double cost_beta = data_term(p, i, beta);
    for (auto [j, k] : t.neighbours[i]) {
      if (local[j] >= 0) {
        if (i < j) {
          const double cap = p.lambda * t.edge_weight[k] * t.v(alpha, beta);
          flow.add_edge(a, static_cast<std::size_t>(local[j]), cap, cap);
        }
        continue;
      }
      cost_alpha += p.lambda * t.edge_weight[k] * t.v(alpha, current[j]);
      cost_beta += p.lambda * t.edge_weight[k] * t.v(beta, current[j]);
    }
    const double base = std::min(cost_alpha, cost_beta);
    flow.add_terminal(a, cost_beta - base, cost_alpha - base);
  }
  flow.solve();
  for (std::size_t a = 0; a < active.size(); ++a) next[active[a]] = flow.in_source_side(a) ? alpha : beta;
  return next;
}

// Expansion subproblem: source side keeps its label, sink side takes alpha.
// Non-submodular pair terms are truncated (E00 lowered to E01 + E10).
inline Labeling expansion_move(const MRFProblem& p, const Tables& t, const Labeling& current, ClassIndex alpha) {
  const std::size_t n = current.size();
  std::vector<double> cost_keep(n), cost_alpha(n);
  for (std::size_t i = 0; i < n; ++i) {
    cost_keep[i] = data_term(p, i, current[i]);
    cost_alpha[i] = data_term(p, i, alpha);
  }
  MaxFlow flow(n);
  for (std::size_t k = 0; k < p.graph.edges.size(); ++k) {
    const Edge& e = p.graph.edges[k];
    const double w = p.lambda * t.edge_weight[k];
    const double e00 = w * t.v(current[e.a], current[e.b]);
    const double e01 = w * t.v(current[e.a], alpha);
    const double e10 = w * t.v(alpha, current[e.b]);
    const double a00 = std::min(e00, e01 + e10);
    // E = a00 + (e10 - a00) x_a + (0 - e10) x_b + (e01 + e10 - a00) (1 - x_a) x_b
    cost_alpha[e.a] += e10 - a00;
    cost_alpha[e.b] += -e10;
    flow.add_edge(e.a, e.b, e01 + e10 - a00, 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double base = std::min(cost_keep[i], cost_alpha[i]);
    flow.add_terminal(i, cost_alpha[i] - base, cost_keep[i] - base);
  }
  flow.solve();
  Labeling next = current;
  for (std::size_t i = 0; i < n; ++i)
    if (!flow.in_source_side(i)) next[i] = alpha;
  return next;
}

} // namespace mrf_detail

// Move-making minimisation from `initial`. Label pairs (alpha < beta) are
// visited in lexicographic order; a move is kept only if it lowers the
// energy by more than `min_improvement`; sweeps repeat until a full sweep
// keeps nothing.
inline SolveResult solve(const MRFProblem& p, const Labeling& initial, SolveOptions options = {}) {
  p.validate();
  if (initial.size() != p.n_nodes()) throw Error("solve: initial labeling size mismatch");
  for (ClassIndex l : initial)
    if (l >= p.n_classes()) throw Error("solve: initial label out of range");

  const mrf_detail::Tables tables(p);
  SolveResult result;
  result.labels = initial;
  result.energy = total_energy(p, initial);
  const auto n_classes = static_cast<int>(p.n_classes());

  auto consider = [&](Labeling candidate, ClassIndex a, ClassIndex b) {
    const double e = total_energy(p, candidate);
    if (e < result.energy - options.min_improvement) {
      result.trace.push_back({a, b, result.energy, e});
      result.labels = std::move(candidate);
      result.energy = e;
      return true;
    }
    return false;
  };

  for (bool improved = true; improved;) {
    improved = false;
    ++result.sweeps;
    if (options.kind == MoveKind::kSwap) {
      for (int a = 0; a < n_classes; ++a)
        for (int b = a + 1; b < n_classes; ++b) {
          const auto alpha = static_cast<ClassIndex>(a), beta = static_cast<ClassIndex>(b);
          improved |= consider(mrf_detail::swap_move(p, tables, result.labels, alpha, beta), alpha, beta);
        }
    } else {
      for (int a = 0; a < n_classes; ++a) {
        const auto alpha = static_cast<ClassIndex>(a);
        improved |= consider(mrf_detail::expansion_move(p, tables, result.labels, alpha), alpha, alpha);
      }
    }
  }
  return result;
}

inline constexpr double kBruteForceLimit = 1e7;

// Exhaustive minimiser; ties go to the lexicographically smallest labeling.
inline Labeling brute_force_solve(const MRFProblem& p) {
  p.validate();
  const std::size_t n = p.n_nodes(), c = p.n_classes();
  if (std::pow(static_cast<double>(c), static_cast<double>(n)) > kBruteForceLimit)
    throw Error("brute_force_solve: instance too large");
  Labeling current(n, 0), best(n, 0);
  double best_energy = std::numeric_limits<double>::infinity();
  for (;;) {
    const double e = total_energy(p, current);
    if (e < best_energy) {
      best_energy = e;
      best = current;
    }
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (++current[pos] < c) break;
      current[pos] = 0;
      if (pos == 0) return best;
    }
    if (n == 0) return best;
  }
}

inline void save_energy_trace(const std::string& path, const std::vector<Move>& trace) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  for (const Move& m : trace) {
    nlohmann::ordered_json j;
    j["pair"] = {m.alpha, m.beta};
    j["energy_before"] = m.energy_before;
    j["energy_after"] = m.energy_after;
    out << j.dump() << "\n";
  }
}

} // namespace streetlabel
