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

#include <fstream>
#include <random>

#include "mrf_oracle.hpp"
#include "streetlabel/maxflow.hpp"
#include "test_util.hpp"

using namespace streetlabel;
using streetlabel::testing::oracle_energy;
using streetlabel::testing::random_problem;
using streetlabel::testing::TempDir;

namespace {

CooccurrenceModel uniform_model(std::size_t n) {
  return {n, std::vector<double>(n * n, 1.0 / n), {}};
}

MRFProblem pair_problem(std::vector<std::vector<double>> rows, double lambda) {
  const std::size_t n = rows.size(), c = rows.front().size();
  std::vector<std::pair<std::uint32_t, std::uint32_t>> chain;
  for (std::uint32_t i = 0; i + 1 < n; ++i) chain.push_back({i, i + 1});
  return {LabelScoreMatrix::from_rows(rows), AdjacencyGraph::from_pairs(n, chain), uniform_model(c), lambda, false};
}

Labeling random_labeling(std::mt19937_64& rng, std::size_t n, std::size_t c) {
  Labeling l(n);
  for (auto& v : l) v = static_cast<ClassIndex>(std::uniform_int_distribution<std::size_t>(0, c - 1)(rng));
  return l;
}

} // namespace

TEST(MaxFlow, SmallKnownNetwork) {
  // s->0 (3), s->1 (2), 0->1 (1), 0->t (2), 1->t (3)
  MaxFlow g(2);
  g.add_terminal(0, 3, 2);
  g.add_terminal(1, 2, 3);
  g.add_edge(0, 1, 1, 0);
  EXPECT_DOUBLE_EQ(g.solve(), 5.0);
}

TEST(MaxFlow, MatchesBruteForceMinCut) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + t % 8;
    std::vector<double> cs(n), ct(n);
    std::vector<std::tuple<std::size_t, std::size_t, double, double>> edges;
    MaxFlow g(n);
    for (std::size_t i = 0; i < n; ++i) {
      cs[i] = u(rng) < 1.5 ? 0.0 : u(rng);
      ct[i] = u(rng) < 1.5 ? 0.0 : u(rng);
      g.add_terminal(i, cs[i], ct[i]);
      for (std::size_t j = i + 1; j < n; ++j)
        if (u(rng) < 2.0) {
          edges.emplace_back(i, j, u(rng), u(rng));
          g.add_edge(i, j, std::get<2>(edges.back()), std::get<3>(edges.back()));
        }
    }
    double best = 1e300;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) { // bit set: source side
      double cut = 0.0;
      for (std::size_t i = 0; i < n; ++i) cut += (mask >> i & 1) ? ct[i] : cs[i];
      for (const auto& [i, j, uv, vu] : edges) {
        const bool si = mask >> i & 1, sj = mask >> j & 1;
        if (si && !sj) cut += uv;
        if (sj && !si) cut += vu;
      }
      best = std::min(best, cut);
    }
    const double flow = g.solve();
    EXPECT_NEAR(flow, best, 1e-9);
    double side_cut = 0.0;
    for (std::size_t i = 0; i < n; ++i) side_cut += g.in_source_side(i) ? ct[i] : cs[i];
    for (const auto& [i, j, uv, vu] : edges) {
      if (g.in_source_side(i) && !g.in_source_side(j)) side_cut += uv;
      if (g.in_source_side(j) && !g.in_source_side(i)) side_cut += vu;
    }
    EXPECT_NEAR(side_cut, best, 1e-9);
  }
}

TEST(MaxFlow, RejectsBadInput) {
  MaxFlow g(2);
  EXPECT_THROW(g.add_terminal(2, 1, 1), Error);
  EXPECT_THROW(g.add_edge(0, 1, -1, 0), Error);
  EXPECT_THROW(g.in_source_side(0), Error);
}

TEST(Energy, DataTermValues) {
  auto p = pair_problem({{0.7, 0.2, 0.1}, {1.0 / 3, 1.0 / 3, 1.0 / 3}}, 0.0);
  EXPECT_NEAR(data_term(p, 0, 0), 0.14, 1e-12);
  for (ClassIndex l = 0; l < 3; ++l) EXPECT_NEAR(data_term(p, 1, l), 2.0 / 3.0, 1e-12);
}

TEST(Energy, PairWeightAndCost) {
  auto p = pair_problem({{0.7, 0.2, 0.1}, {0.5, 0.4, 0.1}}, 1.0);
  EXPECT_NEAR(pair_weight(p, 0, 1), 0.08, 1e-12);
  p.hard = true;
  EXPECT_EQ(pair_weight(p, 0, 1), 1.0);

  CooccurrenceModel half{2, {0.5, 0.5, 0.5, 0.5}, {}};
  EXPECT_NEAR(label_pair_cost(half, 0, 1), 0.6931471805599453, 1e-15);
  EXPECT_EQ(label_pair_cost(half, 1, 1), 0.0);
}

TEST(Energy, SmoothnessIsSymmetricAndZeroOnAgreement) {
  std::mt19937_64 rng(2);
  const auto p = random_problem(rng, 6, 4, 1.0, 1.0);
  for (const auto& e : p.graph.edges)
    for (ClassIndex a = 0; a < 4; ++a)
      for (ClassIndex b = 0; b < 4; ++b) {
        EXPECT_DOUBLE_EQ(smoothness_term(p, e, a, b), smoothness_term(p, e, b, a));
        if (a == b) {
          EXPECT_EQ(smoothness_term(p, e, a, b), 0.0);
        }
        EXPECT_GE(smoothness_term(p, e, a, b), 0.0);
      }
}

TEST(Energy, MatchesIndependentOracle) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 300; ++t) {
    auto p = random_problem(rng, 2 + t % 20, 2 + t % 7, 0.1 * (t % 13));
    p.hard = t % 3 == 0;
    const auto l = random_labeling(rng, p.n_nodes(), p.n_classes());
    EXPECT_NEAR(total_energy(p, l), oracle_energy(p, l), 1e-9 * std::max(1.0, oracle_energy(p, l)));
  }
}

TEST(Energy, RejectsMalformedProblems) {
  auto p = pair_problem({{0.5, 0.5}, {0.5, 0.5}}, 0.5);
  EXPECT_THROW(total_energy(p, {0}), Error);
  p.lambda = -1;
  EXPECT_THROW(solve(p, {0, 0}), Error);
  p.lambda = 0.5;
  EXPECT_THROW(solve(p, {0, 2}), Error);
  p.cooccurrence = uniform_model(3);
  EXPECT_THROW(p.validate(), Error);
}

TEST(Solver, ZeroLambdaGivesArgmax) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    const auto p = random_problem(rng, 1 + t % 50, 2 + t % 10, 0.0);
    const auto r = solve(p, random_labeling(rng, p.n_nodes(), p.n_classes()));
    EXPECT_EQ(r.labels, argmax_labeling(p.scores)) << t;
  }
}

TEST(Solver, BinaryProblemsAreExact) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    auto p = random_problem(rng, 1 + t % 14, 2, 0.5 + 0.2 * (t % 20), 0.5);
    p.hard = t % 4 == 0;
    const auto r = solve(p, random_labeling(rng, p.n_nodes(), 2));
    EXPECT_NEAR(r.energy, oracle_energy(p, brute_force_solve(p)), 1e-9) << t;
  }
}

TEST(Solver, MonotoneTraceAndSwapLocalOptimum) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 40; ++t) {
    const auto p = random_problem(rng, 3 + t % 10, 3 + t % 3, 0.5 + 0.3 * (t % 8), 0.5);
    const auto initial = random_labeling(rng, p.n_nodes(), p.n_classes());
    const auto r = solve(p, initial);
    double prev = oracle_energy(p, initial);
    for (const auto& m : r.trace) {
      EXPECT_NEAR(m.energy_before, prev, 1e-9);
      EXPECT_LT(m.energy_after, m.energy_before);
      EXPECT_LT(m.alpha, m.beta);
      prev = m.energy_after;
    }
    EXPECT_NEAR(r.energy, oracle_energy(p, r.labels), 1e-9);
    EXPECT_NEAR(r.energy, prev, 1e-9);
    for (ClassIndex a = 0; a < p.n_classes(); ++a)
      for (ClassIndex b = a + 1; b < p.n_classes(); ++b)
        EXPECT_GE(streetlabel::testing::best_swap_neighbour(p, r.labels, a, b), r.energy - 1e-9);
  }
}

TEST(Solver, MultiLabelCloseToBruteForce) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 30; ++t) {
    const auto p = random_problem(rng, 6, 3, 1.0, 0.4);
    const auto r = solve(p, argmax_labeling(p.scores));
    const double opt = oracle_energy(p, brute_force_solve(p));
    EXPECT_GE(r.energy, opt - 1e-9);
    EXPECT_LE(r.energy, oracle_energy(p, argmax_labeling(p.scores)) + 1e-12);
  }
}

TEST(Solver, ExpansionIsMonotone) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 40; ++t) {
    const auto p = random_problem(rng, 4 + t % 9, 3 + t % 4, 1.0);
    const auto initial = random_labeling(rng, p.n_nodes(), p.n_classes());
    const auto r = solve(p, initial, {MoveKind::kExpansion});
    EXPECT_LE(r.energy, oracle_energy(p, initial) + 1e-12);
    for (const auto& m : r.trace) {
      EXPECT_EQ(m.alpha, m.beta);
      EXPECT_LT(m.energy_after, m.energy_before);
    }
  }
}

TEST(Solver, Deterministic) {
  std::mt19937_64 a(9), b(9);
  const auto p = random_problem(a, 30, 5, 1.5);
  const auto q = random_problem(b, 30, 5, 1.5);
  const auto r1 = solve(p, argmax_labeling(p.scores)), r2 = solve(q, argmax_labeling(q.scores));
  EXPECT_EQ(r1.labels, r2.labels);
  EXPECT_EQ(r1.energy, r2.energy);
  EXPECT_EQ(r1.trace.size(), r2.trace.size());
}

TEST(Solver, SmoothingPullsWeakNodeTowardNeighbours) {
  // A weakly confident node between two confident ones of another class.
  CooccurrenceModel model{2, {0.9, 0.9, 0.1, 0.1}, {}};
  MRFProblem p{LabelScoreMatrix::from_rows({{0.95, 0.05}, {0.45, 0.55}, {0.95, 0.05}}),
               AdjacencyGraph::from_pairs(3, {{0, 1}, {1, 2}}), model, 2.0, false};
  EXPECT_EQ(solve(p, argmax_labeling(p.scores)).labels, (Labeling{0, 0, 0}));
  p.lambda = 0.0;
  EXPECT_EQ(solve(p, argmax_labeling(p.scores)).labels, (Labeling{0, 1, 0}));
}

TEST(Solver, BruteForceTieBreakAndLimit) {
  auto p = pair_problem({{0.5, 0.5}, {0.5, 0.5}}, 0.0);
  EXPECT_EQ(brute_force_solve(p), (Labeling{0, 0}));
  std::mt19937_64 rng(1);
  EXPECT_THROW(brute_force_solve(random_problem(rng, 30, 3, 1.0)), Error);
}

TEST(Solver, TraceFile) {
  TempDir dir("trace");
  save_energy_trace(dir.file("t.jsonl"), {{0, 2, 3.5, 3.25}, {1, 2, 3.25, 3.0}});
  std::ifstream in(dir.file("t.jsonl"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, R"({"pair":[0,2],"energy_before":3.5,"energy_after":3.25})");
  std::getline(in, line);
  EXPECT_EQ(line, R"({"pair":[1,2],"energy_before":3.25,"energy_after":3.0})");
}

TEST(Energy, WorkedValues) {
  auto p = pair_problem({{1.0, 0.0}, {0.0, 1.0}}, 0.0);
  EXPECT_EQ(data_term(p, 0, 0), 0.0);
  EXPECT_NEAR(data_term(p, 0, 1), 2.0, 1e-15);
  EXPECT_NEAR(pair_weight(p, 0, 1), 2.0, 1e-15);

  auto q = pair_problem({{0.6, 0.4}, {0.4, 0.6}}, 1.0);
  EXPECT_NEAR(pair_weight(q, 0, 1), 0.08, 1e-15);

  // Weight 0.5 from scores (0.5, 0) and (0, 0.5); P = 0.25 both ways.
  MRFProblem r{LabelScoreMatrix::from_rows({{0.5, 0.0}, {0.0, 0.5}}), AdjacencyGraph::from_pairs(2, {{0, 1}}),
               {2, {0.75, 0.25, 0.25, 0.75}, {}}, 1.0, false};
  EXPECT_NEAR(pair_weight(r, 0, 1), 0.5, 1e-15);
  EXPECT_NEAR(smoothness_term(r, r.graph.edges[0], 0, 1), 0.6931471805599453, 1e-12);

  MRFProblem single{LabelScoreMatrix::from_rows({{0.9, 0.1}}), AdjacencyGraph::from_pairs(1, {}), uniform_model(2),
                    0.5, false};
  EXPECT_NEAR(total_energy(single, {0}), 0.02, 1e-12);
}

TEST(Solver, UniformChainBecomesConstant) {
  // Uniform scores give zero soft weight, so the chain uses unit weights.
  std::vector<std::vector<double>> rows(5, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  auto p = pair_problem(rows, 10.0);
  p.hard = true;
  p.cooccurrence = {3, {0.5, 0.25, 0.25, 0.25, 0.5, 0.25, 0.25, 0.25, 0.5}, {}};
  const auto r = solve(p, {0, 1, 2, 1, 0});
  for (ClassIndex l : r.labels) EXPECT_EQ(l, r.labels.front());
  EXPECT_NEAR(r.energy, oracle_energy(p, brute_force_solve(p)), 1e-12);
}

TEST(Solver, TriangleMatchesEnumeration) {
  CooccurrenceModel model{2, {0.8, 0.3, 0.2, 0.7}, {}};
  MRFProblem p{LabelScoreMatrix::from_rows({{0.9, 0.1}, {0.3, 0.7}, {0.55, 0.45}}),
               AdjacencyGraph::from_pairs(3, {{0, 1}, {1, 2}, {0, 2}}), model, 1.5, false};
  Labeling best;
  double best_energy = 1e300;
  for (int mask = 0; mask < 8; ++mask) {
    Labeling l{ClassIndex(mask & 1), ClassIndex((mask >> 1) & 1), ClassIndex((mask >> 2) & 1)};
    const double e = oracle_energy(p, l);
    if (e < best_energy) best_energy = e, best = l;
  }
  EXPECT_EQ(brute_force_solve(p), best);
  for (int mask = 0; mask < 8; ++mask) {
    Labeling init{ClassIndex(mask & 1), ClassIndex((mask >> 1) & 1), ClassIndex((mask >> 2) & 1)};
    EXPECT_NEAR(solve(p, init).energy, best_energy, 1e-12);
  }
}

TEST(Solver, ZeroLambdaIgnoresPerNodeOffset) {
  // Shifting a node's whole score row by c changes every label's data term
  // by the same amount.
  std::mt19937_64 rng(10);
  for (int t = 0; t < 50; ++t) {
    const auto p = random_problem(rng, 8, 4, 0.0);
    auto shifted = p;
    for (std::size_t i = 0; i < p.n_nodes(); ++i) {
      const double c = std::uniform_real_distribution<double>(-3, 3)(rng);
      for (double& v : shifted.scores.row(i)) v += c;
      const double delta = data_term(shifted, i, 0) - data_term(p, i, 0);
      for (ClassIndex l = 1; l < p.n_classes(); ++l)
        EXPECT_NEAR(data_term(shifted, i, l) - data_term(p, i, l), delta, 1e-9);
    }
    EXPECT_EQ(solve(shifted, argmax_labeling(p.scores)).labels, solve(p, argmax_labeling(p.scores)).labels);
  }
}
