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
#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

#include "streetlabel/error.hpp"

namespace streetlabel {

// s-t max-flow / min-cut on a sparse graph with real capacities (Dinic's
// blocking-flow augmenting paths). Node ids are 0..n-1; the terminals are
// implicit.
class MaxFlow {
public:
  explicit MaxFlow(std::size_t n_nodes) : n_(n_nodes), adj_(n_nodes + 2) {}

  std::size_t size() const { return n_; }

  // Capacity of source->node and node->sink; accumulates.
  void add_terminal(std::size_t node, double cap_source, double cap_sink) {
    check(node);
    if (cap_source < 0 || cap_sink < 0) throw Error("maxflow: negative terminal capacity");
    if (cap_source > 0) add_arc(source(), node, cap_source, 0.0);
    if (cap_sink > 0) add_arc(node, sink(), cap_sink, 0.0);
  }

  void add_edge(std::size_t u, std::size_t v, double cap_uv, double cap_vu) {
    check(u);
    check(v);
    if (cap_uv < 0 || cap_vu < 0) throw Error("maxflow: negative edge capacity");
    if (cap_uv > 0 || cap_vu > 0) add_arc(u, v, cap_uv, cap_vu);
  }

  double solve() {
    double flow = 0.0;
    level_.assign(adj_.size(), -1);
    next_.assign(adj_.size(), 0);
    while (bfs()) {
      std::fill(next_.begin(), next_.end(), 0);
      while (double pushed = augment(source(), std::numeric_limits<double>::infinity())) flow += pushed;
    }
    mark_source_side();
    solved_ = true;
    return flow;
  }

  // After solve(): true if the node ends on the source side of the min cut.
  bool in_source_side(std::size_t node) const {
    if (!solved_) throw Error("maxflow: query before solve");
    return reach_[node] != 0;
  }

private:
  static constexpr double kEps = 1e-12;

  struct Arc {
    std::size_t to;
    std::size_t rev;
    double cap;
  };

  std::size_t source() const { return n_; }
  std::size_t sink() const { return n_ + 1; }

  void check(std::size_t node) const {
    if (node >= n_) throw Error("maxflow: node out of range");
  }

  void add_arc(std::size_t u, std::size_t v, double cap, double rev_cap) {
    adj_[u].push_back({v, adj_[v].size(), cap});
    adj_[v].push_back({u, adj_[u].size() - 1, rev_cap});
    solved_ = false;
  }

  bool bfs() {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<std::size_t> q;
    level_[source()] = 0;
    q.push(source());
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (const Arc& a : adj_[u]) {
        if (a.cap > kEps && level_[a.to] < 0) {
          level_[a.to] = level_[u] + 1;
          q.push(a.to);
        }
      }
    }
    return level_[sink()] >= 0;
  }

  double augment(std::size_t u, double limit) {
    if (u == sink()) return limit;
    for (std::size_t& i = next_[u]; i < adj_[u].size(); ++i) {
      Arc& a = adj_[u][i];
      if (a.cap <= kEps || level_[a.to] != level_[u] + 1) continue;
      const double pushed = augment(a.to, std::min(limit, a.cap));
      if (pushed > 0) {
        a.cap -= pushed;
        adj_[a.to][a.rev].cap += pushed;
        return pushed;
      }
    }
    return 0.0;
  }

  void mark_source_side() {
    reach_.assign(adj_.size(), 0);
    std::vector<std::size_t> stack{source()};
    reach_[source()] = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (const Arc& a : adj_[u]) {
        if (a.cap > kEps && !reach_[a.to]) {
          reach_[a.to] = 1;
          stack.push_back(a.to);
        }
      }
    }
  }

  std::size_t n_;
  std::vector<std::vector<Arc>> adj_;
  std::vector<int> level_;
  std::vector<std::size_t> next_;
  std::vector<char> reach_;
  bool solved_ = false;
};

} // namespace streetlabel
