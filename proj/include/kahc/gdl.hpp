// SPDX-License-Identifier: Apache-2.0
// Copyright (c) the kahc project authors.
//
// Graph-degree agglomeration: a directed K-nearest-neighbor graph with
// Gaussian edge weights (bandwidth derived from the selected edges), initial
// clusters from the weak components of the 1-NN digraph, then greedy merging
// of the cluster pair with the highest affinity — the symmetric sum of
// average-indegree x average-outdegree products — until a target count is
// reached.  There is no hierarchy output, only the flat clustering.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "kahc/core.hpp"
#include "kahc/dendrogram.hpp"
#include "kahc/matrix.hpp"

namespace kahc {

/// Directed weighted K-NN graph.  Edge i->j exists iff j is one of i's K
/// nearest (most similar) points; its weight is exp(-measure(i,j)^2/sigma2)
/// with sigma2 = (a/(nK)) * sum of selected squared measures.  A zero
/// bandwidth (duplicate-only data) degenerates to unit weights.
struct DegreeGraph {
  index_t n = 0;
  index_t neighbors = 0;
  double scale = 1.0;
  double sigma2 = 0.0;
  std::vector<std::vector<std::pair<index_t, double>>> out_edges;
  std::vector<std::vector<std::pair<index_t, double>>> in_edges;
};

inline DegreeGraph build_degree_graph(const SimMatrix& m, index_t k,
                                      double a) {
  const index_t n = m.n;
  if (k < 1 || k >= n) {
    throw argument_error(
        "build_degree_graph: neighbor count must be in [1, n-1]");
  }
  if (!(a > 0.0)) {
    throw argument_error("build_degree_graph: scale must be positive");
  }
  const bool dis = m.kind == MatrixKind::dissimilarity;
  auto measure = [&](index_t i, index_t j) {
    return dis ? m.at(i, j) : 1.0 - m.at(i, j);
  };

  // K nearest per point: smallest measure, ties to the lowest index
  std::vector<std::vector<index_t>> nbr(n);
  std::vector<std::pair<double, index_t>> order;
  double sum_sq = 0.0;
  for (index_t i = 0; i < n; ++i) {
    order.clear();
    for (index_t j = 0; j < n; ++j) {
      if (j != i) order.push_back({measure(i, j), j});
    }
    std::partial_sort(order.begin(),
                      order.begin() + static_cast<std::ptrdiff_t>(k),
                      order.end());
    nbr[i].reserve(k);
    for (index_t r = 0; r < k; ++r) {
      nbr[i].push_back(order[r].second);
      sum_sq += order[r].first * order[r].first;
    }
  }

  DegreeGraph g;
  g.n = n;
  g.neighbors = k;
  g.scale = a;
  g.sigma2 = a * sum_sq / (static_cast<double>(n) * static_cast<double>(k));
  g.out_edges.assign(n, {});
  g.in_edges.assign(n, {});
  for (index_t i = 0; i < n; ++i) {
    for (const index_t j : nbr[i]) {
      const double d = measure(i, j);
      const double w =
          g.sigma2 > 0.0 ? std::exp(-d * d / g.sigma2) : 1.0;
      g.out_edges[i].push_back({j, w});
      g.in_edges[j].push_back({i, w});
    }
  }
  return g;
}

namespace detail {

/// Affinity between two clusters: for each point of one cluster, the
/// average indegree from and average outdegree to the other cluster are
/// multiplied, summed, and the two roles added together.  `mark` is an
/// all-zero scratch vector of size n, restored before returning.
inline double degree_affinity(const DegreeGraph& g,
                              const std::vector<index_t>& a,
                              const std::vector<index_t>& b,
                              std::vector<char>& mark) {
  double total = 0.0;
  const std::vector<index_t>* source = &a;
  const std::vector<index_t>* other = &b;
  for (int round = 0; round < 2; ++round) {
    for (const index_t p : *source) mark[p] = 1;
    double sum = 0.0;
    for (const index_t i : *other) {
      double in = 0.0, out = 0.0;
      for (const auto& [j, w] : g.in_edges[i]) {
        if (mark[j]) in += w;
      }
      for (const auto& [j, w] : g.out_edges[i]) {
        if (mark[j]) out += w;
      }
      sum += in * out;
    }
    const double size = static_cast<double>(source->size());
    total += sum / (size * size);
    for (const index_t p : *source) mark[p] = 0;
    std::swap(source, other);
  }
  return total;
}

}  // namespace detail

/// Flat clustering plus a flag set when the graph ran out of positive
/// affinities (or initial components) before reaching the target count.
struct GdlResult {
  FlatClustering clustering;
  bool disconnected = false;
};

inline GdlResult gdl_cluster(const SimMatrix& m, index_t k, double a,
                             index_t target) {
  const index_t n = m.n;
  if (target < 1) throw argument_error("gdl_cluster: target must be >= 1");
  const DegreeGraph g = build_degree_graph(m, k, a);

  // initial clusters: weak components of the 1-NN digraph
  detail::UnionFind uf(n);
  for (index_t i = 0; i < n; ++i) {
    uf.unite(i, g.out_edges[i].front().first);
  }
  std::vector<int> slot_of_root(n, -1);
  std::vector<std::vector<index_t>> members;
  for (index_t i = 0; i < n; ++i) {
    const index_t root = uf.find(i);
    if (slot_of_root[root] < 0) {
      slot_of_root[root] = static_cast<int>(members.size());
      members.push_back({});
    }
    members[static_cast<std::size_t>(slot_of_root[root])].push_back(i);
  }

  const index_t initial = members.size();
  std::vector<char> alive(initial, 1);
  index_t remaining = initial;
  GdlResult res;

  if (remaining > target) {
    std::vector<char> mark(n, 0);
    std::vector<double> aff(initial * initial, 0.0);
    for (index_t i = 0; i < initial; ++i) {
      for (index_t j = i + 1; j < initial; ++j) {
        aff[i * initial + j] =
            detail::degree_affinity(g, members[i], members[j], mark);
      }
    }
    while (remaining > target) {
      // argmax affinity; ties to the lexicographically smallest slot pair
      index_t bi = 0, bj = 0;
      double best = 0.0;
      for (index_t i = 0; i < initial; ++i) {
        if (!alive[i]) continue;
        for (index_t j = i + 1; j < initial; ++j) {
          if (!alive[j]) continue;
          if (aff[i * initial + j] > best) {
            best = aff[i * initial + j];
            bi = i;
            bj = j;
          }
        }
      }
      if (best <= 0.0) break;  // nothing reachable: graph is disconnected
      members[bi].insert(members[bi].end(), members[bj].begin(),
                         members[bj].end());
      members[bj].clear();
      alive[bj] = 0;
      --remaining;
      for (index_t x = 0; x < initial; ++x) {
        if (!alive[x] || x == bi) continue;
        aff[std::min(x, bi) * initial + std::max(x, bi)] =
            detail::degree_affinity(g, members[bi], members[x], mark);
      }
    }
  }
  res.disconnected = remaining != target;

  std::vector<index_t> owner(n, 0);
  for (index_t c = 0; c < initial; ++c) {
    if (!alive[c]) continue;
    for (const index_t p : members[c]) owner[p] = c;
  }
  res.clustering.labels.assign(n, 0);
  std::vector<int> label_of_slot(initial, 0);
  int next = 0;
  for (index_t p = 0; p < n; ++p) {
    if (label_of_slot[owner[p]] == 0) label_of_slot[owner[p]] = ++next;
    res.clustering.labels[p] = label_of_slot[owner[p]];
  }
  res.clustering.k = next;
  return res;
}

}  // namespace kahc
