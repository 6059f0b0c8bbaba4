// SPDX-License-Identifier: Apache-2.0
// Copyright (c) the kahc project authors.
//
// The agglomerative engine: four linkage functions over a pairwise-measure
// matrix and full dendrogram construction.
//
// Both similarity and dissimilarity matrices are handled through a unified
// internal "score" (score = value for similarities, -value for
// dissimilarities), so the engine always merges the argmax-score pair; the
// recorded heights are the raw linkage values.

#pragma once

#include <algorithm>
#include <limits>
#include <memory>
#include <set>
#include <utility>
#include <vector>

#include "kahc/core.hpp"
#include "kahc/dendrogram.hpp"
#include "kahc/matrix.hpp"

namespace kahc {

enum class LinkageKind { single, complete, average, weighted };

inline const char* to_string(LinkageKind k) {
  switch (k) {
    case LinkageKind::single:
      return "single";
    case LinkageKind::complete:
      return "complete";
    case LinkageKind::average:
      return "average";
    case LinkageKind::weighted:
      return "weighted";
  }
  return "?";
}

/// A cluster with its merge genealogy: either a single point or the union
/// of two subclusters.  The genealogy matters only for weighted linkage,
/// whose value depends on how the cluster was assembled.
class Cluster {
 public:
  static Cluster point(index_t i) {
    Cluster c;
    c.leaf_ = i;
    return c;
  }
  static Cluster merge(Cluster a, Cluster b) {
    Cluster c;
    c.left_ = std::make_shared<Cluster>(std::move(a));
    c.right_ = std::make_shared<Cluster>(std::move(b));
    return c;
  }

  bool is_point() const { return left_ == nullptr; }
  index_t point_index() const { return leaf_; }
  const Cluster& left() const { return *left_; }
  const Cluster& right() const { return *right_; }

  void collect_members(std::vector<index_t>& out) const {
    if (is_point()) {
      out.push_back(leaf_);
      return;
    }
    left_->collect_members(out);
    right_->collect_members(out);
  }
  std::vector<index_t> members() const {
    std::vector<index_t> out;
    collect_members(out);
    return out;
  }

 private:
  index_t leaf_ = 0;
  std::shared_ptr<Cluster> left_, right_;
};

namespace detail {

inline double weighted_linkage_rec(const Cluster& a, const Cluster& b,
                                   const SimMatrix& m) {
  // fully expanded, this averages M over cross pairs with weight
  // 2^-depth(a) * 2^-depth(b); the expansion order does not matter
  if (!a.is_point()) {
    return 0.5 * (weighted_linkage_rec(a.left(), b, m) +
                  weighted_linkage_rec(a.right(), b, m));
  }
  if (!b.is_point()) {
    return 0.5 * (weighted_linkage_rec(a, b.left(), m) +
                  weighted_linkage_rec(a, b.right(), m));
  }
  return m.at(a.point_index(), b.point_index());
}

}  // namespace detail

/// Linkage value between two disjoint clusters.
///
/// On similarity matrices: single = max cross value, complete = min,
/// average = mean, weighted = half-half recursive average over the merge
/// genealogy.  On dissimilarity matrices single/complete swap to min/max
/// (the tightest pair is the least dissimilar one); average and weighted
/// are unchanged.
inline double linkage_value(LinkageKind kind, const Cluster& ci,
                            const Cluster& cj, const SimMatrix& m) {
  const std::vector<index_t> a = ci.members();
  const std::vector<index_t> b = cj.members();
  if (a.empty() || b.empty()) {
    throw argument_error("linkage_value: clusters must be non-empty");
  }
  {
    std::set<index_t> seen(a.begin(), a.end());
    for (index_t x : b) {
      if (seen.count(x)) {
        throw argument_error("linkage_value: clusters overlap");
      }
    }
  }
  const bool sim = m.kind == MatrixKind::similarity;
  switch (kind) {
    case LinkageKind::single:
    case LinkageKind::complete: {
      // single picks the tightest cross pair, complete the loosest
      const bool want_max = (kind == LinkageKind::single) == sim;
      double best = m.at(a.front(), b.front());
      for (index_t x : a) {
        for (index_t y : b) {
          const double v = m.at(x, y);
          best = want_max ? std::max(best, v) : std::min(best, v);
        }
      }
      return best;
    }
    case LinkageKind::average: {
      double sum = 0.0;
      for (index_t x : a) {
        for (index_t y : b) sum += m.at(x, y);
      }
      return sum / (static_cast<double>(a.size()) *
                    static_cast<double>(b.size()));
    }
    case LinkageKind::weighted:
      return detail::weighted_linkage_rec(ci, cj, m);
  }
  throw argument_error("linkage_value: unknown linkage kind");
}

namespace detail {

inline void require_symmetric(const SimMatrix& m) {
  for (index_t i = 0; i < m.n; ++i) {
    for (index_t j = i + 1; j < m.n; ++j) {
      if (m.at(i, j) != m.at(j, i)) {
        throw argument_error("build_dendrogram: matrix is not symmetric");
      }
    }
  }
}

/// Single linkage via a maximum-score spanning tree: the argmax merge
/// sequence equals accepting spanning-tree edges in decreasing score order.
/// Equal-score edges are ordered by their original point-id pair, which can
/// permute tied merge steps relative to the generic engine; the resulting
/// trees are equivalent (identical cophenetic values).
inline Dendrogram single_linkage_mst(const SimMatrix& m) {
  const index_t n = m.n;
  const bool sim = m.kind == MatrixKind::similarity;
  auto score = [&](index_t i, index_t j) {
    const double v = m.at(i, j);
    return sim ? v : -v;
  };

  // Prim over the complete graph, O(n^2)
  struct Edge {
    index_t p, q;  // 0-based endpoints, p < q
    double score;
  };
  std::vector<Edge> edges;
  edges.reserve(n - 1);
  std::vector<char> in_tree(n, 0);
  std::vector<double> best(n, -std::numeric_limits<double>::infinity());
  std::vector<index_t> from(n, 0);
  in_tree[0] = 1;
  for (index_t j = 1; j < n; ++j) {
    best[j] = score(0, j);
    from[j] = 0;
  }
  for (index_t round = 1; round < n; ++round) {
    index_t pick = 0;
    double pick_score = -std::numeric_limits<double>::infinity();
    for (index_t j = 0; j < n; ++j) {
      if (!in_tree[j] && best[j] > pick_score) {
        pick = j;
        pick_score = best[j];
      }
    }
    in_tree[pick] = 1;
    edges.push_back({std::min(from[pick], pick), std::max(from[pick], pick),
                     pick_score});
    for (index_t j = 0; j < n; ++j) {
      if (!in_tree[j] && score(pick, j) > best[j]) {
        best[j] = score(pick, j);
        from[j] = pick;
      }
    }
  }

  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.p != b.p) return a.p < b.p;
    return a.q < b.q;
  });

  // replay: each accepted edge merges the two current clusters
  Dendrogram t;
  t.leaf_count = n;
  t.kind = m.kind;
  UnionFind uf(n);
  std::vector<index_t> node_of_root(n);
  for (index_t i = 0; i < n; ++i) node_of_root[i] = i + 1;
  index_t step = 0;
  for (const Edge& e : edges) {
    const index_t ra = uf.find(e.p);
    const index_t rb = uf.find(e.q);
    Merge mg;
    mg.step = ++step;
    mg.left = std::min(node_of_root[ra], node_of_root[rb]);
    mg.right = std::max(node_of_root[ra], node_of_root[rb]);
    mg.height = sim ? e.score : -e.score;
    t.merges.push_back(mg);
    uf.unite(ra, rb);
    node_of_root[uf.find(ra)] = n + step;
  }
  return t;
}

/// Generic argmax engine for complete, average, and weighted linkage,
/// using per-row best-partner caching.  Exact global merge order with
/// lexicographic (left id, right id) tie-breaking.
inline Dendrogram agglomerate_generic(const SimMatrix& m, LinkageKind kind) {
  const index_t n = m.n;
  const bool sim = m.kind == MatrixKind::similarity;

  std::vector<double> s(n * n);  // score matrix over active slots
  for (index_t i = 0; i < n * n; ++i) {
    s[i] = sim ? m.values[i] : -m.values[i];
  }
  std::vector<char> alive(n, 1);
  std::vector<index_t> node_id(n);
  std::vector<index_t> size(n, 1);
  for (index_t i = 0; i < n; ++i) node_id[i] = i + 1;

  auto pair_ids = [&](index_t a, index_t b) {
    return std::pair<index_t, index_t>(std::min(node_id[a], node_id[b]),
                                       std::max(node_id[a], node_id[b]));
  };
  // candidate (score, id-pair) comparison: higher score wins, then the
  // lexicographically smaller id pair
  auto better = [](double s1, std::pair<index_t, index_t> p1, double s2,
                   std::pair<index_t, index_t> p2) {
    if (s1 != s2) return s1 > s2;
    return p1 < p2;
  };

  std::vector<double> best_score(n);
  std::vector<index_t> best_partner(n);
  auto recompute_row = [&](index_t i) {
    double bs = -std::numeric_limits<double>::infinity();
    index_t bp = i;
    std::pair<index_t, index_t> bpair{0, 0};
    for (index_t j = 0; j < n; ++j) {
      if (j == i || !alive[j]) continue;
      const double sc = s[i * n + j];
      const auto pr = pair_ids(i, j);
      if (bp == i || better(sc, pr, bs, bpair)) {
        bs = sc;
        bp = j;
        bpair = pr;
      }
    }
    best_score[i] = bs;
    best_partner[i] = bp;
  };
  for (index_t i = 0; i < n; ++i) recompute_row(i);

  Dendrogram t;
  t.leaf_count = n;
  t.kind = m.kind;
  for (index_t step = 1; step < n; ++step) {
    // global argmax over cached row bests
    index_t bi = n;
    double bs = 0.0;
    std::pair<index_t, index_t> bpair{0, 0};
    for (index_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      const auto pr = pair_ids(i, best_partner[i]);
      if (bi == n || better(best_score[i], pr, bs, bpair)) {
        bi = i;
        bs = best_score[i];
        bpair = pr;
      }
    }
    const index_t i = bi;
    const index_t j = best_partner[bi];

    Merge mg;
    mg.step = step;
    mg.left = bpair.first;
    mg.right = bpair.second;
    mg.height = sim ? bs : -bs;
    t.merges.push_back(mg);

    // fold slot j into slot i
    const double si = static_cast<double>(size[i]);
    const double sj = static_cast<double>(size[j]);
    alive[j] = 0;
    node_id[i] = n + step;
    size[i] += size[j];
    for (index_t k = 0; k < n; ++k) {
      if (!alive[k] || k == i) continue;
      const double a = s[i * n + k];
      const double b = s[j * n + k];
      double v = 0.0;
      switch (kind) {
        case LinkageKind::single:
          v = std::max(a, b);
          break;
        case LinkageKind::complete:
          v = std::min(a, b);
          break;
        case LinkageKind::average:
          v = (si * a + sj * b) / (si + sj);
          break;
        case LinkageKind::weighted:
          v = 0.5 * (a + b);
          break;
      }
      s[i * n + k] = v;
      s[k * n + i] = v;
    }

    if (step == n - 1) break;
    recompute_row(i);
    for (index_t k = 0; k < n; ++k) {
      if (!alive[k] || k == i) continue;
      if (best_partner[k] == i || best_partner[k] == j) {
        recompute_row(k);
      } else {
        const double sc = s[k * n + i];
        if (better(sc, pair_ids(k, i), best_score[k],
                   pair_ids(k, best_partner[k]))) {
          best_score[k] = sc;
          best_partner[k] = i;
        }
      }
    }
  }
  return t;
}

}  // namespace detail

/// Builds the full dendrogram by repeatedly merging the tightest pair of
/// clusters (argmax similarity / argmin dissimilarity), with ties broken by
/// the lexicographically smallest (left id, right id) node pair.
///
/// Single linkage runs on a spanning-tree formulation in O(n^2); the other
/// linkages use cached-nearest-partner agglomeration with constant-time
/// pairwise update recurrences.
inline Dendrogram build_dendrogram(const SimMatrix& m, LinkageKind kind) {
  if (m.n < 2) throw argument_error("build_dendrogram: need n >= 2");
  detail::require_symmetric(m);
  if (kind == LinkageKind::single) return detail::single_linkage_mst(m);
  return detail::agglomerate_generic(m, kind);
}

}  // namespace kahc
