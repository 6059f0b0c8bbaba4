// SPDX-License-Identifier: Apache-2.0
// Copyright (c) the kahc project authors.
//
// Density-aware single linkage: pairwise measures are first core-adjusted
// (each value pulled toward the c-th-neighbor level of its endpoints), the
// hierarchy is built by single linkage over the adjusted matrix, and a flat
// clustering is extracted by condensing the tree to clusters of at least l
// points and keeping the ones with maximal excess-of-mass stability.
// Points never inside a kept cluster get the noise label 0.

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "kahc/core.hpp"
#include "kahc/dendrogram.hpp"
#include "kahc/linkage.hpp"
#include "kahc/matrix.hpp"

namespace kahc {

/// Core-adjusted pairwise measure.  `neighbors` is the min-samples
/// parameter c: each point's core level is its (c-1)-th nearest (most
/// similar) neighbor excluding itself, so c=1 leaves the matrix unchanged.
struct ReachabilityMatrix {
  SimMatrix matrix;
  index_t neighbors = 1;
};

/// Dissimilarity form: reach(x,y) = max{d(x,y), core(x), core(y)} with
/// core(x) the (c-1)-th nearest-neighbor distance (0 when c=1).
/// Similarity form: reach(x,y) = min{K(x,y), core(x), core(y)} with
/// core(x) the (c-1)-th most similar neighbor (1 when c=1).
inline ReachabilityMatrix build_reachability(const SimMatrix& m, index_t c) {
  const index_t n = m.n;
  if (c < 1) throw argument_error("build_reachability: min samples must be >= 1");
  if (c >= n) {
    throw argument_error(
        "build_reachability: min samples must be below the point count");
  }
  const bool dis = m.kind == MatrixKind::dissimilarity;

  std::vector<double> core(n, dis ? 0.0 : 1.0);
  if (c >= 2) {
    std::vector<double> row(n - 1);
    for (index_t i = 0; i < n; ++i) {
      index_t w = 0;
      for (index_t j = 0; j < n; ++j) {
        if (j != i) row[w++] = m.at(i, j);
      }
      auto kth = row.begin() + static_cast<std::ptrdiff_t>(c - 2);
      if (dis) {
        std::nth_element(row.begin(), kth, row.end());
      } else {
        std::nth_element(row.begin(), kth, row.end(), std::greater<>());
      }
      core[i] = *kth;
    }
  }

  ReachabilityMatrix out{
      SimMatrix(n, m.kind,
                "reach(c=" + std::to_string(c) + "):" + m.measure_tag),
      c};
  for (index_t i = 0; i < n; ++i) {
    for (index_t j = i + 1; j < n; ++j) {
      const double v =
          dis ? std::max({m.at(i, j), core[i], core[j]})
              : std::min({m.at(i, j), core[i], core[j]});
      out.matrix.set(i, j, v);
    }
  }
  return out;
}

namespace detail {

/// Merge tightness as a nonnegative measure: raw height for dissimilarity
/// trees, 1 - height for similarity trees.
inline double merge_measure(const Dendrogram& t, const Merge& m) {
  return t.kind == MatrixKind::dissimilarity ? m.height : 1.0 - m.height;
}

inline void collect_leaves(const Dendrogram& t, index_t node,
                           std::vector<index_t>& out) {
  std::vector<index_t> stack{node};
  while (!stack.empty()) {
    const index_t v = stack.back();
    stack.pop_back();
    if (t.is_leaf(v)) {
      out.push_back(v);
      continue;
    }
    const Merge& m = t.merge_of(v);
    stack.push_back(m.left);
    stack.push_back(m.right);
  }
}

/// Condensed hierarchy: cluster 0 is the root; every other cluster is born
/// at a split of its parent into two sides of at least l points each.
/// exit_cluster[p] is the deepest condensed cluster point p belonged to.
struct CondensedTree {
  std::vector<double> birth_lambda;
  std::vector<double> stability;
  std::vector<index_t> parent;
  std::vector<std::vector<index_t>> children;
  std::vector<index_t> exit_cluster;  // per point, 0-based
};

/// Top-down walk of the dendrogram.  Density level is lambda = 1/measure,
/// clamped at the smallest positive merge measure so duplicate points
/// (measure 0) keep stabilities finite.
inline CondensedTree condense_tree(const Dendrogram& t, index_t l) {
  if (l < 2) throw argument_error("condense_tree: min cluster size must be >= 2");
  const index_t n = t.leaf_count;

  double floor_measure = 1.0;
  bool found = false;
  for (const Merge& m : t.merges) {
    const double v = merge_measure(t, m);
    if (v > 0.0 && (!found || v < floor_measure)) {
      floor_measure = v;
      found = true;
    }
  }

  std::vector<index_t> size(n + t.merges.size() + 1, 1);
  for (const Merge& m : t.merges) {
    size[n + m.step] = size[m.left] + size[m.right];
  }

  CondensedTree ct;
  ct.birth_lambda = {0.0};
  ct.stability = {0.0};
  ct.parent = {0};
  ct.children = {{}};
  ct.exit_cluster.assign(n, 0);

  std::vector<index_t> fallen;
  std::vector<std::pair<index_t, index_t>> stack{{t.root_id(), 0}};
  while (!stack.empty()) {
    const auto [node, cluster] = stack.back();
    stack.pop_back();
    const Merge& m = t.merge_of(node);
    const double lambda =
        1.0 / std::max(merge_measure(t, m), floor_measure);
    const index_t sl = size[m.left], sr = size[m.right];
    const bool big_left = sl >= l, big_right = sr >= l;
    if (big_left && big_right) {
      // true split: the cluster ends here, two children are born
      ct.stability[cluster] +=
          static_cast<double>(sl + sr) * (lambda - ct.birth_lambda[cluster]);
      for (const index_t side : {m.left, m.right}) {
        const index_t child = ct.birth_lambda.size();
        ct.birth_lambda.push_back(lambda);
        ct.stability.push_back(0.0);
        ct.parent.push_back(cluster);
        ct.children.push_back({});
        ct.children[cluster].push_back(child);
        stack.push_back({side, child});
      }
    } else if (big_left || big_right) {
      // spine continues through the big side; the small side falls out
      const index_t big = big_left ? m.left : m.right;
      const index_t small = big_left ? m.right : m.left;
      ct.stability[cluster] += static_cast<double>(size[small]) *
                               (lambda - ct.birth_lambda[cluster]);
      fallen.clear();
      collect_leaves(t, small, fallen);
      for (const index_t leaf : fallen) {
        ct.exit_cluster[leaf - 1] = cluster;
      }
      stack.push_back({big, cluster});
    } else {
      // both sides below the minimum size: the cluster dissolves
      ct.stability[cluster] +=
          static_cast<double>(sl + sr) * (lambda - ct.birth_lambda[cluster]);
      fallen.clear();
      collect_leaves(t, node, fallen);
      for (const index_t leaf : fallen) {
        ct.exit_cluster[leaf - 1] = cluster;
      }
    }
  }
  return ct;
}

}  // namespace detail

/// Flat clustering by excess-of-mass selection over the l-condensed tree:
/// keep a cluster when its own stability is at least the combined best of
/// its descendants; the root is never kept, so data without any split into
/// two l-sized sides comes back all noise (k = 0).
inline FlatClustering hdbscan_extract(const Dendrogram& t, index_t l) {
  const detail::CondensedTree ct = detail::condense_tree(t, l);
  const index_t clusters = ct.birth_lambda.size();

  std::vector<double> best(clusters, 0.0);
  std::vector<char> selected(clusters, 0);
  for (index_t c = clusters; c-- > 0;) {
    double child_sum = 0.0;
    for (const index_t d : ct.children[c]) child_sum += best[d];
    if (c != 0 && ct.stability[c] >= child_sum) {
      selected[c] = 1;
      best[c] = ct.stability[c];
    } else {
      best[c] = child_sum;
    }
  }
  // an ancestor being kept overrides every descendant
  std::vector<char> blocked(clusters, 0);
  for (index_t c = 1; c < clusters; ++c) {
    blocked[c] = blocked[ct.parent[c]] || selected[ct.parent[c]];
    if (blocked[c]) selected[c] = 0;
  }

  const index_t n = t.leaf_count;
  FlatClustering flat;
  flat.labels.assign(n, 0);
  std::vector<int> cluster_label(clusters, 0);
  int next = 0;
  for (index_t p = 0; p < n; ++p) {
    index_t c = ct.exit_cluster[p];
    while (c != 0 && !selected[c]) c = ct.parent[c];
    if (c == 0) continue;  // noise
    if (cluster_label[c] == 0) cluster_label[c] = ++next;
    flat.labels[p] = cluster_label[c];
  }
  flat.k = next;
  return flat;
}

/// Full pipeline result: the core-adjusted single-linkage hierarchy plus
/// the stability-extracted flat clustering.
struct HdbscanResult {
  Dendrogram dendrogram;
  FlatClustering clustering;
};

/// Core-adjust the matrix with min-samples c, run single linkage, then
/// extract the flat clustering with min cluster size l.
inline HdbscanResult hdbscan_cluster(const SimMatrix& m, index_t l,
                                     index_t c) {
  const ReachabilityMatrix reach = build_reachability(m, c);
  HdbscanResult out;
  out.dendrogram = build_dendrogram(reach.matrix, LinkageKind::single);
  out.clustering = hdbscan_extract(out.dendrogram, l);
  return out;
}

}  // namespace kahc
