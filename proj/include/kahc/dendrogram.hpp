// SPDX-License-Identifier: Apache-2.0
// Copyright (c) the kahc project authors.
//
// Dendrogram and flat-clustering types shared by every clustering engine,
// plus cutting, target-count extraction, and text serialization.
//
// Node id convention: leaves are 1..n; the cluster created by merge step s
// (steps run 1..n-1) is node n+s, so the root is node 2n-1.

#pragma once

#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "kahc/core.hpp"
#include "kahc/matrix.hpp"

namespace kahc {

/// One agglomeration step: the two nodes joined and the linkage value at
/// which they were joined.
struct Merge {
  index_t step = 0;      // 1-based merge index
  index_t left = 0;      // node id, always < right
  index_t right = 0;     // node id
  double height = 0.0;   // raw linkage value (similarity or dissimilarity)
};

/// A full agglomeration history: n-1 merges over n leaves.  `kind` records
/// whether heights are similarities (larger = tighter) or dissimilarities
/// (smaller = tighter).
struct Dendrogram {
  index_t leaf_count = 0;
  MatrixKind kind = MatrixKind::similarity;
  std::vector<Merge> merges;

  index_t root_id() const { return leaf_count + merges.size(); }
  bool is_leaf(index_t node) const { return node >= 1 && node <= leaf_count; }

  /// Merge that created an internal node (node id > leaf_count).
  const Merge& merge_of(index_t node) const {
    return merges[node - leaf_count - 1];
  }
};

/// Cluster assignment per point: ids 1..k, with 0 reserved for noise.
struct FlatClustering {
  std::vector<int> labels;
  int k = 0;
};

namespace detail {

/// Plain union-find over 0-based slots.
class UnionFind {
 public:
  explicit UnionFind(index_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), index_t{0});
  }
  index_t find(index_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(index_t a, index_t b) { parent_[find(b)] = find(a); }

 private:
  std::vector<index_t> parent_;
};

/// Labels each union-find component 1..k in order of first appearance.
inline FlatClustering label_components(UnionFind& uf, index_t n) {
  FlatClustering fc;
  fc.labels.assign(n, 0);
  std::vector<int> id_of_root(n, 0);
  for (index_t i = 0; i < n; ++i) {
    const index_t r = uf.find(i);
    if (id_of_root[r] == 0) id_of_root[r] = ++fc.k;
    fc.labels[i] = id_of_root[r];
  }
  return fc;
}

}  // namespace detail

/// Clusters = maximal subtrees all of whose internal merges pass the
/// threshold: similarity >= eta for similarity dendrograms, dissimilarity
/// <= eta for dissimilarity dendrograms.  Leaves pass trivially, so every
/// point receives a cluster (no noise).  Thresholds outside the height
/// range yield one cluster or n singletons.
inline FlatClustering cut(const Dendrogram& t, double eta) {
  const index_t n = t.leaf_count;
  std::vector<char> ok(t.merges.size() + 1, 0);  // 1-based by step
  auto child_ok = [&](index_t node) {
    return t.is_leaf(node) ? true : ok[node - n] != 0;
  };
  for (const Merge& m : t.merges) {
    const bool pass = t.kind == MatrixKind::similarity ? m.height >= eta
                                                       : m.height <= eta;
    ok[m.step] = pass && child_ok(m.left) && child_ok(m.right);
  }
  detail::UnionFind uf(n);
  // representative leaf (0-based) for every node id
  std::vector<index_t> rep(n + t.merges.size() + 1, 0);
  for (index_t i = 1; i <= n; ++i) rep[i] = i - 1;
  for (const Merge& m : t.merges) {
    rep[n + m.step] = rep[m.left];
    // a passing merge has passing descendants, so uniting its two child
    // components grows exactly the maximal passing subtrees
    if (ok[m.step]) uf.unite(rep[m.left], rep[m.right]);
  }
  return detail::label_components(uf, n);
}

/// Undoes the last kappa-1 merges: the kappa subtrees left standing are the
/// clusters (identical to stopping the agglomeration at kappa clusters).
inline FlatClustering extract_k(const Dendrogram& t, index_t kappa) {
  const index_t n = t.leaf_count;
  if (kappa < 1 || kappa > n) {
    throw argument_error("extract_k: kappa must be in [1, n]");
  }
  detail::UnionFind uf(n);
  std::vector<index_t> rep(n + t.merges.size() + 1, 0);
  for (index_t i = 1; i <= n; ++i) rep[i] = i - 1;
  const index_t keep = n - kappa;  // number of merges to apply
  for (const Merge& m : t.merges) {
    rep[n + m.step] = rep[m.left];
    if (m.step <= keep) uf.unite(rep[m.left], rep[m.right]);
  }
  return detail::label_components(uf, n);
}

/// One line per merge, `step,left,right,height`, heights printed with %.17g
/// so identical inputs reproduce byte-identical files.
inline std::string serialize_dendrogram(const Dendrogram& t) {
  std::string out;
  char buf[96];
  for (const Merge& m : t.merges) {
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%zu,%.17g\n",
                  static_cast<std::size_t>(m.step),
                  static_cast<std::size_t>(m.left),
                  static_cast<std::size_t>(m.right), m.height);
    out += buf;
  }
  return out;
}

/// Parses serialize_dendrogram output; `kind` declares how heights are to
/// be interpreted (the line format does not carry it).  Validates the merge
/// structure: steps 1..n-1 in order, node ids in range, no node adopted by
/// two parents.
inline Dendrogram parse_dendrogram(const std::string& text, MatrixKind kind) {
  Dendrogram t;
  t.kind = kind;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 4) {
      throw structural_error("row " + std::to_string(line_no) +
                             ": expected step,left,right,height");
    }
    Merge m;
    auto parse_index = [&](std::string_view f) {
      index_t v = 0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size()) {
        throw parse_error("row " + std::to_string(line_no) +
                          ": bad integer field '" + std::string(f) + "'");
      }
      return v;
    };
    m.step = parse_index(fields[0]);
    m.left = parse_index(fields[1]);
    m.right = parse_index(fields[2]);
    m.height = detail::parse_double_field(fields[3], line_no);
    t.merges.push_back(m);
  }
  if (t.merges.empty()) throw structural_error("empty dendrogram text");
  t.leaf_count = t.merges.size() + 1;
  std::vector<char> used(2 * t.leaf_count, 0);
  for (std::size_t s = 0; s < t.merges.size(); ++s) {
    const Merge& m = t.merges[s];
    if (m.step != s + 1) {
      throw structural_error("merge steps must run 1..n-1 in order");
    }
    for (index_t node : {m.left, m.right}) {
      if (node < 1 || node >= t.leaf_count + m.step) {
        throw structural_error("merge " + std::to_string(m.step) +
                               " references node " + std::to_string(node) +
                               " out of range");
      }
      if (used[node]) {
        throw structural_error("node " + std::to_string(node) +
                               " adopted by two parents");
      }
      used[node] = 1;
    }
    if (m.left >= m.right) {
      throw structural_error("merge " + std::to_string(m.step) +
                             " must list the smaller node first");
    }
  }
  return t;
}

/// Nested-parenthesis (Newick-style) export for external tree viewers:
/// leaves print their 1-based ids, internal nodes carry the merge height as
/// a label, and the tree ends with ';'.
inline std::string to_parenthesis(const Dendrogram& t) {
  std::string out;
  char buf[40];
  // iterative expansion to survive deep (chained) dendrograms
  struct Item {
    index_t node;
    int phase;  // 0 = open, 1 = between children, 2 = close
  };
  std::vector<Item> stack{{t.root_id(), 0}};
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    if (t.is_leaf(it.node)) {
      out += std::to_string(it.node);
      continue;
    }
    const Merge& m = t.merge_of(it.node);
    if (it.phase == 0) {
      out += '(';
      stack.push_back({it.node, 1});
      stack.push_back({m.left, 0});
    } else if (it.phase == 1) {
      out += ',';
      stack.push_back({it.node, 2});
      stack.push_back({m.right, 0});
    } else {
      std::snprintf(buf, sizeof(buf), ")%.17g", m.height);
      out += buf;
    }
  }
  out += ';';
  return out;
}

/// Writes `index,label` rows (1-based point index, 0 = noise) with a header.
inline void save_flat_csv(const FlatClustering& fc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw structural_error("cannot open file for writing: " + path);
  out << "index,label\n";
  for (std::size_t i = 0; i < fc.labels.size(); ++i) {
    out << (i + 1) << ',' << fc.labels[i] << '\n';
  }
}

}  // namespace kahc
