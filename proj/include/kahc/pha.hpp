// SPDX-License-Identifier: Apache-2.0
// Copyright (c) the kahc project authors.
//
// Potential-field agglomeration: every point accumulates a negative
// potential -1/max(measure, lambda) from every other point (measure is the
// raw dissimilarity, or 1 - similarity for kernel matrices).  Clusters are
// merged by the representative-pair linkage: the cluster whose deepest
// potential is shallower contributes its potential minimum s1, the denser
// cluster contributes the point closest to s1 among those at least as deep
// as s1, and the linkage height is the pairwise measure of (s1, s2).

#pragma once

#include <algorithm>
#include <limits>
#include <utility>
#include <vector>

#include "kahc/core.hpp"
#include "kahc/dendrogram.hpp"
#include "kahc/linkage.hpp"
#include "kahc/matrix.hpp"

namespace kahc {

/// Per-point total potential plus the singularity cutoff used to build it.
struct PotentialField {
  std::vector<double> phi;  // strictly negative for n >= 2
  double lambda = 1.0;      // > 0
};

/// lambda is the mean pairwise measure divided by the scale factor s; a
/// duplicate-only dataset (mean 0) falls back to lambda = 1 so every
/// contribution is the clamped -1/lambda.
inline PotentialField compute_potential_field(const SimMatrix& m, double s) {
  if (!(s > 0.0)) {
    throw argument_error("compute_potential_field: scale must be positive");
  }
  const index_t n = m.n;
  if (n < 2) {
    throw argument_error("compute_potential_field: need at least two points");
  }
  const bool dis = m.kind == MatrixKind::dissimilarity;
  auto measure = [&](index_t i, index_t j) {
    return dis ? m.at(i, j) : 1.0 - m.at(i, j);
  };

  double mean = 0.0;
  for (index_t i = 0; i < n; ++i) {
    for (index_t j = i + 1; j < n; ++j) mean += measure(i, j);
  }
  mean /= static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;

  PotentialField field;
  field.lambda = mean > 0.0 ? mean / s : 1.0;
  field.phi.assign(n, 0.0);
  for (index_t i = 0; i < n; ++i) {
    for (index_t j = i + 1; j < n; ++j) {
      const double contribution =
          -1.0 / std::max(measure(i, j), field.lambda);
      field.phi[i] += contribution;
      field.phi[j] += contribution;
    }
  }
  return field;
}

namespace detail {

/// Deepest potential in a cluster: smallest phi, ties to the lowest index.
struct PotentialPeak {
  double phi = std::numeric_limits<double>::infinity();
  index_t point = 0;
};

inline PotentialPeak deeper(const PotentialPeak& a, const PotentialPeak& b) {
  if (a.phi != b.phi) return a.phi < b.phi ? a : b;
  return a.point <= b.point ? a : b;
}

/// Representative-pair height between two clusters.  `first` must be the
/// cluster with the smaller node id; when both peaks are equally deep it
/// plays the s1 role.
template <typename Measure>
inline double pha_pair_height(const std::vector<index_t>& first,
                              const PotentialPeak& first_peak,
                              const std::vector<index_t>& second,
                              const PotentialPeak& second_peak,
                              const std::vector<double>& phi,
                              Measure&& measure) {
  const bool second_denser = second_peak.phi <= first_peak.phi;
  const PotentialPeak& weak = second_denser ? first_peak : second_peak;
  const std::vector<index_t>& strong = second_denser ? second : first;
  const index_t s1 = weak.point;
  double best = std::numeric_limits<double>::infinity();
  index_t best_point = 0;
  bool have = false;
  for (const index_t k : strong) {
    if (phi[k] > weak.phi) continue;  // not at least as deep as s1
    const double d = measure(k, s1);
    if (!have || d < best || (d == best && k < best_point)) {
      best = d;
      best_point = k;
      have = true;
    }
  }
  return best;
}

}  // namespace detail

/// Full agglomeration under the representative-pair linkage.  Heights are
/// pairwise measures, so the dendrogram kind is always dissimilarity.
inline Dendrogram pha_tree(const SimMatrix& m, double s) {
  const index_t n = m.n;
  if (n < 2) throw argument_error("pha_tree: need at least two points");
  detail::require_symmetric(m);
  const PotentialField field = compute_potential_field(m, s);
  const bool dis = m.kind == MatrixKind::dissimilarity;
  auto measure = [&](index_t i, index_t j) {
    return dis ? m.at(i, j) : 1.0 - m.at(i, j);
  };

  std::vector<std::vector<index_t>> members(n);
  std::vector<detail::PotentialPeak> peak(n);
  std::vector<index_t> node_of(n);
  std::vector<char> alive(n, 1);
  for (index_t i = 0; i < n; ++i) {
    members[i] = {i};
    peak[i] = {field.phi[i], i};
    node_of[i] = i + 1;
  }

  std::vector<double> h(n * n, 0.0);
  for (index_t i = 0; i < n; ++i) {
    for (index_t j = i + 1; j < n; ++j) {
      h[i * n + j] = measure(i, j);
    }
  }

  Dendrogram t{n, MatrixKind::dissimilarity, {}};
  t.merges.reserve(n - 1);
  for (index_t step = 1; step < n; ++step) {
    // argmin height; ties to the lexicographically smallest node-id pair
    index_t bi = 0, bj = 0, best_lo = 0, best_hi = 0;
    double best = std::numeric_limits<double>::infinity();
    bool have = false;
    for (index_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (index_t j = i + 1; j < n; ++j) {
        if (!alive[j]) continue;
        const double v = h[i * n + j];
        const auto [lo, hi] = std::minmax(node_of[i], node_of[j]);
        if (!have || v < best ||
            (v == best && (lo < best_lo || (lo == best_lo && hi < best_hi)))) {
          best = v;
          bi = i;
          bj = j;
          best_lo = lo;
          best_hi = hi;
          have = true;
        }
      }
    }

    const auto [lo, hi] = std::minmax(node_of[bi], node_of[bj]);
    t.merges.push_back({step, lo, hi, best});

    members[bi].insert(members[bi].end(), members[bj].begin(),
                       members[bj].end());
    peak[bi] = detail::deeper(peak[bi], peak[bj]);
    node_of[bi] = n + step;
    alive[bj] = 0;

    for (index_t x = 0; x < n; ++x) {
      if (!alive[x] || x == bi) continue;
      // the merged slot holds the newest (largest) node id, so every other
      // cluster plays the smaller-node-id role
      const double v =
          detail::pha_pair_height(members[x], peak[x], members[bi], peak[bi],
                                  field.phi, measure);
      h[std::min(x, bi) * n + std::max(x, bi)] = v;
    }
  }
  return t;
}

/// Hierarchy plus the flat clustering at kappa clusters.
struct PhaResult {
  Dendrogram dendrogram;
  FlatClustering clustering;
};

inline PhaResult pha_cluster(const SimMatrix& m, double s, index_t kappa) {
  PhaResult out;
  out.dendrogram = pha_tree(m, s);
  out.clustering = extract_k(out.dendrogram, kappa);
  return out;
}

}  // namespace kahc
