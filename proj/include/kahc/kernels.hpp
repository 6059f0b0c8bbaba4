// SPDX-License-Identifier: Apache-2.0
// Copyright (c) the kahc project authors.
//
// Pairwise measures: the Euclidean distance baseline, the Gaussian kernel,
// the data-dependent adaptive Gaussian kernel, and the isolation kernel
// (similarity = probability that two points fall into the same cell of a
// random Voronoi partitioning built from small subsamples of the data).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kahc/core.hpp"
#include "kahc/dataset.hpp"
#include "kahc/matrix.hpp"
#include "kahc/rng.hpp"

namespace kahc {

inline double squared_distance(std::span<const double> x,
                               std::span<const double> y) {
  double s = 0.0;
  for (std::size_t a = 0; a < x.size(); ++a) {
    const double diff = x[a] - y[a];
    s += diff * diff;
  }
  return s;
}

inline double euclidean_distance(std::span<const double> x,
                                 std::span<const double> y) {
  return std::sqrt(squared_distance(x, y));
}

/// Full pairwise Euclidean distance matrix (dissimilarity kind).
inline SimMatrix euclidean_matrix(const Dataset& ds) {
  SimMatrix m(ds.n, MatrixKind::dissimilarity, "euclidean");
  for (index_t i = 0; i < ds.n; ++i) {
    for (index_t j = i + 1; j < ds.n; ++j) {
      m.set(i, j, euclidean_distance(ds.point(i), ds.point(j)));
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Gaussian kernel
// ---------------------------------------------------------------------------

/// exp(-||x-y||^2 / (2 sigma^2)).  Equals 1 iff x = y; sigma must be > 0.
inline double gaussian_similarity(std::span<const double> x,
                                  std::span<const double> y, double sigma) {
  if (!(sigma > 0.0)) {
    throw argument_error("gaussian_similarity: sigma must be positive");
  }
  return std::exp(-squared_distance(x, y) / (2.0 * sigma * sigma));
}

inline SimMatrix gaussian_matrix(const Dataset& ds, double sigma) {
  if (!(sigma > 0.0)) {
    throw argument_error("gaussian_matrix: sigma must be positive");
  }
  SimMatrix m(ds.n, MatrixKind::similarity,
              "gaussian(sigma=" + std::to_string(sigma) + ")");
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (index_t i = 0; i < ds.n; ++i) {
    for (index_t j = i + 1; j < ds.n; ++j) {
      m.set(i, j, std::exp(-squared_distance(ds.point(i), ds.point(j)) * inv));
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Adaptive Gaussian kernel
// ---------------------------------------------------------------------------

/// Distance from each point to its k-th nearest neighbor, self excluded
/// (k = 1 is the nearest neighbor).  Requires 1 <= k <= n-1.
inline std::vector<double> kth_nn_distances(const SimMatrix& dist, index_t k) {
  if (dist.kind != MatrixKind::dissimilarity) {
    throw argument_error("kth_nn_distances: needs a dissimilarity matrix");
  }
  const index_t n = dist.n;
  if (k < 1 || k > n - 1) {
    throw argument_error("kth_nn_distances: k must be in [1, n-1]");
  }
  std::vector<double> out(n);
  std::vector<double> scratch;
  scratch.reserve(n - 1);
  for (index_t i = 0; i < n; ++i) {
    scratch.clear();
    for (index_t j = 0; j < n; ++j) {
      if (j != i) scratch.push_back(dist.at(i, j));
    }
    std::nth_element(scratch.begin(), scratch.begin() + (k - 1),
                     scratch.end());
    out[i] = scratch[k - 1];
  }
  return out;
}

/// Smallest strictly positive pairwise distance, or 0 if every pair
/// coincides.  Used as the bandwidth substitute for duplicated points.
inline double smallest_positive_distance(const SimMatrix& dist) {
  double best = std::numeric_limits<double>::infinity();
  for (index_t i = 0; i < dist.n; ++i) {
    for (index_t j = i + 1; j < dist.n; ++j) {
      const double v = dist.at(i, j);
      if (v > 0.0) best = std::min(best, v);
    }
  }
  return std::isinf(best) ? 0.0 : best;
}

/// Similarity matrix exp(-||x_i - x_j||^2 / (sigma_i sigma_j)) with
/// per-point bandwidth sigma_i = distance to the k-th nearest neighbor of
/// point i (self excluded).
///
/// Duplicate handling: a zero bandwidth is replaced by the smallest positive
/// pairwise distance in the dataset; if all points coincide the kernel is
/// identically 1.
inline SimMatrix adaptive_gaussian_matrix(const Dataset& ds, index_t k) {
  const SimMatrix dist = euclidean_matrix(ds);
  std::vector<double> sigma = kth_nn_distances(dist, k);
  const double fallback = smallest_positive_distance(dist);
  for (double& s : sigma) {
    if (s == 0.0) s = fallback;
  }
  SimMatrix m(ds.n, MatrixKind::similarity,
              "adaptive_gaussian(k=" + std::to_string(k) + ")");
  for (index_t i = 0; i < ds.n; ++i) {
    for (index_t j = i + 1; j < ds.n; ++j) {
      const double denom = sigma[i] * sigma[j];
      const double d2 = dist.at(i, j) * dist.at(i, j);
      // denom == 0 only when every point coincides; then d2 == 0 too.
      m.set(i, j, denom > 0.0 ? std::exp(-d2 / denom) : 1.0);
    }
  }
  return m;
}

/// Single-pair form of the adaptive Gaussian kernel (1-based semantics match
/// adaptive_gaussian_matrix; this recomputes the bandwidths on demand).
inline double adaptive_gaussian_similarity(index_t i, index_t j, index_t k,
                                           const Dataset& ds) {
  if (i >= ds.n || j >= ds.n) {
    throw argument_error("adaptive_gaussian_similarity: index out of range");
  }
  const SimMatrix dist = euclidean_matrix(ds);
  std::vector<double> sigma = kth_nn_distances(dist, k);
  const double fallback = smallest_positive_distance(dist);
  double si = sigma[i] == 0.0 ? fallback : sigma[i];
  double sj = sigma[j] == 0.0 ? fallback : sigma[j];
  const double d2 = dist.at(i, j) * dist.at(i, j);
  return (si * sj) > 0.0 ? std::exp(-d2 / (si * sj)) : 1.0;
}

// ---------------------------------------------------------------------------
// Isolation kernel
// ---------------------------------------------------------------------------

/// An ensemble of t random Voronoi partitionings, each induced by psi
/// center points subsampled (without replacement) from a dataset.
///
/// Center coordinates are copied into the model so similarities can be
/// evaluated for arbitrary query points later.  Partition r's centers are
/// derived from an independent child seed, so models are reproducible and
/// partitions could be built concurrently.
struct IsolationKernelModel {
  index_t psi = 0;
  index_t t = 0;
  index_t d = 0;
  std::uint64_t seed = 0;
  std::vector<index_t> center_index;  // t*psi indices into the source dataset
  std::vector<double> center_coord;   // t*psi*d coordinates, partition-major

  std::span<const double> center(index_t partition, index_t c) const {
    return {center_coord.data() + (partition * psi + c) * d, d};
  }
};

/// Cell ids are stored as 16-bit integers; psi is capped accordingly.
inline constexpr index_t kMaxIsolationPsi = 65535;

inline IsolationKernelModel build_ik_model(const Dataset& ds, index_t psi,
                                           index_t t, std::uint64_t seed) {
  if (psi < 2) throw argument_error("build_ik_model: psi must be >= 2");
  if (psi > ds.n) throw argument_error("build_ik_model: psi exceeds n");
  if (psi > kMaxIsolationPsi) {
    throw argument_error("build_ik_model: psi exceeds the 65535 cell-id cap");
  }
  if (t < 1) throw argument_error("build_ik_model: t must be >= 1");

  IsolationKernelModel model;
  model.psi = psi;
  model.t = t;
  model.d = ds.d;
  model.seed = seed;
  model.center_index.reserve(t * psi);
  model.center_coord.reserve(t * psi * ds.d);

  std::uint64_t walk = seed;
  for (index_t r = 0; r < t; ++r) {
    walk = splitmix64(walk);
    Rng rng(walk);
    const auto sample = rng.sample_without_replacement(ds.n, psi);
    for (index_t c : sample) {
      model.center_index.push_back(c);
      const auto p = ds.point(c);
      model.center_coord.insert(model.center_coord.end(), p.begin(), p.end());
    }
  }
  return model;
}

/// Position (0..psi-1) of the nearest center to `point` within partition r.
/// Distance ties break toward the center with the lowest dataset index.
inline std::uint16_t nearest_center_cell(const IsolationKernelModel& model,
                                         index_t r,
                                         std::span<const double> point) {
  index_t best_cell = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  index_t best_src = std::numeric_limits<index_t>::max();
  for (index_t c = 0; c < model.psi; ++c) {
    const double d2 = squared_distance(point, model.center(r, c));
    const index_t src = model.center_index[r * model.psi + c];
    if (d2 < best_d2 || (d2 == best_d2 && src < best_src)) {
      best_d2 = d2;
      best_cell = c;
      best_src = src;
    }
  }
  return static_cast<std::uint16_t>(best_cell);
}

/// Per-point, per-partition Voronoi cell ids: an n x t row-major table.
/// Two points share partition r's cell iff row entries r are equal, so the
/// kernel value is the fraction of equal entries between two rows.
inline std::vector<std::uint16_t> ik_feature_map(
    const IsolationKernelModel& model, const Dataset& ds) {
  if (ds.d != model.d) {
    throw argument_error("ik_feature_map: dimension mismatch");
  }
  std::vector<std::uint16_t> cells(ds.n * model.t);
  for (index_t r = 0; r < model.t; ++r) {
    for (index_t i = 0; i < ds.n; ++i) {
      cells[i * model.t + r] = nearest_center_cell(model, r, ds.point(i));
    }
  }
  return cells;
}

/// Fraction of partitions in which x and y fall into the same Voronoi cell.
inline double ik_similarity(const IsolationKernelModel& model,
                            std::span<const double> x,
                            std::span<const double> y) {
  if (x.size() != model.d || y.size() != model.d) {
    throw argument_error("ik_similarity: dimension mismatch");
  }
  index_t same = 0;
  for (index_t r = 0; r < model.t; ++r) {
    if (nearest_center_cell(model, r, x) == nearest_center_cell(model, r, y)) {
      ++same;
    }
  }
  return static_cast<double>(same) / static_cast<double>(model.t);
}

/// Full isolation-kernel similarity matrix over the dataset the model was
/// built for, via the cell-id table (every value is a multiple of 1/t).
inline SimMatrix isolation_matrix(const IsolationKernelModel& model,
                                  const Dataset& ds) {
  const std::vector<std::uint16_t> cells = ik_feature_map(model, ds);
  SimMatrix m(ds.n, MatrixKind::similarity,
              "isolation(psi=" + std::to_string(model.psi) +
                  ",t=" + std::to_string(model.t) +
                  ",seed=" + std::to_string(model.seed) + ")");
  const double inv_t = 1.0 / static_cast<double>(model.t);
  const index_t t = model.t;
  for (index_t i = 0; i < ds.n; ++i) {
    const std::uint16_t* row_i = cells.data() + i * t;
    for (index_t j = i + 1; j < ds.n; ++j) {
      const std::uint16_t* row_j = cells.data() + j * t;
      unsigned same = 0;
      for (index_t r = 0; r < t; ++r) same += (row_i[r] == row_j[r]);
      m.set(i, j, same * inv_t);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Measure descriptor dispatch
// ---------------------------------------------------------------------------

enum class MeasureKind { euclidean, gaussian, adaptive_gaussian, isolation };

/// Everything needed to build one pairwise-measure matrix.
struct MeasureSpec {
  MeasureKind kind = MeasureKind::euclidean;
  double sigma = 1.0;      // gaussian bandwidth
  index_t k = 10;          // adaptive gaussian neighbor count
  index_t psi = 16;        // isolation subsample size
  index_t t = 200;         // isolation ensemble size
  std::uint64_t seed = 1;  // isolation sampling seed
};

inline std::string measure_tag(const MeasureSpec& spec) {
  switch (spec.kind) {
    case MeasureKind::euclidean:
      return "euclidean";
    case MeasureKind::gaussian:
      return "gaussian(sigma=" + std::to_string(spec.sigma) + ")";
    case MeasureKind::adaptive_gaussian:
      return "adaptive_gaussian(k=" + std::to_string(spec.k) + ")";
    case MeasureKind::isolation:
      return "isolation(psi=" + std::to_string(spec.psi) +
             ",t=" + std::to_string(spec.t) +
             ",seed=" + std::to_string(spec.seed) + ")";
  }
  throw argument_error("measure_tag: unknown measure kind");
}

/// Builds the pairwise matrix for any measure descriptor.  The Euclidean
/// baseline yields a dissimilarity matrix; the kernels yield similarities.
inline SimMatrix similarity_matrix(const MeasureSpec& spec,
                                   const Dataset& ds) {
  switch (spec.kind) {
    case MeasureKind::euclidean:
      return euclidean_matrix(ds);
    case MeasureKind::gaussian:
      return gaussian_matrix(ds, spec.sigma);
    case MeasureKind::adaptive_gaussian:
      return adaptive_gaussian_matrix(ds, spec.k);
    case MeasureKind::isolation: {
      const auto model = build_ik_model(ds, spec.psi, spec.t, spec.seed);
      return isolation_matrix(model, ds);
    }
  }
  throw argument_error("similarity_matrix: unknown measure kind");
}

}  // namespace kahc
