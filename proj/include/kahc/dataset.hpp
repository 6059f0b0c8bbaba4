// SPDX-License-Identifier: Apache-2.0
// Copyright (c) the kahc project authors.
//
// Dataset ingestion, min-max normalization, and synthetic generation of
// varied-density Gaussian blob benchmarks.

#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kahc/core.hpp"
#include "kahc/rng.hpp"

namespace kahc {

/// A point set with optional ground-truth cluster labels.
///
/// Points are stored row-major in a flat buffer; labels, when present, are
/// cluster ids in {1..k} with one entry per point (empty vector = unlabeled).
struct Dataset {
  std::vector<double> x;       // n*d feature values, row-major
  index_t n = 0;               // number of points
  index_t d = 0;               // feature dimension
  std::vector<int> labels;     // empty, or n ground-truth ids in {1..k}
  std::string name;

  std::span<const double> point(index_t i) const {
    return {x.data() + i * d, d};
  }
  bool has_labels() const { return !labels.empty(); }

  /// Number of distinct labels (0 when unlabeled).
  int num_classes() const {
    int k = 0;
    for (int c : labels) k = std::max(k, c);
    return k;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

inline double parse_double_field(std::string_view field, std::size_t line_no) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw parse_error("row " + std::to_string(line_no) +
                      ": cannot parse numeric field '" + std::string(field) +
                      "'");
  }
  return value;
}

}  // namespace detail

/// Reads a comma-separated numeric file into a Dataset.
///
/// The file is headerless unless has_header is set.  When label_column is
/// given, that column is removed from the features and its distinct values
/// are mapped, in order of first appearance, to cluster ids 1..k (so textual
/// labels are accepted).  Row order is preserved.
///
/// Throws parse_error naming the 1-based line number on a malformed numeric
/// field, and structural_error on empty input, inconsistent column counts,
/// or an out-of-range label column.
inline Dataset load_csv(const std::string& path,
                        std::optional<index_t> label_column = std::nullopt,
                        bool has_header = false) {
  std::ifstream in(path);
  if (!in) throw structural_error("cannot open file: " + path);

  Dataset ds;
  ds.name = path;
  std::unordered_map<std::string, int> label_ids;
  std::string line;
  std::size_t line_no = 0;
  std::size_t arity = 0;
  bool saw_data = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (has_header && line_no == 1) continue;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (!saw_data) {
      arity = fields.size();
      if (label_column && *label_column >= arity) {
        throw structural_error("label column " +
                               std::to_string(*label_column) +
                               " out of range for " + std::to_string(arity) +
                               " columns");
      }
      ds.d = label_column ? arity - 1 : arity;
      if (ds.d == 0) {
        throw structural_error("no feature columns after removing the label");
      }
      saw_data = true;
    } else if (fields.size() != arity) {
      throw structural_error(
          "row " + std::to_string(line_no) + ": expected " +
          std::to_string(arity) + " columns, found " +
          std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (label_column && c == *label_column) {
        const auto [it, inserted] = label_ids.try_emplace(
            std::string(fields[c]), static_cast<int>(label_ids.size()) + 1);
        ds.labels.push_back(it->second);
        (void)inserted;
      } else {
        ds.x.push_back(detail::parse_double_field(fields[c], line_no));
      }
    }
    ++ds.n;
  }
  if (!saw_data) throw structural_error("empty input: " + path);
  return ds;
}

/// Writes a Dataset as comma-separated text (features, then the label column
/// when present and include_labels is true).  Values are printed with %.17g
/// so a round trip is bit-exact.
inline void save_csv(const Dataset& ds, const std::string& path,
                     bool include_labels = true) {
  std::ofstream out(path);
  if (!out) throw structural_error("cannot open file for writing: " + path);
  char buf[64];
  for (index_t i = 0; i < ds.n; ++i) {
    for (index_t j = 0; j < ds.d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.x[i * ds.d + j]);
      if (j) out << ',';
      out << buf;
    }
    if (include_labels && ds.has_labels()) out << ',' << ds.labels[i];
    out << '\n';
  }
}

/// Rescales every feature column to [0,1] by (v - min) / (max - min);
/// constant columns map to 0.  Idempotent and rank-preserving per column.
inline Dataset minmax_normalize(Dataset ds) {
  for (index_t j = 0; j < ds.d; ++j) {
    double lo = ds.x[j];
    double hi = ds.x[j];
    for (index_t i = 1; i < ds.n; ++i) {
      const double v = ds.x[i * ds.d + j];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double range = hi - lo;
    for (index_t i = 0; i < ds.n; ++i) {
      double& v = ds.x[i * ds.d + j];
      v = (range > 0.0) ? (v - lo) / range : 0.0;
    }
  }
  return ds;
}

/// One Gaussian blob: a center, a per-axis standard deviation (a single
/// entry broadcasts across all axes), and a point count.
struct BlobSpec {
  std::vector<double> center;
  std::vector<double> spread;
  index_t count = 0;
};

/// Samples axis-aligned Gaussian blobs, one label per blob (ids 1..k in spec
/// order).  Deterministic for a fixed (spec, seed) pair.
inline Dataset gen_varied_density_blobs(const std::vector<BlobSpec>& spec,
                                        std::uint64_t seed) {
  if (spec.size() < 2) {
    throw argument_error("gen_varied_density_blobs: need at least two blobs");
  }
  const index_t d = spec.front().center.size();
  for (const auto& b : spec) {
    if (b.count < 1) {
      throw argument_error("gen_varied_density_blobs: blob count must be >=1");
    }
    if (b.center.size() != d) {
      throw argument_error(
          "gen_varied_density_blobs: blob centers differ in dimension");
    }
    if (b.spread.size() != 1 && b.spread.size() != d) {
      throw argument_error(
          "gen_varied_density_blobs: spread must have 1 or d entries");
    }
  }

  Dataset ds;
  ds.d = d;
  ds.name = "varied_density_blobs";
  Rng rng(seed);
  int label = 0;
  for (const auto& b : spec) {
    ++label;
    for (index_t p = 0; p < b.count; ++p) {
      for (index_t a = 0; a < d; ++a) {
        const double s = b.spread.size() == 1 ? b.spread[0] : b.spread[a];
        ds.x.push_back(b.center[a] + s * rng.normal());
      }
      ds.labels.push_back(label);
      ++ds.n;
    }
  }
  return ds;
}

}  // namespace kahc
