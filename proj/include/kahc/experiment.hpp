#pragma once

// Batch grid-search driver.  One experiment = one labelled dataset, one
// pairwise measure, one clustering algorithm, and a parameter grid.  Every
// grid cell is evaluated into one report row; the driver tracks the best
// cell by dendrogram purity and the best by flat F1 (they may differ), and
// can write the whole run to disk: grid.csv, summary.json, and the best
// cells' dendrograms with their step/height profiles.
//
// Determinism contract: a rerun with the same spec produces byte-identical
// grid.csv and summary.json.  Each cell derives its own seed from the master
// seed and its position in the grid, so no cell's randomness depends on what
// ran before it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include <kahc/core.hpp>
#include <kahc/dataset.hpp>
#include <kahc/dendrogram.hpp>
#include <kahc/eval.hpp>
#include <kahc/gdl.hpp>
#include <kahc/hdbscan.hpp>
#include <kahc/kernels.hpp>
#include <kahc/linkage.hpp>
#include <kahc/matrix.hpp>
#include <kahc/pha.hpp>
#include <kahc/rng.hpp>

namespace kahc {

/// One grid dimension: a parameter name and the values it sweeps, in order.
struct GridAxis {
  std::string key;
  std::vector<double> values;
};

/// Everything needed to run one batch experiment.
struct ExperimentSpec {
  std::string dataset_path;
  int label_column = -1;  ///< CSV column holding ground truth; -1 = last
  std::string measure = "dist";          ///< dist | gk | agk | ik
  std::string algorithm = "ahc-single";  ///< ahc-single | ahc-complete |
                                         ///< ahc-average | ahc-weighted |
                                         ///< hdbscan | pha | gdl
  /// Per-key replacements for the default axes (see default_measure_axes and
  /// default_algorithm_axes for the keys each measure/algorithm accepts).
  std::map<std::string, std::vector<double>> grid;
  std::uint64_t seed = 1;  ///< master seed; every cell derives its own
  std::string out_dir;     ///< when non-empty, run artifacts are written here
  bool exhaustive_grid = false;  ///< sweep every integer neighbor count /
                                 ///< subsample size instead of the geometric
                                 ///< subsample
  index_t exact_purity_limit = 5000;  ///< above this n, purity is Monte-Carlo
  index_t mc_samples = 1'000'000;     ///< pair samples for the Monte-Carlo path
};

/// Outcome of one grid cell.  When `error` is non-empty the metrics are
/// absent; `warning` records non-fatal diagnostics (e.g. a merge stall).
struct CellResult {
  EvaluationReport report;
  std::string error;
  std::string warning;
  bool has_tree_metrics = false;  ///< purity + entanglement fields are valid
  bool has_flat_metrics = false;  ///< f1 + precision/recall fields are valid
};

struct ExperimentResult {
  std::vector<CellResult> cells;       ///< one per grid cell, in grid order
  std::ptrdiff_t best_by_purity = -1;  ///< cell index, or -1 if none qualifies
  std::ptrdiff_t best_by_f1 = -1;      ///< cell index, or -1 if none qualifies
  index_t error_count = 0;
  std::string grid_csv;      ///< full per-cell table, header included
  std::string summary_json;  ///< run metadata + both best cells
  /// Rebuilt dendrograms of the best cells (empty for flat-only algorithms).
  Dendrogram best_purity_tree;
  Dendrogram best_f1_tree;
  index_t n = 0;
};

namespace detail {

/// Stateless per-cell seed derivation: mixes the master seed with the cell's
/// grid position.  `salt` separates independent consumers within one cell
/// (0 = measure matrix, 1 = Monte-Carlo purity sampling).
inline std::uint64_t derived_seed(std::uint64_t master, std::uint64_t cell,
                                  std::uint64_t salt) {
  return splitmix64(splitmix64(master + 0x9E3779B97F4A7C15ULL * (cell + 1)) +
                    salt);
}

/// All integers in [lo, hi], as doubles.  Empty when hi < lo.
inline std::vector<double> integer_range(double lo, double hi) {
  std::vector<double> out;
  for (double v = lo; v <= hi; v += 1.0) out.push_back(v);
  return out;
}

/// Endpoints of [lo, hi] plus every power of two strictly between them;
/// a geometric subsample that covers the scale of the full integer range.
inline std::vector<double> powers_of_two_range(index_t lo, index_t hi) {
  std::vector<double> out;
  if (hi < lo) return out;
  out.push_back(static_cast<double>(lo));
  for (index_t p = 1; p < hi && p < (index_t{1} << 62); p <<= 1) {
    if (p > lo && p < hi) out.push_back(static_cast<double>(p));
  }
  if (hi > lo) out.push_back(static_cast<double>(hi));
  return out;
}

inline bool integer_grid_key(const std::string& key) {
  return key == "kappa" || key == "l" || key == "c" || key == "knn" ||
         key == "k" || key == "psi" || key == "t";
}

/// Integers render without a decimal point; everything else as %g.
inline std::string format_grid_value(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace detail

/// Default measure axes for a dataset of n points.
///   dist: none; gk: sigma = 2^m for m in [-5, 5];
///   agk: k over [2, ceil(n/2)]; ik: psi over [2, ceil(n/2)] and t = 200.
/// The neighbor-count/subsample axes use the geometric subsample unless
/// `exhaustive` asks for every integer.
inline std::vector<GridAxis> default_measure_axes(const std::string& measure,
                                                  index_t n, bool exhaustive) {
  const index_t half = (n + 1) / 2;
  if (measure == "dist") return {};
  if (measure == "gk") {
    std::vector<double> sigmas;
    for (int m = -5; m <= 5; ++m) sigmas.push_back(std::ldexp(1.0, m));
    return {{"sigma", sigmas}};
  }
  if (measure == "agk") {
    const index_t hi = std::min(half, n > 1 ? n - 1 : index_t{1});
    std::vector<double> ks = exhaustive
                                 ? detail::integer_range(2.0, double(hi))
                                 : detail::powers_of_two_range(2, hi);
    if (ks.empty()) ks.push_back(n > 1 ? double(n - 1) : 1.0);
    return {{"k", ks}};
  }
  if (measure == "ik") {
    const index_t hi = std::min(std::max<index_t>(half, 2), n);
    std::vector<double> psis = exhaustive
                                   ? detail::integer_range(2.0, double(hi))
                                   : detail::powers_of_two_range(2, hi);
    if (psis.empty()) psis.push_back(2.0);
    return {{"psi", psis}, {"t", {200.0}}};
  }
  throw argument_error("unknown measure: " + measure +
                       " (expected dist, gk, agk, or ik)");
}

/// Default algorithm axes for a dataset of n points, clamped to values the
/// dataset can satisfy.
///   ahc-*: kappa in {2..30}; hdbscan: c in [2,100] then l in [2,100];
///   pha: s in {5,10,15,20,25,30} then kappa; gdl: knn in
///   {5,10,15,20,25,30,70,100} then the weight scale a (fixed 1) then kappa.
/// Axis order is the sweep order: the first axis is the expensive one whose
/// intermediate products (reachability matrix, dendrogram) are reused across
/// the axes after it.
inline std::vector<GridAxis> default_algorithm_axes(const std::string& algo,
                                                    index_t n) {
  const std::vector<double> kappas =
      detail::integer_range(2.0, double(std::min<index_t>(30, n)));
  if (algo == "ahc-single" || algo == "ahc-complete" || algo == "ahc-average" ||
      algo == "ahc-weighted") {
    return {{"kappa", kappas}};
  }
  if (algo == "hdbscan") {
    const index_t c_hi = n > 1 ? std::min<index_t>(100, n - 1) : index_t{0};
    return {{"c", detail::integer_range(2.0, double(c_hi))},
            {"l", detail::integer_range(2.0, double(std::min<index_t>(100, n)))}};
  }
  if (algo == "pha") {
    return {{"s", {5.0, 10.0, 15.0, 20.0, 25.0, 30.0}}, {"kappa", kappas}};
  }
  if (algo == "gdl") {
    std::vector<double> knn;
    for (double v : {5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 70.0, 100.0}) {
      if (v < double(n)) knn.push_back(v);
    }
    if (knn.empty() && n > 1) knn.push_back(double(n - 1));
    return {{"knn", knn}, {"a", {1.0}}, {"kappa", kappas}};
  }
  throw argument_error(
      "unknown algorithm: " + algo +
      " (expected ahc-single, ahc-complete, ahc-average, ahc-weighted, "
      "hdbscan, pha, or gdl)");
}

struct ExperimentGrid {
  std::vector<GridAxis> measure_axes;
  std::vector<GridAxis> algorithm_axes;
};

/// Builds the default axes for the spec's measure/algorithm pair, then
/// applies the spec's per-key overrides.  Override values keep their given
/// order (it defines tie-breaking) with duplicates dropped; keys that do not
/// belong to the chosen measure/algorithm are rejected, as are non-integer
/// values for count-valued keys.  Overrides are taken as-is: out-of-range
/// values surface later as per-cell errors, not here.
inline ExperimentGrid build_grid(const ExperimentSpec& spec, index_t n) {
  ExperimentGrid grid{
      default_measure_axes(spec.measure, n, spec.exhaustive_grid),
      default_algorithm_axes(spec.algorithm, n)};
  std::map<std::string, GridAxis*> by_key;
  for (auto& axis : grid.measure_axes) by_key[axis.key] = &axis;
  for (auto& axis : grid.algorithm_axes) by_key[axis.key] = &axis;

  for (const auto& [key, values] : spec.grid) {
    const auto it = by_key.find(key);
    if (it == by_key.end()) {
      std::string allowed;
      for (const auto& [k, axis] : by_key) {
        if (!allowed.empty()) allowed += ", ";
        allowed += k;
      }
      throw argument_error("grid key '" + key + "' does not apply to measure '" +
                           spec.measure + "' with algorithm '" +
                           spec.algorithm + "' (allowed: " +
                           (allowed.empty() ? "none" : allowed) + ")");
    }
    if (values.empty()) {
      throw argument_error("grid key '" + key + "' has no values");
    }
    std::vector<double> cleaned;
    for (double v : values) {
      if (!std::isfinite(v)) {
        throw argument_error("grid key '" + key + "' has a non-finite value");
      }
      if (detail::integer_grid_key(key) && (v < 1.0 || std::floor(v) != v)) {
        throw argument_error("grid key '" + key +
                             "' requires positive integer values");
      }
      if (std::find(cleaned.begin(), cleaned.end(), v) == cleaned.end()) {
        cleaned.push_back(v);
      }
    }
    it->second->values = std::move(cleaned);
  }

  for (const auto& [k, axis] : by_key) {
    if (axis->values.empty()) {
      throw argument_error("grid axis '" + k +
                           "' is empty for this dataset; pass an explicit "
                           "grid for it");
    }
  }
  return grid;
}

/// Parses a command-line grid override string into per-key value lists.
/// Format: comma-separated `key=values` entries where `values` is a single
/// number, a `lo:hi` or `lo:hi:step` range (inclusive), or a `v;v;v` list.
/// Example: "kappa=2:10,s=5;15;25,sigma=0.25".
inline std::map<std::string, std::vector<double>> parse_grid_overrides(
    const std::string& text) {
  const auto parse_number = [](const std::string& field) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &pos);
    } catch (const std::exception&) {
      throw argument_error("bad number in grid spec: '" + field + "'");
    }
    if (pos != field.size()) {
      throw argument_error("bad number in grid spec: '" + field + "'");
    }
    return v;
  };
  const auto split = [](const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
      const std::size_t at = s.find(sep, start);
      parts.push_back(s.substr(start, at - start));
      if (at == std::string::npos) break;
      start = at + 1;
    }
    return parts;
  };

  std::map<std::string, std::vector<double>> out;
  if (std::string(detail::trim(text)).empty()) return out;
  for (const std::string& entry : split(text, ',')) {
    const std::size_t eq = entry.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw argument_error("grid entry '" + entry +
                           "' is not of the form key=values");
    }
    const std::string key{detail::trim(entry.substr(0, eq))};
    const std::string value_spec = entry.substr(eq + 1);
    if (out.count(key)) {
      throw argument_error("grid key '" + key + "' given twice");
    }
    std::vector<double> values;
    if (value_spec.find(':') != std::string::npos) {
      const auto parts = split(value_spec, ':');
      if (parts.size() != 2 && parts.size() != 3) {
        throw argument_error("grid range '" + value_spec +
                             "' is not lo:hi or lo:hi:step");
      }
      const double lo = parse_number(parts[0]);
      const double hi = parse_number(parts[1]);
      const double step = parts.size() == 3 ? parse_number(parts[2]) : 1.0;
      if (step <= 0.0) {
        throw argument_error("grid range step must be positive");
      }
      for (double v = lo; v <= hi + 1e-9; v += step) values.push_back(v);
      if (values.empty()) {
        throw argument_error("grid range '" + value_spec + "' is empty");
      }
    } else if (value_spec.find(';') != std::string::npos) {
      for (const std::string& field : split(value_spec, ';')) {
        if (std::string(detail::trim(field)).empty()) continue;
        values.push_back(parse_number(field));
      }
      if (values.empty()) {
        throw argument_error("grid list '" + value_spec + "' is empty");
      }
    } else {
      values.push_back(parse_number(value_spec));
    }
    out[key] = std::move(values);
  }
  return out;
}

namespace detail {

/// Row-major cartesian product: the first axis varies slowest.  No axes
/// yields one empty combination.
inline std::vector<std::vector<double>> cartesian(
    const std::vector<GridAxis>& axes) {
  std::vector<std::vector<double>> out{{}};
  for (const GridAxis& axis : axes) {
    std::vector<std::vector<double>> next;
    next.reserve(out.size() * axis.values.size());
    for (const auto& base : out) {
      for (double v : axis.values) {
        auto row = base;
        row.push_back(v);
        next.push_back(std::move(row));
      }
    }
    out = std::move(next);
  }
  return out;
}

inline double axis_value(const std::vector<GridAxis>& axes,
                         const std::vector<double>& combo,
                         const std::string& key) {
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i].key == key) return combo[i];
  }
  throw argument_error("internal: grid key '" + key + "' missing");
}

inline std::string cell_parameters(const std::vector<GridAxis>& axes,
                                   const std::vector<double>& combo) {
  std::string out;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (i) out += ',';
    out += axes[i].key;
    out += '=';
    out += format_grid_value(combo[i]);
  }
  return out;
}

inline LinkageKind linkage_kind_for(const std::string& algo) {
  if (algo == "ahc-single") return LinkageKind::single;
  if (algo == "ahc-complete") return LinkageKind::complete;
  if (algo == "ahc-average") return LinkageKind::average;
  if (algo == "ahc-weighted") return LinkageKind::weighted;
  throw argument_error("not a linkage algorithm: " + algo);
}

inline MeasureSpec measure_spec_for(const std::string& measure,
                                    const std::vector<GridAxis>& axes,
                                    const std::vector<double>& combo,
                                    std::uint64_t seed) {
  MeasureSpec ms;
  ms.seed = seed;
  if (measure == "dist") {
    ms.kind = MeasureKind::euclidean;
  } else if (measure == "gk") {
    ms.kind = MeasureKind::gaussian;
    ms.sigma = axis_value(axes, combo, "sigma");
  } else if (measure == "agk") {
    ms.kind = MeasureKind::adaptive_gaussian;
    ms.k = static_cast<index_t>(axis_value(axes, combo, "k"));
  } else if (measure == "ik") {
    ms.kind = MeasureKind::isolation;
    ms.psi = static_cast<index_t>(axis_value(axes, combo, "psi"));
    ms.t = static_cast<index_t>(axis_value(axes, combo, "t"));
  } else {
    throw argument_error("unknown measure: " + measure);
  }
  return ms;
}

struct TreeMetrics {
  double purity = 0.0;
  EntanglementReport ent;
};

inline TreeMetrics tree_metrics(const Dendrogram& t,
                                const std::vector<int>& truth,
                                const ExperimentSpec& spec,
                                std::uint64_t mc_seed) {
  TreeMetrics tm;
  tm.purity = dendrogram_purity(t, truth, spec.exact_purity_limit,
                                spec.mc_samples, mc_seed);
  tm.ent = entanglements(t, truth);
  return tm;
}

inline void fill_tree_metrics(CellResult& cell, const TreeMetrics& tm) {
  cell.report.dendrogram_purity = tm.purity;
  cell.report.entanglement = tm.ent;
  cell.has_tree_metrics = true;
}

inline void fill_flat_metrics(CellResult& cell, const FlatClustering& flat,
                              const std::vector<int>& truth) {
  const F1Result f1 = f1_flat(flat, truth);
  cell.report.f1 = f1.f1;
  cell.report.precision = f1.precision;
  cell.report.recall = f1.recall;
  cell.has_flat_metrics = true;
}

/// One CSV row: blank metric fields when the cell failed or the metric does
/// not apply; the final column carries the error (or a "warning:" note).
inline std::string grid_csv_row(const CellResult& cell) {
  char buf[64];
  const auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::string out = csv_quote(cell.report.measure_tag) + ',' +
                    csv_quote(cell.report.parameters) + ',';
  if (cell.has_tree_metrics) {
    out += num(cell.report.dendrogram_purity) + ',' +
           std::to_string(cell.report.entanglement.count) + ',' +
           num(cell.report.entanglement.avg_level);
  } else {
    out += ",,";
  }
  out += ',';
  if (cell.has_flat_metrics) out += num(cell.report.f1);
  out += ',';
  if (!cell.error.empty()) {
    out += csv_quote(cell.error);
  } else if (!cell.warning.empty()) {
    out += csv_quote("warning: " + cell.warning);
  }
  return out;
}

inline nlohmann::ordered_json summary_cell_json(const CellResult& cell,
                                                std::ptrdiff_t index) {
  nlohmann::ordered_json j;
  j["cell_index"] = index;
  j["measure_tag"] = cell.report.measure_tag;
  j["parameters"] = cell.report.parameters;
  if (cell.has_tree_metrics) {
    j["dendrogram_purity"] = cell.report.dendrogram_purity;
    j["entanglement_count"] = cell.report.entanglement.count;
    j["entanglement_avg_level"] = cell.report.entanglement.avg_level;
  } else {
    j["dendrogram_purity"] = nullptr;
    j["entanglement_count"] = nullptr;
    j["entanglement_avg_level"] = nullptr;
  }
  if (cell.has_flat_metrics) {
    j["f1"] = cell.report.f1;
    j["precision"] = cell.report.precision;
    j["recall"] = cell.report.recall;
  } else {
    j["f1"] = nullptr;
    j["precision"] = nullptr;
    j["recall"] = nullptr;
  }
  if (!cell.warning.empty()) j["warning"] = cell.warning;
  return j;
}

/// Index of the label column, resolving -1 to the file's last column.
inline index_t resolve_label_column(const std::string& path, int label_column) {
  if (label_column >= 0) return static_cast<index_t>(label_column);
  std::ifstream in(path);
  if (!in) throw structural_error("cannot open file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    return split_csv_line(line).size() - 1;
  }
  throw structural_error("empty dataset file: " + path);
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw structural_error("cannot write file: " + path);
  out << body;
  if (!out) throw structural_error("failed writing file: " + path);
}

}  // namespace detail

/// Throws unless the algorithm builds a dendrogram that can be exported.
inline void require_dendrogram_support(const std::string& algorithm) {
  if (algorithm == "gdl") {
    throw unsupported_operation(
        "gdl produces a flat partition only; it has no dendrogram to emit");
  }
}

struct DendrogramFiles {
  std::string tree_path;
  std::string profile_path;
};

/// Writes `<base_path>.tree` (the parseable serialization) and
/// `<base_path>.heights` (a step,height CSV of the merge profile, ready for
/// external plotting).
inline DendrogramFiles emit_dendrogram(const Dendrogram& t,
                                       const std::string& base_path) {
  DendrogramFiles files{base_path + ".tree", base_path + ".heights"};
  detail::write_text_file(files.tree_path, serialize_dendrogram(t));
  std::string profile = "step,height\n";
  char buf[64];
  for (const Merge& m : t.merges) {
    std::snprintf(buf, sizeof buf, "%.17g", m.height);
    profile += std::to_string(m.step) + ',' + buf + '\n';
  }
  detail::write_text_file(files.profile_path, profile);
  return files;
}

/// Runs the full grid: loads and min-max-normalizes the dataset, builds one
/// measure matrix per measure cell, reuses expensive intermediates across the
/// cheap inner axes (one reachability matrix + dendrogram per hdbscan `c`,
/// one potential-field tree per pha `s`, one linkage tree per measure cell),
/// and evaluates every cell.  Per-cell failures become rows with an error
/// field; the run continues.  When `spec.out_dir` is set, writes grid.csv,
/// summary.json, and the best cells' dendrogram files.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  const index_t label_col =
      detail::resolve_label_column(spec.dataset_path, spec.label_column);
  const Dataset ds = minmax_normalize(load_csv(spec.dataset_path, label_col));
  if (ds.labels.empty()) {
    throw structural_error("dataset has no labels; evaluation needs truth");
  }

  const ExperimentGrid grid = build_grid(spec, ds.n);
  const auto mcombos = detail::cartesian(grid.measure_axes);
  const auto acombos = detail::cartesian(grid.algorithm_axes);
  const index_t n_algo = acombos.size();

  ExperimentResult result;
  result.n = ds.n;
  result.cells.resize(mcombos.size() * n_algo);

  const bool is_ahc = spec.algorithm.rfind("ahc-", 0) == 0;

  for (index_t mi = 0; mi < mcombos.size(); ++mi) {
    const index_t base = mi * n_algo;
    const std::uint64_t matrix_seed = detail::derived_seed(spec.seed, base, 0);
    const MeasureSpec ms = detail::measure_spec_for(
        spec.measure, grid.measure_axes, mcombos[mi], matrix_seed);

    std::optional<SimMatrix> matrix;
    std::string matrix_error;
    try {
      matrix.emplace(similarity_matrix(ms, ds));
    } catch (const std::exception& e) {
      matrix_error = e.what();
    }

    const std::string tag = matrix ? matrix->measure_tag : measure_tag(ms);
    const auto cell_at = [&](index_t ai) -> CellResult& {
      CellResult& cell = result.cells[base + ai];
      cell.report.measure_tag = tag;
      cell.report.parameters =
          detail::cell_parameters(grid.algorithm_axes, acombos[ai]);
      return cell;
    };

    if (!matrix) {
      for (index_t ai = 0; ai < n_algo; ++ai) cell_at(ai).error = matrix_error;
      continue;
    }

    if (is_ahc) {
      const LinkageKind kind = detail::linkage_kind_for(spec.algorithm);
      std::optional<Dendrogram> tree;
      std::string tree_error;
      try {
        tree.emplace(build_dendrogram(*matrix, kind));
      } catch (const std::exception& e) {
        tree_error = e.what();
      }
      std::optional<detail::TreeMetrics> tm;
      if (tree) {
        tm = detail::tree_metrics(*tree, ds.labels, spec,
                                  detail::derived_seed(spec.seed, base, 1));
      }
      for (index_t ai = 0; ai < n_algo; ++ai) {
        CellResult& cell = cell_at(ai);
        if (!tree) {
          cell.error = tree_error;
          continue;
        }
        try {
          const auto kappa = static_cast<index_t>(acombos[ai][0]);
          const FlatClustering flat = extract_k(*tree, kappa);
          detail::fill_tree_metrics(cell, *tm);
          detail::fill_flat_metrics(cell, flat, ds.labels);
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
      }
    } else if (spec.algorithm == "hdbscan") {
      const index_t n_l = grid.algorithm_axes[1].values.size();
      const index_t n_c = grid.algorithm_axes[0].values.size();
      for (index_t ci = 0; ci < n_c; ++ci) {
        const index_t group = ci * n_l;
        std::optional<Dendrogram> tree;
        std::string tree_error;
        try {
          const auto c =
              static_cast<index_t>(grid.algorithm_axes[0].values[ci]);
          tree.emplace(build_dendrogram(build_reachability(*matrix, c).matrix,
                                        LinkageKind::single));
        } catch (const std::exception& e) {
          tree_error = e.what();
        }
        std::optional<detail::TreeMetrics> tm;
        if (tree) {
          tm = detail::tree_metrics(
              *tree, ds.labels, spec,
              detail::derived_seed(spec.seed, base + group, 1));
        }
        for (index_t li = 0; li < n_l; ++li) {
          CellResult& cell = cell_at(group + li);
          if (!tree) {
            cell.error = tree_error;
            continue;
          }
          try {
            const auto l =
                static_cast<index_t>(grid.algorithm_axes[1].values[li]);
            const FlatClustering flat = hdbscan_extract(*tree, l);
            detail::fill_tree_metrics(cell, *tm);
            detail::fill_flat_metrics(cell, flat, ds.labels);
          } catch (const std::exception& e) {
            cell.error = e.what();
          }
        }
      }
    } else if (spec.algorithm == "pha") {
      const index_t n_kappa = grid.algorithm_axes[1].values.size();
      const index_t n_s = grid.algorithm_axes[0].values.size();
      for (index_t si = 0; si < n_s; ++si) {
        const index_t group = si * n_kappa;
        std::optional<Dendrogram> tree;
        std::string tree_error;
        try {
          tree.emplace(pha_tree(*matrix, grid.algorithm_axes[0].values[si]));
        } catch (const std::exception& e) {
          tree_error = e.what();
        }
        std::optional<detail::TreeMetrics> tm;
        if (tree) {
          tm = detail::tree_metrics(
              *tree, ds.labels, spec,
              detail::derived_seed(spec.seed, base + group, 1));
        }
        for (index_t ki = 0; ki < n_kappa; ++ki) {
          CellResult& cell = cell_at(group + ki);
          if (!tree) {
            cell.error = tree_error;
            continue;
          }
          try {
            const auto kappa =
                static_cast<index_t>(grid.algorithm_axes[1].values[ki]);
            const FlatClustering flat = extract_k(*tree, kappa);
            detail::fill_tree_metrics(cell, *tm);
            detail::fill_flat_metrics(cell, flat, ds.labels);
          } catch (const std::exception& e) {
            cell.error = e.what();
          }
        }
      }
    } else if (spec.algorithm == "gdl") {
      for (index_t ai = 0; ai < n_algo; ++ai) {
        CellResult& cell = cell_at(ai);
        try {
          const auto knn = static_cast<index_t>(acombos[ai][0]);
          const double a = acombos[ai][1];
          const auto kappa = static_cast<index_t>(acombos[ai][2]);
          const GdlResult res = gdl_cluster(*matrix, knn, a, kappa);
          detail::fill_flat_metrics(cell, res.clustering, ds.labels);
          cell.report.dendrogram_purity =
              std::numeric_limits<double>::quiet_NaN();
          if (res.disconnected) {
            cell.warning =
                "merge stalled before the target: graph affinity exhausted "
                "(got " +
                std::to_string(res.clustering.k) + " clusters)";
          }
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
      }
    } else {
      throw argument_error("unknown algorithm: " + spec.algorithm);
    }
  }

  // Best cells: strict improvement only, so ties keep the first grid cell.
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const CellResult& cell = result.cells[i];
    if (!cell.error.empty()) {
      ++result.error_count;
      continue;
    }
    if (cell.has_tree_metrics &&
        (result.best_by_purity < 0 ||
         cell.report.dendrogram_purity >
             result.cells[result.best_by_purity].report.dendrogram_purity)) {
      result.best_by_purity = static_cast<std::ptrdiff_t>(i);
    }
    if (cell.has_flat_metrics &&
        (result.best_by_f1 < 0 ||
         cell.report.f1 > result.cells[result.best_by_f1].report.f1)) {
      result.best_by_f1 = static_cast<std::ptrdiff_t>(i);
    }
  }

  // Rebuild the winning dendrograms from their cells' derived seeds; the
  // per-cell seeding makes this identical to what the sweep evaluated.
  const auto rebuild_tree = [&](index_t cell_index) -> Dendrogram {
    const index_t mi = cell_index / n_algo;
    const index_t ai = cell_index % n_algo;
    const MeasureSpec cell_ms = detail::measure_spec_for(
        spec.measure, grid.measure_axes, mcombos[mi],
        detail::derived_seed(spec.seed, mi * n_algo, 0));
    const SimMatrix matrix = similarity_matrix(cell_ms, ds);
    if (is_ahc) {
      return build_dendrogram(matrix,
                              detail::linkage_kind_for(spec.algorithm));
    }
    if (spec.algorithm == "hdbscan") {
      const auto c = static_cast<index_t>(acombos[ai][0]);
      return build_dendrogram(build_reachability(matrix, c).matrix,
                              LinkageKind::single);
    }
    return pha_tree(matrix, acombos[ai][0]);
  };
  if (spec.algorithm != "gdl") {
    if (result.best_by_purity >= 0) {
      result.best_purity_tree =
          rebuild_tree(static_cast<index_t>(result.best_by_purity));
    }
    if (result.best_by_f1 >= 0) {
      result.best_f1_tree =
          rebuild_tree(static_cast<index_t>(result.best_by_f1));
    }
  }

  result.grid_csv = report_csv_header() + ",error\n";
  for (const CellResult& cell : result.cells) {
    result.grid_csv += detail::grid_csv_row(cell);
    result.grid_csv += '\n';
  }

  nlohmann::ordered_json summary;
  summary["dataset"] = spec.dataset_path;
  summary["n"] = ds.n;
  summary["classes"] = ds.num_classes();
  summary["measure"] = spec.measure;
  summary["algorithm"] = spec.algorithm;
  summary["seed"] = spec.seed;
  summary["cells"] = result.cells.size();
  summary["errors"] = result.error_count;
  summary["best_by_purity"] =
      result.best_by_purity >= 0
          ? detail::summary_cell_json(result.cells[result.best_by_purity],
                                      result.best_by_purity)
          : nlohmann::ordered_json(nullptr);
  summary["best_by_f1"] =
      result.best_by_f1 >= 0
          ? detail::summary_cell_json(result.cells[result.best_by_f1],
                                      result.best_by_f1)
          : nlohmann::ordered_json(nullptr);
  result.summary_json = summary.dump(2) + "\n";

  if (!spec.out_dir.empty()) {
    std::filesystem::create_directories(spec.out_dir);
    detail::write_text_file(spec.out_dir + "/grid.csv", result.grid_csv);
    detail::write_text_file(spec.out_dir + "/summary.json",
                            result.summary_json);
    if (spec.algorithm != "gdl") {
      if (result.best_by_purity >= 0) {
        emit_dendrogram(result.best_purity_tree,
                        spec.out_dir + "/best_purity");
      }
      if (result.best_by_f1 >= 0) {
        emit_dendrogram(result.best_f1_tree, spec.out_dir + "/best_f1");
      }
    }
  }
  return result;
}

}  // namespace kahc
