// SPDX-License-Identifier: Apache-2.0
// Copyright (c) the kahc project authors.
//
// Quantitative assessment of clustering results:
//   - dendrogram purity (exact and Monte-Carlo) against ground-truth labels,
//   - entanglement count / average level from the bottom-up neutral-label
//     procedure,
//   - per-cluster-pair separation checking (cross merges that precede the
//     completion of either cluster),
//   - Hungarian-matched F1 for flat clusterings with a noise label.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kahc/core.hpp"
#include "kahc/dendrogram.hpp"
#include "kahc/rng.hpp"

namespace kahc {

namespace detail {

inline void require_leaf_labels(const Dendrogram& t,
                                const std::vector<int>& labels) {
  if (labels.size() != t.leaf_count) {
    throw argument_error("labels must cover every leaf");
  }
  for (int c : labels) {
    if (c < 1) throw argument_error("leaf labels must be >= 1");
  }
}

/// Number of distinct unordered same-label pairs.
inline double same_label_pair_count(const std::vector<int>& labels) {
  std::unordered_map<int, double> hist;
  for (int c : labels) hist[c] += 1.0;
  double total = 0.0;
  for (const auto& [c, cnt] : hist) total += cnt * (cnt - 1.0) / 2.0;
  return total;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dendrogram purity
// ---------------------------------------------------------------------------

/// Exact dendrogram purity: the average, over all same-label point pairs
/// (x,y), of the fraction of that label inside the leaves of LCA(x,y).
///
/// Computed in one bottom-up pass: a pair's LCA is exactly the merge that
/// first unites its two points, so each merge contributes
/// cntL_c * cntR_c * (cnt_c / subtree_size) for every label c.
/// Datasets with no same-label pair (every label unique) score 1 vacuously.
inline double dendrogram_purity_exact(const Dendrogram& t,
                                      const std::vector<int>& labels) {
  detail::require_leaf_labels(t, labels);
  const index_t n = t.leaf_count;
  const double denom = detail::same_label_pair_count(labels);
  if (denom == 0.0) return 1.0;

  // per-node label histograms, merged small-into-large
  std::vector<std::unordered_map<int, index_t>> counts(2 * n);
  std::vector<index_t> size(2 * n, 0);
  for (index_t i = 1; i <= n; ++i) {
    counts[i][labels[i - 1]] = 1;
    size[i] = 1;
  }
  double acc = 0.0;
  for (const Merge& m : t.merges) {
    auto& big = counts[m.left].size() >= counts[m.right].size()
                    ? counts[m.left]
                    : counts[m.right];
    auto& small = counts[m.left].size() >= counts[m.right].size()
                      ? counts[m.right]
                      : counts[m.left];
    const double subtree = static_cast<double>(size[m.left] + size[m.right]);
    for (const auto& [c, cnt_small] : small) {
      const auto it = big.find(c);
      const double cnt_big =
          it == big.end() ? 0.0 : static_cast<double>(it->second);
      const double total_c = cnt_big + static_cast<double>(cnt_small);
      acc += cnt_big * static_cast<double>(cnt_small) * (total_c / subtree);
      big[c] += cnt_small;
    }
    const index_t node = n + m.step;
    counts[node] = std::move(big);
    counts[m.left].clear();
    counts[m.right].clear();
    size[node] = size[m.left] + size[m.right];
  }
  return acc / denom;
}

namespace detail {

/// Preprocessed tree queries: LCA by Euler tour + sparse table, and
/// per-label subtree counts by binary search over DFS leaf positions.
class TreeIndex {
 public:
  explicit TreeIndex(const Dendrogram& t) {
    const index_t n = t.leaf_count;
    const index_t nodes = n + t.merges.size();
    first_occ_.assign(nodes + 1, 0);
    leaf_begin_.assign(nodes + 1, 0);
    leaf_end_.assign(nodes + 1, 0);
    leaf_pos_.assign(n + 1, 0);
    euler_.reserve(4 * n);
    euler_depth_.reserve(4 * n);

    // iterative left-to-right DFS from the root
    struct Item {
      index_t node;
      index_t depth;
      int phase;
    };
    index_t next_leaf = 0;
    std::vector<Item> stack{{t.root_id(), 0, 0}};
    while (!stack.empty()) {
      auto [node, depth, phase] = stack.back();
      stack.pop_back();
      if (phase == 0) first_occ_[node] = euler_.size();
      euler_.push_back(node);
      euler_depth_.push_back(depth);
      if (t.is_leaf(node)) {
        leaf_pos_[node] = next_leaf;
        leaf_begin_[node] = next_leaf;
        leaf_end_[node] = ++next_leaf;
        continue;
      }
      const Merge& m = t.merge_of(node);
      if (phase == 0) {
        stack.push_back({node, depth, 1});
        stack.push_back({m.left, depth + 1, 0});
      } else if (phase == 1) {
        stack.push_back({node, depth, 2});
        stack.push_back({m.right, depth + 1, 0});
      } else {
        leaf_begin_[node] = leaf_begin_[m.left];
        leaf_end_[node] = leaf_end_[m.right];
      }
    }

    // sparse table of depth-minimum positions over the Euler tour
    const std::size_t len = euler_.size();
    std::size_t levels = 1;
    while ((std::size_t{1} << levels) <= len) ++levels;
    table_.assign(levels, std::vector<std::uint32_t>(len));
    for (std::size_t i = 0; i < len; ++i) {
      table_[0][i] = static_cast<std::uint32_t>(i);
    }
    for (std::size_t l = 1; l < levels; ++l) {
      const std::size_t half = std::size_t{1} << (l - 1);
      for (std::size_t i = 0; i + (std::size_t{1} << l) <= len; ++i) {
        const std::uint32_t a = table_[l - 1][i];
        const std::uint32_t b = table_[l - 1][i + half];
        table_[l][i] = euler_depth_[a] <= euler_depth_[b] ? a : b;
      }
    }
  }

  index_t lca(index_t u, index_t v) const {
    std::size_t a = first_occ_[u];
    std::size_t b = first_occ_[v];
    if (a > b) std::swap(a, b);
    const std::size_t span = b - a + 1;
    std::size_t l = 0;
    while ((std::size_t{2} << l) <= span) ++l;
    const std::uint32_t x = table_[l][a];
    const std::uint32_t y = table_[l][b + 1 - (std::size_t{1} << l)];
    return euler_[euler_depth_[x] <= euler_depth_[y] ? x : y];
  }

  index_t subtree_size(index_t node) const {
    return leaf_end_[node] - leaf_begin_[node];
  }

  /// DFS position of a leaf; positions inside any subtree are contiguous.
  index_t leaf_position(index_t leaf) const { return leaf_pos_[leaf]; }

  /// How many of the sorted positions fall inside the node's leaf range.
  index_t count_in_subtree(const std::vector<index_t>& sorted_positions,
                           index_t node) const {
    const auto lo = std::lower_bound(sorted_positions.begin(),
                                     sorted_positions.end(),
                                     leaf_begin_[node]);
    const auto hi = std::lower_bound(sorted_positions.begin(),
                                     sorted_positions.end(), leaf_end_[node]);
    return static_cast<index_t>(hi - lo);
  }

 private:
  std::vector<index_t> euler_;
  std::vector<index_t> euler_depth_;
  std::vector<std::size_t> first_occ_;
  std::vector<index_t> leaf_begin_, leaf_end_, leaf_pos_;
  std::vector<std::vector<std::uint32_t>> table_;
};

}  // namespace detail

/// Monte-Carlo dendrogram purity: uniform sampling over same-label pairs
/// (label chosen with probability proportional to its pair count), giving
/// an unbiased estimate of the exact score.  Deterministic per seed.
inline double dendrogram_purity_mc(const Dendrogram& t,
                                   const std::vector<int>& labels,
                                   index_t samples, std::uint64_t seed) {
  detail::require_leaf_labels(t, labels);
  if (samples < 1) {
    throw argument_error("dendrogram_purity_mc: samples must be >= 1");
  }
  const index_t n = t.leaf_count;

  // members per label, labels with fewer than two points cannot form pairs
  std::unordered_map<int, std::vector<index_t>> members_of;
  for (index_t i = 1; i <= n; ++i) members_of[labels[i - 1]].push_back(i);
  std::vector<std::vector<index_t>> members;
  for (auto& [c, mem] : members_of) {
    if (mem.size() >= 2) members.push_back(std::move(mem));
  }
  if (members.empty()) return 1.0;

  const detail::TreeIndex index(t);
  std::vector<std::vector<index_t>> positions(members.size());
  std::vector<std::uint64_t> cum_pairs(members.size());
  std::uint64_t total_pairs = 0;
  for (std::size_t c = 0; c < members.size(); ++c) {
    for (index_t leaf : members[c]) {
      positions[c].push_back(index.leaf_position(leaf));
    }
    std::sort(positions[c].begin(), positions[c].end());
    const std::uint64_t sz = members[c].size();
    total_pairs += sz * (sz - 1) / 2;
    cum_pairs[c] = total_pairs;
  }

  Rng rng(seed);
  double acc = 0.0;
  for (index_t s = 0; s < samples; ++s) {
    const std::uint64_t u = rng.below(total_pairs);
    const std::size_t c =
        std::upper_bound(cum_pairs.begin(), cum_pairs.end(), u) -
        cum_pairs.begin();
    const auto& mem = members[c];
    const index_t a = static_cast<index_t>(rng.below(mem.size()));
    index_t b = static_cast<index_t>(rng.below(mem.size() - 1));
    if (b >= a) ++b;
    const index_t node = index.lca(mem[a], mem[b]);
    acc += static_cast<double>(index.count_in_subtree(positions[c], node)) /
           static_cast<double>(index.subtree_size(node));
  }
  return acc / static_cast<double>(samples);
}

/// Exact purity for trees up to `exact_threshold` leaves, Monte-Carlo with
/// `mc_samples` pairs above it.
inline double dendrogram_purity(const Dendrogram& t,
                                const std::vector<int>& labels,
                                index_t exact_threshold = 5000,
                                index_t mc_samples = 1000000,
                                std::uint64_t seed = 1) {
  if (t.leaf_count <= exact_threshold) {
    return dendrogram_purity_exact(t, labels);
  }
  return dendrogram_purity_mc(t, labels, mc_samples, seed);
}

// ---------------------------------------------------------------------------
// Entanglements
// ---------------------------------------------------------------------------

/// Result of the bottom-up labeling procedure: merges joining two subtrees
/// of the same label inherit it; every other merge is "neutral" — an
/// entanglement — and its level is its 1-based merge step index.
struct EntanglementReport {
  index_t count = 0;
  index_t total_level = 0;
  double avg_level = 0.0;  // total_level / count, 0 when count == 0
  std::vector<bool> per_merge_flags;
};

inline EntanglementReport entanglements(const Dendrogram& t,
                                        const std::vector<int>& labels) {
  detail::require_leaf_labels(t, labels);
  const index_t n = t.leaf_count;
  EntanglementReport rep;
  rep.per_merge_flags.assign(t.merges.size(), false);
  std::vector<int> node_label(2 * n, 0);  // 0 = neutral
  for (index_t i = 1; i <= n; ++i) node_label[i] = labels[i - 1];
  for (const Merge& m : t.merges) {
    const int l = node_label[m.left];
    const int r = node_label[m.right];
    if (l == r && l != 0) {
      node_label[n + m.step] = l;
    } else {
      node_label[n + m.step] = 0;
      rep.per_merge_flags[m.step - 1] = true;
      ++rep.count;
      rep.total_level += m.step;
    }
  }
  rep.avg_level = rep.count == 0 ? 0.0
                                 : static_cast<double>(rep.total_level) /
                                       static_cast<double>(rep.count);
  return rep;
}

// ---------------------------------------------------------------------------
// Separation condition
// ---------------------------------------------------------------------------

/// One cross merge that happened before both clusters were internally
/// complete.  s and t are 1 + the number of completed pure internal merges
/// of cluster i and cluster j (respectively) at the moment of the cross
/// merge; step/left/right identify the offending merge in the full tree.
struct SeparationViolation {
  index_t s = 0;
  index_t t = 0;
  index_t step = 0;
  index_t left_node = 0;
  index_t right_node = 0;
};

/// Replays the merge trace projected onto the points of two ground-truth
/// clusters.  A merge is an event when both children contain projected
/// points; an event mixing i- and j-points is a violation unless it joins
/// the completed cluster i with the completed cluster j (the single legal
/// cross merge).  An empty list means the hierarchy keeps the two clusters
/// separated until each is fully assembled.
inline std::vector<SeparationViolation> check_separation_condition(
    const Dendrogram& t, const std::vector<int>& labels, int cluster_i,
    int cluster_j) {
  detail::require_leaf_labels(t, labels);
  if (cluster_i == cluster_j) {
    throw argument_error("check_separation_condition: clusters must differ");
  }
  const index_t n = t.leaf_count;
  index_t total_i = 0, total_j = 0;
  for (int c : labels) {
    total_i += (c == cluster_i);
    total_j += (c == cluster_j);
  }
  if (total_i == 0 || total_j == 0) {
    throw argument_error("check_separation_condition: unknown cluster label");
  }

  std::vector<index_t> ci(2 * n, 0), cj(2 * n, 0);  // projected counts
  for (index_t leaf = 1; leaf <= n; ++leaf) {
    ci[leaf] = (labels[leaf - 1] == cluster_i);
    cj[leaf] = (labels[leaf - 1] == cluster_j);
  }
  std::vector<SeparationViolation> out;
  index_t pure_i_done = 0, pure_j_done = 0;
  for (const Merge& m : t.merges) {
    const index_t li = ci[m.left], lj = cj[m.left];
    const index_t ri = ci[m.right], rj = cj[m.right];
    const index_t node = n + m.step;
    ci[node] = li + ri;
    cj[node] = lj + rj;
    const bool left_has = li + lj > 0;
    const bool right_has = ri + rj > 0;
    if (!left_has || !right_has) continue;  // not an event in the projection
    const bool mixes = (li + ri > 0) && (lj + rj > 0);
    if (!mixes) {
      // pure internal merge of one cluster
      if (li + ri > 0) {
        ++pure_i_done;
      } else {
        ++pure_j_done;
      }
      continue;
    }
    const bool legal_join = (li == total_i && lj == 0 && rj == total_j &&
                             ri == 0) ||
                            (lj == total_j && li == 0 && ri == total_i &&
                             rj == 0);
    if (!legal_join) {
      out.push_back({pure_i_done + 1, pure_j_done + 1, m.step, m.left,
                     m.right});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hungarian-matched F1
// ---------------------------------------------------------------------------

namespace detail {

/// Minimum-cost square assignment (shortest augmenting path, O(m^3)).
/// Returns row -> column.
inline std::vector<int> hungarian_min_assignment(
    const std::vector<double>& cost, int m) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(m + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> match(m + 1, 0);  // column -> row (1-based)
  std::vector<int> way(m + 1, 0);
  for (int i = 1; i <= m; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur =
            cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(m, -1);
  for (int j = 1; j <= m; ++j) {
    if (match[j] >= 1) row_to_col[match[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace detail

/// Per-ground-truth-cluster precision/recall and their mean F1 under the
/// optimal one-to-one cluster matching.
struct F1Result {
  double f1 = 0.0;
  std::vector<double> precision;  // per truth cluster, ascending label order
  std::vector<double> recall;
};

/// Matches predicted clusters to ground-truth clusters one-to-one so the
/// summed F1 is maximal, then averages F1 over all ground-truth clusters
/// (unmatched ones contribute 0).
///
/// Noise points (predicted label 0) belong to no predicted cluster but
/// still count toward ground-truth cluster sizes, so heavy noise depresses
/// recall.  An all-noise prediction scores 0.
inline F1Result f1_flat(const FlatClustering& pred,
                        const std::vector<int>& truth) {
  if (pred.labels.size() != truth.size()) {
    throw argument_error("f1_flat: prediction and truth sizes differ");
  }
  const std::size_t n = truth.size();

  // compact ids: truth clusters in ascending label order
  std::vector<int> truth_values;
  {
    std::unordered_map<int, char> seen;
    for (int c : truth) {
      if (c < 1) throw argument_error("f1_flat: truth labels must be >= 1");
      if (!seen.count(c)) {
        seen[c] = 1;
        truth_values.push_back(c);
      }
    }
    std::sort(truth_values.begin(), truth_values.end());
  }
  std::unordered_map<int, int> truth_id;
  for (std::size_t c = 0; c < truth_values.size(); ++c) {
    truth_id[truth_values[c]] = static_cast<int>(c);
  }
  const int kt = static_cast<int>(truth_values.size());

  int kp = 0;
  for (int p : pred.labels) {
    if (p < 0) throw argument_error("f1_flat: predicted labels must be >= 0");
    kp = std::max(kp, p);
  }

  F1Result res;
  res.precision.assign(kt, 0.0);
  res.recall.assign(kt, 0.0);
  if (kp == 0) return res;  // everything is noise

  std::vector<double> truth_size(kt, 0.0), pred_size(kp, 0.0);
  std::vector<double> confusion(static_cast<std::size_t>(kp) * kt, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    const int c = truth_id[truth[x]];
    truth_size[c] += 1.0;
    const int p = pred.labels[x];
    if (p == 0) continue;  // noise: no predicted membership
    pred_size[p - 1] += 1.0;
    confusion[static_cast<std::size_t>(p - 1) * kt + c] += 1.0;
  }

  auto cell_f1 = [&](int p, int c) {
    const double hits = confusion[static_cast<std::size_t>(p) * kt + c];
    if (hits == 0.0) return 0.0;
    const double prec = hits / pred_size[p];
    const double rec = hits / truth_size[c];
    return 2.0 * prec * rec / (prec + rec);
  };

  const int m = std::max(kp, kt);
  std::vector<double> cost(static_cast<std::size_t>(m) * m, 0.0);
  for (int p = 0; p < kp; ++p) {
    for (int c = 0; c < kt; ++c) {
      cost[static_cast<std::size_t>(p) * m + c] = -cell_f1(p, c);
    }
  }
  const std::vector<int> row_to_col =
      detail::hungarian_min_assignment(cost, m);

  double sum = 0.0;
  for (int p = 0; p < kp; ++p) {
    const int c = row_to_col[p];
    if (c < 0 || c >= kt) continue;  // matched a padding column
    const double f = cell_f1(p, c);
    if (f == 0.0) continue;  // no overlap: treat the truth cluster unmatched
    sum += f;
    const double hits = confusion[static_cast<std::size_t>(p) * kt + c];
    res.precision[c] = hits / pred_size[p];
    res.recall[c] = hits / truth_size[c];
  }
  res.f1 = sum / static_cast<double>(kt);
  return res;
}

// ---------------------------------------------------------------------------
// Evaluation report
// ---------------------------------------------------------------------------

/// Flat bundle of every score for one (dataset, measure, algorithm,
/// parameters) evaluation.
struct EvaluationReport {
  std::string measure_tag;
  std::string parameters;
  double dendrogram_purity = 0.0;
  EntanglementReport entanglement;
  double f1 = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
};

/// Stable-key-order JSON object for the report.
inline std::string report_to_json(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  j["measure_tag"] = r.measure_tag;
  j["parameters"] = r.parameters;
  j["dendrogram_purity"] = r.dendrogram_purity;
  j["entanglement_count"] = r.entanglement.count;
  j["entanglement_avg_level"] = r.entanglement.avg_level;
  j["f1"] = r.f1;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  return j.dump();
}

inline std::string report_csv_header() {
  return "measure_tag,parameters,dendrogram_purity,entanglement_count,"
         "entanglement_avg_level,f1";
}

namespace detail {

/// Quote a CSV field when it contains a comma, quote, or newline.
inline std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

}  // namespace detail

inline std::string report_csv_row(const EvaluationReport& r) {
  char buf[64];
  std::string out = detail::csv_quote(r.measure_tag) + "," +
                    detail::csv_quote(r.parameters) + ",";
  std::snprintf(buf, sizeof(buf), "%.17g", r.dendrogram_purity);
  out += buf;
  out += ',';
  out += std::to_string(r.entanglement.count);
  out += ',';
  std::snprintf(buf, sizeof(buf), "%.17g", r.entanglement.avg_level);
  out += buf;
  out += ',';
  std::snprintf(buf, sizeof(buf), "%.17g", r.f1);
  out += buf;
  return out;
}

}  // namespace kahc
