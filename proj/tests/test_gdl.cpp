// SPDX-License-Identifier: Apache-2.0
// Copyright (c) the kahc project authors.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "kahc/dataset.hpp"
#include "kahc/eval.hpp"
#include "kahc/gdl.hpp"
#include "kahc/kernels.hpp"
#include "kahc/linkage.hpp"

using namespace kahc;

namespace {

bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> fwd, bwd;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (fwd.count(a[i]) && fwd[a[i]] != b[i]) return false;
    if (bwd.count(b[i]) && bwd[b[i]] != a[i]) return false;
    fwd[a[i]] = b[i];
    bwd[b[i]] = a[i];
  }
  return true;
}

}  // namespace

TEST_CASE("degree graph edges, bandwidth, and weights by hand") {
  Dataset ds;
  ds.n = 4;
  ds.d = 1;
  ds.x = {0.0, 1.0, 3.0, 7.0};
  const DegreeGraph g = build_degree_graph(euclidean_matrix(ds), 1, 1.0);
  // 1-NN: 0->1, 1->0, 2->1, 3->2; sigma2 = (1/4)(1+1+4+16) = 5.5
  CHECK(g.sigma2 == Catch::Approx(5.5));
  REQUIRE(g.out_edges[0].size() == 1);
  CHECK(g.out_edges[0][0].first == 1);
  CHECK(g.out_edges[1][0].first == 0);
  CHECK(g.out_edges[2][0].first == 1);
  CHECK(g.out_edges[3][0].first == 2);
  CHECK(g.out_edges[0][0].second == Catch::Approx(std::exp(-1.0 / 5.5)));
  CHECK(g.out_edges[3][0].second == Catch::Approx(std::exp(-16.0 / 5.5)));
  // in-edges mirror out-edges
  REQUIRE(g.in_edges[1].size() == 2);
  CHECK(g.in_edges[2].size() == 1);
  CHECK(g.in_edges[3].empty());
}

TEST_CASE("kernel form squares one minus similarity in the exponent") {
  Dataset ds;
  ds.n = 3;
  ds.d = 1;
  ds.x = {0.0, 1.0, 5.0};
  const SimMatrix sim = gaussian_matrix(ds, 1.0);
  const DegreeGraph g = build_degree_graph(sim, 1, 1.0);
  // most similar neighbor of each point mirrors nearest in distance
  CHECK(g.out_edges[0][0].first == 1);
  CHECK(g.out_edges[1][0].first == 0);
  CHECK(g.out_edges[2][0].first == 1);
  const double m01 = 1.0 - std::exp(-0.5);
  const double m21 = 1.0 - std::exp(-8.0);
  const double sigma2 = (m01 * m01 + m01 * m01 + m21 * m21) / 3.0;
  CHECK(g.sigma2 == Catch::Approx(sigma2));
  CHECK(g.out_edges[0][0].second ==
        Catch::Approx(std::exp(-m01 * m01 / sigma2)));
}

TEST_CASE("affinity is symmetric in its arguments") {
  const Dataset ds = gen_varied_density_blobs(
      {{{0.0, 0.0}, {0.8}, 12}, {{3.0, 2.0}, {0.8}, 12}}, 51);
  const DegreeGraph g = build_degree_graph(euclidean_matrix(ds), 4, 1.0);
  std::vector<char> mark(ds.n, 0);
  const std::vector<index_t> a{0, 1, 2, 3, 4};
  const std::vector<index_t> b{12, 13, 14, 15};
  const double ab = detail::degree_affinity(g, a, b, mark);
  const double ba = detail::degree_affinity(g, b, a, mark);
  CHECK(ab == Catch::Approx(ba));
  CHECK(std::count(mark.begin(), mark.end(), 1) == 0);  // scratch restored
}

TEST_CASE("affinity matches a direct evaluation of the degree products") {
  Dataset ds;
  ds.n = 6;
  ds.d = 1;
  ds.x = {0.0, 0.5, 1.1, 4.0, 4.4, 5.0};
  const DegreeGraph g = build_degree_graph(euclidean_matrix(ds), 2, 1.0);
  const std::vector<index_t> ca{0, 1, 2};
  const std::vector<index_t> cb{3, 4, 5};
  // dense weight lookup
  std::vector<double> w(36, 0.0);
  for (index_t i = 0; i < 6; ++i) {
    for (const auto& [j, weight] : g.out_edges[i]) w[i * 6 + j] = weight;
  }
  double expected = 0.0;
  for (const index_t i : cb) {
    double in = 0.0, out = 0.0;
    for (const index_t j : ca) {
      in += w[j * 6 + i];
      out += w[i * 6 + j];
    }
    expected += (in / 3.0) * (out / 3.0);
  }
  for (const index_t i : ca) {
    double in = 0.0, out = 0.0;
    for (const index_t j : cb) {
      in += w[j * 6 + i];
      out += w[i * 6 + j];
    }
    expected += (in / 3.0) * (out / 3.0);
  }
  std::vector<char> mark(6, 0);
  CHECK(detail::degree_affinity(g, ca, cb, mark) == Catch::Approx(expected));
}

TEST_CASE("two blobs resolve to blob membership at target two") {
  const Dataset ds = gen_varied_density_blobs(
      {{{0.0, 0.0}, {0.5}, 10}, {{10.0, 10.0}, {0.5}, 10}}, 53);
  const SimMatrix dist = euclidean_matrix(ds);
  const GdlResult res = gdl_cluster(dist, 5, 1.0, 2);
  CHECK_FALSE(res.disconnected);
  CHECK(res.clustering.k == 2);
  CHECK(same_partition(res.clustering.labels, ds.labels));
  // cross-check against the single-linkage two-cut
  const FlatClustering cut =
      extract_k(build_dendrogram(dist, LinkageKind::single), 2);
  CHECK(same_partition(res.clustering.labels, cut.labels));
}

TEST_CASE("kernel matrices drop into the degree linkage unchanged") {
  const Dataset ds = gen_varied_density_blobs(
      {{{0.0, 0.0}, {0.5}, 10}, {{10.0, 10.0}, {0.5}, 10}}, 57);
  for (const SimMatrix& m :
       {gaussian_matrix(ds, 3.0), adaptive_gaussian_matrix(ds, 5),
        isolation_matrix(build_ik_model(ds, 8, 200, 3), ds)}) {
    const GdlResult res = gdl_cluster(m, 8, 1.0, 2);
    CHECK(res.clustering.k == 2);
    CHECK(same_partition(res.clustering.labels, ds.labels));
  }
}

TEST_CASE("initial clusters partition the points") {
  const Dataset ds = gen_varied_density_blobs(
      {{{0.0, 0.0}, {1.0}, 30}, {{4.0, 3.0}, {1.5}, 30}}, 59);
  // a high target keeps the initial 1-NN components untouched
  const GdlResult res = gdl_cluster(euclidean_matrix(ds), 3, 1.0, ds.n);
  CHECK(res.disconnected);  // 1-NN components are always coarser than n
  int max_label = 0;
  for (const int label : res.clustering.labels) {
    CHECK(label >= 1);
    max_label = std::max(max_label, label);
  }
  CHECK(max_label == res.clustering.k);
  CHECK(res.clustering.k < static_cast<int>(ds.n));
  // every 1-NN edge stays within one cluster
  const DegreeGraph g = build_degree_graph(euclidean_matrix(ds), 3, 1.0);
  for (index_t i = 0; i < ds.n; ++i) {
    const index_t nn = g.out_edges[i].front().first;
    CHECK(res.clustering.labels[i] == res.clustering.labels[nn]);
  }
}

TEST_CASE("identical points collapse into one component") {
  Dataset ds;
  ds.n = 6;
  ds.d = 2;
  ds.x.assign(12, 1.5);
  const SimMatrix dist = euclidean_matrix(ds);
  const DegreeGraph g = build_degree_graph(dist, 2, 1.0);
  CHECK(g.sigma2 == 0.0);
  for (index_t i = 0; i < ds.n; ++i) {
    for (const auto& [j, w] : g.out_edges[i]) CHECK(w == 1.0);
  }
  const GdlResult one = gdl_cluster(dist, 2, 1.0, 1);
  CHECK_FALSE(one.disconnected);
  CHECK(one.clustering.k == 1);
  // a higher target cannot be met: everything is one 1-NN component
  const GdlResult two = gdl_cluster(dist, 2, 1.0, 2);
  CHECK(two.disconnected);
  CHECK(two.clustering.k == 1);
}

TEST_CASE("underflowed cross weights stop the merging with a warning") {
  const Dataset ds = gen_varied_density_blobs(
      {{{0.0, 0.0}, {0.001}, 10}, {{1e6, 0.0}, {0.001}, 10}}, 61);
  // K=10 forces one cross-blob edge per point. The selected cross measures
  // dominate the scale estimate, so with a=1 their exponent would be a mild
  // -nK/20; shrinking a to 0.01 pushes it to -1000 and the weight flushes to
  // exactly zero while intra-blob weights stay at 1.
  const GdlResult res = gdl_cluster(euclidean_matrix(ds), 10, 0.01, 1);
  CHECK(res.disconnected);
  CHECK(res.clustering.k == 2);
  CHECK(same_partition(res.clustering.labels, ds.labels));
}

TEST_CASE("degree linkage validates its arguments") {
  const Dataset ds = gen_varied_density_blobs(
      {{{0.0, 0.0}, {0.5}, 5}, {{4.0, 4.0}, {0.5}, 5}}, 63);
  const SimMatrix dist = euclidean_matrix(ds);
  CHECK_THROWS_AS(build_degree_graph(dist, 0, 1.0), argument_error);
  CHECK_THROWS_AS(build_degree_graph(dist, ds.n, 1.0), argument_error);
  CHECK_THROWS_AS(build_degree_graph(dist, 3, 0.0), argument_error);
  CHECK_THROWS_AS(gdl_cluster(dist, 3, 1.0, 0), argument_error);
}

TEST_CASE("three blobs reach target three with full agreement") {
  const Dataset ds = gen_varied_density_blobs({{{0.0, 0.0}, {0.4}, 15},
                                               {{8.0, 0.0}, {0.4}, 15},
                                               {{4.0, 7.0}, {0.4}, 15}},
                                              67);
  const GdlResult res = gdl_cluster(euclidean_matrix(ds), 5, 1.0, 3);
  CHECK_FALSE(res.disconnected);
  CHECK(res.clustering.k == 3);
  CHECK(f1_flat(res.clustering, ds.labels).f1 == Catch::Approx(1.0));
}
