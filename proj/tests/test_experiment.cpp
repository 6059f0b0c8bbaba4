// Grid-search driver tests: axis construction, override parsing, sweep
// correctness against the one-shot pipelines, determinism, error rows, and
// the on-disk artifacts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>
#include <kahc/experiment.hpp>

using namespace kahc;

namespace {

std::string scratch_path(const std::string& name) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "kahc_experiment_tests";
  fs::create_directories(dir);
  return (dir / name).string();
}

std::string write_blobs(const std::string& name,
                        const std::vector<BlobSpec>& spec,
                        std::uint64_t seed) {
  const std::string path = scratch_path(name);
  save_csv(gen_varied_density_blobs(spec, seed), path);
  return path;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double height_cv(const Dendrogram& t) {
  REQUIRE(!t.merges.empty());
  double mean = 0.0;
  for (const Merge& m : t.merges) mean += m.height;
  mean /= double(t.merges.size());
  double var = 0.0;
  for (const Merge& m : t.merges) {
    var += (m.height - mean) * (m.height - mean);
  }
  var /= double(t.merges.size());
  REQUIRE(mean > 0.0);
  return std::sqrt(var) / mean;
}

}  // namespace

TEST_CASE("grid override parsing handles scalars, ranges, and lists") {
  const auto grid =
      parse_grid_overrides("kappa=2:5,s=5;15;25,sigma=0.25,l=2:10:4");
  REQUIRE(grid.size() == 4);
  CHECK(grid.at("kappa") == std::vector<double>{2, 3, 4, 5});
  CHECK(grid.at("s") == std::vector<double>{5, 15, 25});
  CHECK(grid.at("sigma") == std::vector<double>{0.25});
  CHECK(grid.at("l") == std::vector<double>{2, 6, 10});
  CHECK(parse_grid_overrides("").empty());
  CHECK(parse_grid_overrides("  ").empty());

  CHECK_THROWS_AS(parse_grid_overrides("kappa"), argument_error);
  CHECK_THROWS_AS(parse_grid_overrides("=5"), argument_error);
  CHECK_THROWS_AS(parse_grid_overrides("kappa=abc"), argument_error);
  CHECK_THROWS_AS(parse_grid_overrides("kappa=5:2"), argument_error);
  CHECK_THROWS_AS(parse_grid_overrides("kappa=1:9:0"), argument_error);
  CHECK_THROWS_AS(parse_grid_overrides("kappa=1,kappa=2"), argument_error);
}

TEST_CASE("default axes follow the published search ranges") {
  SECTION("distance has no measure axis") {
    CHECK(default_measure_axes("dist", 178, false).empty());
  }
  SECTION("gaussian bandwidths are the eleven powers of two") {
    const auto axes = default_measure_axes("gk", 178, false);
    REQUIRE(axes.size() == 1);
    CHECK(axes[0].key == "sigma");
    REQUIRE(axes[0].values.size() == 11);
    CHECK(axes[0].values.front() == 0.03125);
    CHECK(axes[0].values.back() == 32.0);
  }
  SECTION("isolation subsample sizes cover [2, ceil(n/2)] geometrically") {
    const auto axes = default_measure_axes("ik", 178, false);
    REQUIRE(axes.size() == 2);
    CHECK(axes[0].key == "psi");
    CHECK(axes[0].values == std::vector<double>{2, 4, 8, 16, 32, 64, 89});
    CHECK(axes[1].key == "t");
    CHECK(axes[1].values == std::vector<double>{200});
  }
  SECTION("the exhaustive flag sweeps every integer") {
    const auto axes = default_measure_axes("ik", 178, true);
    REQUIRE(axes[0].values.size() == 88);  // 2..89
    CHECK(axes[0].values.front() == 2.0);
    CHECK(axes[0].values.back() == 89.0);
  }
  SECTION("adaptive neighbor counts clamp to the dataset") {
    const auto axes = default_measure_axes("agk", 20, false);
    REQUIRE(axes.size() == 1);
    CHECK(axes[0].values == std::vector<double>{2, 4, 8, 10});
  }
  SECTION("cluster-count sweeps stop at 30 or at n") {
    auto axes = default_algorithm_axes("ahc-single", 100);
    REQUIRE(axes.size() == 1);
    CHECK(axes[0].key == "kappa");
    CHECK(axes[0].values.size() == 29);
    axes = default_algorithm_axes("ahc-complete", 10);
    CHECK(axes[0].values == std::vector<double>{2, 3, 4, 5, 6, 7, 8, 9, 10});
  }
  SECTION("density-extraction ranges clamp to the dataset") {
    const auto axes = default_algorithm_axes("hdbscan", 50);
    REQUIRE(axes.size() == 2);
    CHECK(axes[0].key == "c");
    CHECK(axes[0].values.size() == 48);  // 2..49
    CHECK(axes[1].key == "l");
    CHECK(axes[1].values.size() == 49);  // 2..50
  }
  SECTION("potential scale factors are fixed steps") {
    const auto axes = default_algorithm_axes("pha", 300);
    REQUIRE(axes.size() == 2);
    CHECK(axes[0].key == "s");
    CHECK(axes[0].values == std::vector<double>{5, 10, 15, 20, 25, 30});
    CHECK(axes[1].key == "kappa");
  }
  SECTION("graph neighbor counts drop values the dataset cannot satisfy") {
    const auto axes = default_algorithm_axes("gdl", 50);
    REQUIRE(axes.size() == 3);
    CHECK(axes[0].key == "knn");
    CHECK(axes[0].values == std::vector<double>{5, 10, 15, 20, 25, 30});
    CHECK(axes[1].key == "a");
    CHECK(axes[1].values == std::vector<double>{1});
    CHECK(axes[2].key == "kappa");
  }
  SECTION("unknown names are rejected") {
    CHECK_THROWS_AS(default_measure_axes("cosine", 10, false), argument_error);
    CHECK_THROWS_AS(default_algorithm_axes("kmeans", 10), argument_error);
  }
}

TEST_CASE("grid overrides validate keys and integer values") {
  ExperimentSpec spec;
  spec.measure = "dist";
  spec.algorithm = "ahc-single";

  spec.grid = {{"sigma", {1.0}}};
  CHECK_THROWS_AS(build_grid(spec, 50), argument_error);

  spec.grid = {{"kappa", {2.5}}};
  CHECK_THROWS_AS(build_grid(spec, 50), argument_error);

  spec.grid = {{"kappa", {}}};
  CHECK_THROWS_AS(build_grid(spec, 50), argument_error);

  spec.grid = {{"kappa", {5, 5, 7}}};
  const ExperimentGrid grid = build_grid(spec, 50);
  CHECK(grid.algorithm_axes[0].values == std::vector<double>{5, 7});

  ExperimentSpec pha_spec;
  pha_spec.algorithm = "pha";
  pha_spec.grid = {{"s", {2.5}}};  // the scale factor is a real number
  CHECK(build_grid(pha_spec, 50).algorithm_axes[0].values ==
        std::vector<double>{2.5});
}

TEST_CASE("single-linkage sweep over a distance matrix finds the blob count") {
  const std::string path = write_blobs(
      "two_blobs.csv",
      {{{0.0, 0.0}, {0.05}, 10}, {{4.0, 4.0}, {0.05}, 10}}, 11);
  ExperimentSpec spec;
  spec.dataset_path = path;
  spec.measure = "dist";
  spec.algorithm = "ahc-single";

  const ExperimentResult res = run_experiment(spec);
  REQUIRE(res.cells.size() == 19);  // kappa 2..20
  CHECK(res.n == 20);
  CHECK(res.error_count == 0);
  CHECK(res.cells.front().report.parameters == "kappa=2");
  CHECK(res.cells.back().report.parameters == "kappa=20");
  for (const CellResult& cell : res.cells) {
    CHECK(cell.report.measure_tag == "euclidean");
    CHECK(cell.has_tree_metrics);
    CHECK(cell.has_flat_metrics);
    // every cell shares the one dendrogram, so tree metrics are constant
    CHECK(cell.report.dendrogram_purity ==
          res.cells.front().report.dendrogram_purity);
  }
  // ties on purity keep the first grid cell
  CHECK(res.best_by_purity == 0);
  REQUIRE(res.best_by_f1 >= 0);
  CHECK(res.cells[res.best_by_f1].report.parameters == "kappa=2");
  CHECK(res.cells[res.best_by_f1].report.f1 == 1.0);
  // header plus one line per cell
  CHECK(std::count(res.grid_csv.begin(), res.grid_csv.end(), '\n') == 20);
}

TEST_CASE("a rerun with the same spec is byte-identical") {
  const std::string path = write_blobs(
      "rerun_blobs.csv",
      {{{0.0, 0.0}, {0.08}, 12}, {{3.0, 3.0}, {0.08}, 12}}, 13);
  ExperimentSpec spec;
  spec.dataset_path = path;
  spec.measure = "ik";
  spec.algorithm = "ahc-single";
  spec.seed = 42;
  spec.exact_purity_limit = 0;  // force the Monte-Carlo purity path
  spec.mc_samples = 20000;

  const ExperimentResult a = run_experiment(spec);
  const ExperimentResult b = run_experiment(spec);
  CHECK(a.grid_csv == b.grid_csv);
  CHECK(a.summary_json == b.summary_json);
  CHECK(a.cells.size() == 4 * 23);  // psi {2,4,8,12} x kappa {2..24}
  // the sampling seed is derived per measure cell and lands in the tag
  CHECK(a.cells.front().report.measure_tag.find("isolation(psi=2,t=200,seed=") !=
        std::string::npos);
  CHECK(a.cells.front().report.measure_tag !=
        a.cells.back().report.measure_tag);
}

TEST_CASE("error cells record their message and the run continues") {
  const std::string path = write_blobs(
      "error_blobs.csv",
      {{{0.0, 0.0}, {0.05}, 10}, {{4.0, 4.0}, {0.05}, 10}}, 17);
  ExperimentSpec spec;
  spec.dataset_path = path;
  spec.measure = "dist";
  spec.algorithm = "ahc-single";
  spec.grid = {{"kappa", {5, 50}}};  // 50 > n: that cell must fail

  const ExperimentResult res = run_experiment(spec);
  REQUIRE(res.cells.size() == 2);
  CHECK(res.cells[0].error.empty());
  CHECK(res.cells[0].has_flat_metrics);
  CHECK_FALSE(res.cells[1].error.empty());
  CHECK_FALSE(res.cells[1].has_tree_metrics);
  CHECK_FALSE(res.cells[1].has_flat_metrics);
  CHECK(res.error_count == 1);
  CHECK(res.best_by_f1 == 0);
  // the failing row carries its message in the last column
  CHECK(res.grid_csv.find(res.cells[1].error) != std::string::npos);
}

TEST_CASE("density sweep matches the one-shot pipeline on every cell") {
  const std::string path = write_blobs(
      "hdbscan_blobs.csv",
      {{{0.0, 0.0}, {0.05}, 12}, {{5.0, 5.0}, {0.05}, 12}}, 19);
  ExperimentSpec spec;
  spec.dataset_path = path;
  spec.measure = "dist";
  spec.algorithm = "hdbscan";
  spec.grid = {{"c", {3, 5}}, {"l", {3, 6}}};

  const ExperimentResult res = run_experiment(spec);
  REQUIRE(res.cells.size() == 4);
  CHECK(res.error_count == 0);

  const Dataset ds = minmax_normalize(load_csv(path, 2));
  const SimMatrix m = euclidean_matrix(ds);
  const index_t cs[] = {3, 5};
  const index_t ls[] = {3, 6};
  index_t i = 0;
  for (index_t c : cs) {
    for (index_t l : ls) {
      const HdbscanResult direct = hdbscan_cluster(m, l, c);
      const CellResult& cell = res.cells[i++];
      CHECK(cell.report.parameters ==
            "c=" + std::to_string(c) + ",l=" + std::to_string(l));
      CHECK(cell.report.dendrogram_purity ==
            dendrogram_purity_exact(direct.dendrogram, ds.labels));
      CHECK(cell.report.f1 == f1_flat(direct.clustering, ds.labels).f1);
    }
  }
}

TEST_CASE("potential sweep matches the one-shot pipeline on every cell") {
  const std::string path = write_blobs(
      "pha_blobs.csv",
      {{{0.0, 0.0}, {0.1}, 10}, {{3.0, 3.0}, {0.1}, 10}}, 23);
  ExperimentSpec spec;
  spec.dataset_path = path;
  spec.measure = "dist";
  spec.algorithm = "pha";
  spec.grid = {{"s", {5, 20}}, {"kappa", {2, 4}}};

  const ExperimentResult res = run_experiment(spec);
  REQUIRE(res.cells.size() == 4);
  CHECK(res.error_count == 0);

  const Dataset ds = minmax_normalize(load_csv(path, 2));
  const SimMatrix m = euclidean_matrix(ds);
  const double ss[] = {5, 20};
  const index_t kappas[] = {2, 4};
  index_t i = 0;
  for (double s : ss) {
    for (index_t kappa : kappas) {
      const PhaResult direct = pha_cluster(m, s, kappa);
      const CellResult& cell = res.cells[i++];
      CHECK(cell.report.dendrogram_purity ==
            dendrogram_purity_exact(direct.dendrogram, ds.labels));
      CHECK(cell.report.f1 == f1_flat(direct.clustering, ds.labels).f1);
    }
  }
}

TEST_CASE("graph-linkage cells report flat metrics only") {
  const std::string path = write_blobs(
      "gdl_blobs.csv",
      {{{0.0, 0.0}, {0.05}, 10}, {{6.0, 6.0}, {0.05}, 10}}, 29);
  ExperimentSpec spec;
  spec.dataset_path = path;
  spec.measure = "dist";
  spec.algorithm = "gdl";
  spec.grid = {{"knn", {5}}, {"kappa", {2}}};

  const ExperimentResult res = run_experiment(spec);
  REQUIRE(res.cells.size() == 1);
  const CellResult& cell = res.cells[0];
  CHECK(cell.error.empty());
  CHECK_FALSE(cell.has_tree_metrics);
  CHECK(cell.has_flat_metrics);
  CHECK(cell.report.f1 == 1.0);
  CHECK(std::isnan(cell.report.dendrogram_purity));
  CHECK(res.best_by_purity == -1);
  CHECK(res.best_by_f1 == 0);
  // empty purity/entanglement columns in the row
  CHECK(res.grid_csv.find("euclidean,\"knn=5,a=1,kappa=2\",,,,1,") !=
        std::string::npos);
  CHECK(res.summary_json.find("\"best_by_purity\": null") !=
        std::string::npos);
}

TEST_CASE("stalled graph merges surface as warnings, not errors") {
  const std::string path = write_blobs(
      "gdl_stall_blobs.csv",
      {{{0.0, 0.0}, {0.05}, 10}, {{6.0, 6.0}, {0.05}, 10}}, 31);
  ExperimentSpec spec;
  spec.dataset_path = path;
  spec.measure = "dist";
  spec.algorithm = "gdl";
  // no cross-blob edges with knn=5, so one cluster is unreachable
  spec.grid = {{"knn", {5}}, {"kappa", {1}}};

  const ExperimentResult res = run_experiment(spec);
  REQUIRE(res.cells.size() == 1);
  CHECK(res.cells[0].error.empty());
  CHECK_FALSE(res.cells[0].warning.empty());
  CHECK(res.error_count == 0);
  CHECK(res.grid_csv.find("warning: merge stalled") != std::string::npos);
}

TEST_CASE("summary json names both winners") {
  const std::string path = write_blobs(
      "summary_blobs.csv",
      {{{0.0, 0.0}, {0.05}, 10}, {{4.0, 4.0}, {0.05}, 10}}, 37);
  ExperimentSpec spec;
  spec.dataset_path = path;
  spec.measure = "dist";
  spec.algorithm = "ahc-single";

  const ExperimentResult res = run_experiment(spec);
  const nlohmann::json summary = nlohmann::json::parse(res.summary_json);
  CHECK(summary["dataset"] == path);
  CHECK(summary["n"] == 20);
  CHECK(summary["classes"] == 2);
  CHECK(summary["measure"] == "dist");
  CHECK(summary["algorithm"] == "ahc-single");
  CHECK(summary["cells"] == 19);
  CHECK(summary["errors"] == 0);
  REQUIRE(!summary["best_by_purity"].is_null());
  CHECK(summary["best_by_purity"]["cell_index"] == 0);
  REQUIRE(!summary["best_by_f1"].is_null());
  CHECK(summary["best_by_f1"]["f1"] == 1.0);
  CHECK(summary["best_by_f1"]["precision"].size() == 2);
  CHECK(summary["best_by_f1"]["recall"].size() == 2);
}

TEST_CASE("run artifacts are written and reload cleanly") {
  namespace fs = std::filesystem;
  const std::string path = write_blobs(
      "artifact_blobs.csv",
      {{{0.0, 0.0}, {0.05}, 10}, {{4.0, 4.0}, {0.05}, 10}}, 41);
  const std::string out_dir = scratch_path("artifact_out");
  fs::remove_all(out_dir);

  ExperimentSpec spec;
  spec.dataset_path = path;
  spec.measure = "dist";
  spec.algorithm = "ahc-single";
  spec.out_dir = out_dir;

  const ExperimentResult res = run_experiment(spec);
  CHECK(read_file(out_dir + "/grid.csv") == res.grid_csv);
  CHECK(read_file(out_dir + "/summary.json") == res.summary_json);

  const Dendrogram reloaded = parse_dendrogram(
      read_file(out_dir + "/best_purity.tree"), res.best_purity_tree.kind);
  CHECK(serialize_dendrogram(reloaded) ==
        serialize_dendrogram(res.best_purity_tree));

  const std::string profile = read_file(out_dir + "/best_f1.heights");
  CHECK(profile.rfind("step,height\n", 0) == 0);
  CHECK(std::count(profile.begin(), profile.end(), '\n') ==
        std::ptrdiff_t(res.best_f1_tree.merges.size()) + 1);
}

TEST_CASE("flat-only algorithms cannot export a dendrogram") {
  CHECK_THROWS_AS(require_dendrogram_support("gdl"), unsupported_operation);
  CHECK_NOTHROW(require_dendrogram_support("ahc-single"));
  CHECK_NOTHROW(require_dendrogram_support("hdbscan"));
  CHECK_NOTHROW(require_dendrogram_support("pha"));

  namespace fs = std::filesystem;
  const std::string path = write_blobs(
      "gdl_artifact_blobs.csv",
      {{{0.0, 0.0}, {0.05}, 10}, {{6.0, 6.0}, {0.05}, 10}}, 43);
  const std::string out_dir = scratch_path("gdl_artifact_out");
  fs::remove_all(out_dir);
  ExperimentSpec spec;
  spec.dataset_path = path;
  spec.measure = "dist";
  spec.algorithm = "gdl";
  spec.grid = {{"knn", {5}}, {"kappa", {2}}};
  spec.out_dir = out_dir;
  run_experiment(spec);
  CHECK(fs::exists(out_dir + "/grid.csv"));
  CHECK_FALSE(fs::exists(out_dir + "/best_purity.tree"));
  CHECK_FALSE(fs::exists(out_dir + "/best_f1.tree"));
}

TEST_CASE("isolation heights vary less than gaussian heights on varied "
          "densities") {
  const std::string path = write_blobs(
      "cv_blobs.csv",
      {{{0.3, 0.3}, {0.02}, 60}, {{0.7, 0.7}, {0.25}, 60}}, 5);

  ExperimentSpec gk_spec;
  gk_spec.dataset_path = path;
  gk_spec.measure = "gk";
  gk_spec.algorithm = "ahc-single";
  const ExperimentResult gk_res = run_experiment(gk_spec);
  REQUIRE(gk_res.best_by_purity >= 0);

  ExperimentSpec ik_spec = gk_spec;
  ik_spec.measure = "ik";
  const ExperimentResult ik_res = run_experiment(ik_spec);
  REQUIRE(ik_res.best_by_purity >= 0);

  CHECK(height_cv(ik_res.best_purity_tree) <
        height_cv(gk_res.best_purity_tree));
}
