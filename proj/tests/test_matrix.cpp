// SPDX-License-Identifier: Apache-2.0
// Copyright (c) the kahc project authors.

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "kahc/matrix.hpp"

using kahc::MatrixKind;
using kahc::SimMatrix;

namespace {

struct TempPath {
  std::filesystem::path path;
  TempPath() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("kahc_matrix_" + std::to_string(++counter) + ".csv");
  }
  ~TempPath() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("SimMatrix constructor sets the kind-appropriate diagonal") {
  const SimMatrix s(3, MatrixKind::similarity, "test");
  for (kahc::index_t i = 0; i < 3; ++i) CHECK(s.at(i, i) == 1.0);
  const SimMatrix d(3, MatrixKind::dissimilarity, "test");
  for (kahc::index_t i = 0; i < 3; ++i) CHECK(d.at(i, i) == 0.0);
}

TEST_CASE("set writes symmetrically") {
  SimMatrix m(4, MatrixKind::similarity, "test");
  m.set(1, 3, 0.25);
  CHECK(m.at(1, 3) == 0.25);
  CHECK(m.at(3, 1) == 0.25);
}

TEST_CASE("to_dissimilarity flips values and kind") {
  SimMatrix m(2, MatrixKind::similarity, "test");
  m.set(0, 1, 0.25);
  const SimMatrix d = kahc::to_dissimilarity(m);
  CHECK(d.kind == MatrixKind::dissimilarity);
  CHECK(d.at(0, 1) == 0.75);
  CHECK(d.at(0, 0) == 0.0);
  CHECK(d.measure_tag == "test");
  CHECK_THROWS_AS(kahc::to_dissimilarity(d), kahc::argument_error);
}

TEST_CASE("to_dissimilarity preserves the extreme pair under reversal") {
  SimMatrix m(3, MatrixKind::similarity, "test");
  m.set(0, 1, 0.9);
  m.set(0, 2, 0.2);
  m.set(1, 2, 0.5);
  const SimMatrix d = kahc::to_dissimilarity(m);
  // the most similar pair becomes the least dissimilar pair
  CHECK(d.at(0, 1) < d.at(1, 2));
  CHECK(d.at(1, 2) < d.at(0, 2));
}

TEST_CASE("matrix csv round trip is bit exact") {
  SimMatrix m(3, MatrixKind::similarity, "gaussian(sigma=0.125000)");
  m.set(0, 1, 0.12345678901234567);
  m.set(0, 2, 1.0 / 3.0);
  m.set(1, 2, 2.2250738585072014e-308);
  TempPath f;
  kahc::save_matrix_csv(m, f.path.string());
  const SimMatrix back = kahc::load_matrix_csv(f.path.string());
  CHECK(back.kind == m.kind);
  CHECK(back.measure_tag == m.measure_tag);
  REQUIRE(back.n == m.n);
  CHECK(back.values == m.values);
}

TEST_CASE("matrix csv loader rejects malformed input") {
  TempPath f;
  {
    std::ofstream out(f.path);
    out << "similarity,test\n";  // header missing n
  }
  CHECK_THROWS_AS(kahc::load_matrix_csv(f.path.string()),
                  kahc::structural_error);
  {
    std::ofstream out(f.path);
    out << "similarity,test,2\n1,0.5\n";  // truncated body
  }
  CHECK_THROWS_AS(kahc::load_matrix_csv(f.path.string()),
                  kahc::structural_error);
  {
    std::ofstream out(f.path);
    out << "fuzzy,test,1\n1\n";  // unknown kind
  }
  CHECK_THROWS_AS(kahc::load_matrix_csv(f.path.string()),
                  kahc::structural_error);
  CHECK_THROWS_AS(kahc::load_matrix_csv("/nonexistent/zzz.csv"),
                  kahc::structural_error);
}
