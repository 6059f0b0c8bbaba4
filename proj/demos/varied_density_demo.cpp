// Walkthrough: why a data-dependent similarity helps agglomerative
// clustering when neighboring clusters have very different densities.
//
// The program generates two touching Gaussian blobs — one tight, one
// diffuse — runs single-linkage clustering on four pairwise measures
// (Euclidean distance, Gaussian kernel, adaptive Gaussian kernel, isolation
// kernel), and prints how pure each dendrogram is, how often merges mix the
// two classes, and how well the two-cluster extraction recovers the truth.

#include <cstdio>

#include <kahc/dendrogram.hpp>
#include <kahc/eval.hpp>
#include <kahc/kernels.hpp>
#include <kahc/linkage.hpp>

int main() {
  using namespace kahc;

  // A dense blob pressed against a sparse one: the classic failure case for
  // distance-based linkage, whose short links inside the sparse blob's
  // fringe bridge the two classes early.
  const Dataset data = gen_varied_density_blobs(
      {{{0.30, 0.30}, {0.02}, 80}, {{0.62, 0.62}, {0.15}, 80}}, /*seed=*/3);

  const MeasureSpec measures[] = {
      {MeasureKind::euclidean, 1.0, 10, 16, 200, 1},
      {MeasureKind::gaussian, 0.25, 10, 16, 200, 1},
      {MeasureKind::adaptive_gaussian, 1.0, 10, 16, 200, 1},
      {MeasureKind::isolation, 1.0, 10, 16, 200, 1},
      {MeasureKind::isolation, 1.0, 10, 32, 200, 1},
  };

  std::printf("%-36s %9s %7s %10s %6s\n", "measure", "purity", "mixes",
              "avg level", "f1");
  for (const MeasureSpec& spec : measures) {
    const SimMatrix matrix = similarity_matrix(spec, data);
    const Dendrogram tree = build_dendrogram(matrix, LinkageKind::single);

    const double purity = dendrogram_purity_exact(tree, data.labels);
    const EntanglementReport mixes = entanglements(tree, data.labels);
    const FlatClustering flat = extract_k(tree, 2);
    const F1Result f1 = f1_flat(flat, data.labels);

    std::printf("%-36s %9.4f %7zu %10.1f %6.3f\n", matrix.measure_tag.c_str(),
                purity, mixes.count, mixes.avg_level, f1.f1);
  }

  std::printf(
      "\nHigher purity, fewer mixed merges, and later (deeper) mixing mean "
      "the\ndendrogram keeps each blob in one piece for longer; the "
      "data-dependent\nmeasures win because similarities inside the sparse "
      "blob are rescaled\nby the local density instead of being compared on "
      "raw lengths.\n");
  return 0;
}
