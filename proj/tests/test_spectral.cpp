#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fbtc/features.hpp"
#include "fbtc/rng.hpp"
#include "fbtc/similarity.hpp"
#include "fbtc/spectral.hpp"

using namespace fbtc;
using Catch::Approx;

namespace {

// Block-diagonal similarity of complete graphs, one block per size entry.
Eigen::MatrixXd complete_blocks(const std::vector<int>& sizes) {
  int n = 0;
  for (int s : sizes) n += s;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  int at = 0;
  for (int size : sizes) {
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j)
        if (i != j) s(at + i, at + j) = 1.0;
    at += size;
  }
  return s;
}

Eigen::MatrixXd random_points(Rng& rng, int n, int d) {
  Eigen::MatrixXd pts(n, d);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) pts(i, c) = rng.uniform(-5, 5);
  return pts;
}

}  // namespace

TEST_CASE("row normalization") {
  Eigen::MatrixXd s(3, 3);
  s << 0, 1, 0.5, 1, 0, 0, 0.5, 0, 0;
  Eigen::MatrixXd p = row_normalize(similarity_from_dense(s));
  REQUIRE(p(0, 1) == Approx(2.0 / 3.0));
  REQUIRE(p(0, 2) == Approx(1.0 / 3.0));
  REQUIRE(p(1, 0) == Approx(1.0));
  for (int i = 0; i < 3; ++i) REQUIRE(p.row(i).sum() == Approx(1.0).margin(1e-12));

  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(3, 3) - Eigen::MatrixXd::Identity(3, 3);
  Eigen::MatrixXd p2 = row_normalize(similarity_from_dense(ones));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) REQUIRE(p2(i, j) == Approx(0.5));
}

TEST_CASE("two-point embedding by hand") {
  Eigen::MatrixXd s(2, 2);
  s << 0, 1, 1, 0;
  SpectralEmbedding emb = spectral_embedding(similarity_from_dense(s), 2);
  REQUIRE(emb.eigenvalues(0) == Approx(1.0).margin(1e-12));
  REQUIRE(emb.eigenvalues(1) == Approx(-1.0).margin(1e-12));
  REQUIRE(emb.embedding(0, 0) == Approx(1.0));
  REQUIRE(emb.embedding(1, 0) == Approx(-1.0));
}

TEST_CASE("two complete blocks separate exactly") {
  // Two complete blocks of 3: per block the row-normalized matrix is
  // (J - I)/2 with spectrum {1, -1/2, -1/2}, so the full spectrum is
  // {1, 1, -1/2 x4}. The embedding must give one point per block.
  Eigen::MatrixXd s = complete_blocks({3, 3});
  SpectralEmbedding emb = spectral_embedding(similarity_from_dense(s), 2);
  REQUIRE(emb.eigenvalues(0) == Approx(1.0).margin(1e-10));
  REQUIRE(emb.eigenvalues(1) == Approx(1.0).margin(1e-10));
  for (int i = 1; i < 3; ++i) {
    REQUIRE(emb.embedding(i, 0) == Approx(emb.embedding(0, 0)).margin(1e-10));
    REQUIRE(emb.embedding(3 + i, 0) == Approx(emb.embedding(3, 0)).margin(1e-10));
  }
  REQUIRE(std::abs(emb.embedding(0, 0) - emb.embedding(3, 0)) > 0.5);
}

TEST_CASE("eigenpair residuals on random graphs") {
  Rng rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    int n = 8 + static_cast<int>(rng.uniform_int(40));
    Eigen::MatrixXd pts = random_points(rng, n, 3);
    int p = 2 + static_cast<int>(rng.uniform_int(4));
    SimilarityGraph g = build_similarity(pts, p);
    int k = 2 + static_cast<int>(rng.uniform_int(3));
    SpectralEmbedding emb = spectral_embedding(g, k);
    Eigen::VectorXd deg = g.row_sums();
    for (int c = 0; c < k; ++c) {
      REQUIRE(std::abs(emb.eigenvalues(c)) <= 1.0 + 1e-8);
      Eigen::VectorXd u = emb.eigenvectors.col(c);
      Eigen::VectorXd pu = g.apply(u).cwiseQuotient(deg);
      double resid = (pu - emb.eigenvalues(c) * u).lpNorm<Eigen::Infinity>();
      REQUIRE(resid <= 1e-8 * u.lpNorm<Eigen::Infinity>());
    }
    // descending order
    for (int c = 1; c < k; ++c) REQUIRE(emb.eigenvalues(c) <= emb.eigenvalues(c - 1) + 1e-12);
    // unit rows (or recorded as degenerate)
    for (int i = 0; i < n; ++i) {
      bool degenerate = std::find(emb.degenerate_rows.begin(), emb.degenerate_rows.end(),
                                  i) != emb.degenerate_rows.end();
      if (!degenerate)
        REQUIRE(emb.embedding.row(i).norm() == Approx(1.0).margin(1e-9));
    }
  }
}

TEST_CASE("embedding is permutation equivariant") {
  Rng rng(29);
  int n = 14;
  Eigen::MatrixXd pts = random_points(rng, n, 2);
  SimilarityGraph g = build_similarity(pts, 3);
  SpectralEmbedding emb = spectral_embedding(g, 3);

  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
  Eigen::MatrixXd shuffled(n, 2);
  for (int i = 0; i < n; ++i) shuffled.row(i) = pts.row(perm[i]);
  SpectralEmbedding emb2 = spectral_embedding(build_similarity(shuffled, 3), 3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 2; ++c)
      REQUIRE(emb2.embedding(i, c) == Approx(emb.embedding(perm[i], c)).margin(1e-9));
}

TEST_CASE("lanczos path matches the dense path") {
  Rng rng(61);
  int n = 120;
  Eigen::MatrixXd pts = random_points(rng, n, 4);
  SimilarityGraph g = build_similarity(pts, 5);

  EmbeddingOptions dense_opts;
  SpectralEmbedding dense = spectral_embedding(g, 4, dense_opts);

  EmbeddingOptions lanczos_opts;
  lanczos_opts.dense_threshold = 10;  // force the iterative path
  SpectralEmbedding iter = spectral_embedding(g, 4, lanczos_opts);

  for (int c = 0; c < 4; ++c)
    REQUIRE(iter.eigenvalues(c) == Approx(dense.eigenvalues(c)).margin(1e-8));
  Eigen::VectorXd deg = g.row_sums();
  for (int c = 0; c < 4; ++c) {
    Eigen::VectorXd u = iter.eigenvectors.col(c);
    Eigen::VectorXd pu = g.apply(u).cwiseQuotient(deg);
    REQUIRE((pu - iter.eigenvalues(c) * u).lpNorm<Eigen::Infinity>() <=
            1e-8 * u.lpNorm<Eigen::Infinity>());
  }
}

TEST_CASE("lanczos resolves disconnected blocks") {
  Eigen::MatrixXd s = complete_blocks({20, 20, 20});
  SimilarityGraph g = similarity_from_dense(s);
  EmbeddingOptions opts;
  opts.dense_threshold = 10;
  SpectralEmbedding emb = spectral_embedding(g, 3, opts);
  REQUIRE(emb.eigenvalues(0) == Approx(1.0).margin(1e-8));
  REQUIRE(emb.eigenvalues(1) == Approx(1.0).margin(1e-8));
  REQUIRE(emb.eigenvalues(2) == Approx(1.0).margin(1e-8));
  // rows within a block coincide; across blocks they differ
  for (int b = 0; b < 3; ++b)
    for (int i = 1; i < 20; ++i)
      REQUIRE((emb.embedding.row(20 * b + i) - emb.embedding.row(20 * b)).norm() <
              1e-7);
  REQUIRE((emb.embedding.row(0) - emb.embedding.row(20)).norm() > 0.1);
  REQUIRE((emb.embedding.row(0) - emb.embedding.row(40)).norm() > 0.1);
  REQUIRE((emb.embedding.row(20) - emb.embedding.row(40)).norm() > 0.1);
}

TEST_CASE("full pipeline on well separated blobs") {
  Rng rng(73);
  int per = 20;
  Eigen::MatrixXd raw(2 * per, 2);
  for (int i = 0; i < per; ++i) {
    raw(i, 0) = rng.uniform(-0.5, 0.5);
    raw(i, 1) = rng.uniform(-0.5, 0.5);
    raw(per + i, 0) = 50.0 + rng.uniform(-0.5, 0.5);
    raw(per + i, 1) = 50.0 + rng.uniform(-0.5, 0.5);
  }
  FeatureMatrix f = standardize(raw, {"x", "y"});
  SpectralResult res = spectral_cluster(f, 2, PartitionerKind::hard, 0);
  for (int i = 1; i < per; ++i) REQUIRE(res.clusters.labels[i] == res.clusters.labels[0]);
  for (int i = 1; i < per; ++i)
    REQUIRE(res.clusters.labels[per + i] == res.clusters.labels[per]);
  REQUIRE(res.clusters.labels[0] != res.clusters.labels[per]);
}

TEST_CASE("K = 1 is rejected") {
  Rng rng(81);
  Eigen::MatrixXd raw = Eigen::MatrixXd::Random(10, 2);
  FeatureMatrix f = standardize(raw, {"x", "y"});
  try {
    spectral_cluster(f, 1, PartitionerKind::hard, 0);
    FAIL("expected error");
  } catch (const Error& e) {
    REQUIRE(e.code() == Errc::invalid_k);
  }
}

TEST_CASE("same seed reproduces labels bit for bit") {
  Rng rng(91);
  Eigen::MatrixXd raw = Eigen::MatrixXd::Random(24, 3);
  FeatureMatrix f = standardize(raw, {"x", "y", "z"});
  SpectralResult a = spectral_cluster(f, 3, PartitionerKind::hard, 42);
  SpectralResult b = spectral_cluster(f, 3, PartitionerKind::hard, 42);
  REQUIRE(a.clusters.labels == b.clusters.labels);
  REQUIRE(a.clusters.wcss == b.clusters.wcss);
}

TEST_CASE("hub rows with no separating signal are reported as degenerate") {
  // Star graph: eigenvalue 0 has multiplicity 2 with eigenvectors supported
  // on the leaves only, so the hub's embedding row has zero norm.
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(4, 4);
  for (int leaf = 1; leaf < 4; ++leaf) s(0, leaf) = s(leaf, 0) = 1.0;
  SpectralEmbedding emb = spectral_embedding(similarity_from_dense(s), 3);
  REQUIRE(emb.degenerate_rows == std::vector<int>{0});
  REQUIRE(emb.embedding.row(0).norm() == 0.0);
  for (int leaf = 1; leaf < 4; ++leaf)
    REQUIRE(emb.embedding.row(leaf).norm() == Approx(1.0).margin(1e-9));
}

TEST_CASE("lanczos failure is reported when restarts are exhausted") {
  Rng rng(97);
  Eigen::MatrixXd pts = Eigen::MatrixXd::Random(40, 2);
  SimilarityGraph g = build_similarity(pts, 3);
  EmbeddingOptions opts;
  opts.dense_threshold = 10;
  opts.max_restarts = 0;
  try {
    spectral_embedding(g, 3, opts);
    FAIL("expected error");
  } catch (const Error& e) {
    REQUIRE(e.code() == Errc::eigen_failure);
  }
}

TEST_CASE("isolated point is reported") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 3);
  s(0, 1) = s(1, 0) = 1.0;  // point 2 is isolated
  try {
    spectral_embedding(similarity_from_dense(s), 2);
    FAIL("expected error");
  } catch (const Error& e) {
    REQUIRE(e.code() == Errc::isolated_point);
  }
}
