#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include "fbtc/error.hpp"
#include "fbtc/features.hpp"
#include "fbtc/partition.hpp"
#include "fbtc/rng.hpp"
#include "fbtc/similarity.hpp"

namespace fbtc {

/// Output of the embedding stage: the K leading eigenvalues of the
/// row-normalized similarity matrix P, the corresponding (right)
/// eigenvectors, and the row-normalized matrix of eigenvectors 2..K that
/// the partitioner runs on.
struct SpectralEmbedding {
  Eigen::VectorXd eigenvalues;   // K values, descending; first is 1
  Eigen::MatrixXd eigenvectors;  // n x K eigenvectors of P, sign-fixed
  Eigen::MatrixXd embedding;     // n x (K-1), unit-norm rows
  Eigen::VectorXd degrees;       // row sums of S
  std::vector<int> degenerate_rows;  // rows with ~zero norm before normalization
};

struct EmbeddingOptions {
  /// Full symmetric decomposition up to this size; Lanczos iteration above.
  int dense_threshold = 2000;
  /// Residual tolerance for iterative eigenpairs.
  double tol = 1e-10;
  /// Cap on Lanczos restart attempts before giving up.
  int max_restarts = 32;
};

/// Row-normalizes S into the stochastic matrix P = D^{-1} S.
inline Eigen::MatrixXd row_normalize(const SimilarityGraph& s) {
  Eigen::VectorXd deg = s.row_sums();
  for (int i = 0; i < s.n; ++i)
    if (!(deg(i) > 0.0))
      raise(Errc::isolated_point, "row " + std::to_string(i) + " of S has zero sum");
  Eigen::MatrixXd p(s.n, s.n);
  if (s.uses_dense()) {
    p = s.dense;
  } else {
    p = Eigen::MatrixXd(s.sparse);
  }
  for (int i = 0; i < s.n; ++i) p.row(i) /= deg(i);
  return p;
}

namespace detail {

/// Deterministic deflated Lanczos with full reorthogonalization for the
/// leading eigenpairs of a symmetric operator.
///
/// A single-vector Krylov space contains one direction per distinct
/// eigenvalue, so degenerate eigenvalues are resolved by restarting with a
/// fresh start vector deflated against everything already converged. The
/// loop only stops once a restart finds nothing above the current k-th
/// value: at that point the orthogonal complement cannot hold a missed
/// copy of a top-k eigenvalue.
inline void lanczos_topk(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                         int n, int k, double tol, int max_restarts,
                         Eigen::VectorXd& out_vals, Eigen::MatrixXd& out_vecs) {
  const double gap = 1e-9;  // eigenvalue resolution of the stopping rule
  Eigen::MatrixXd found(n, 0);
  std::vector<double> found_vals;
  int steps = std::min(n, std::max(2 * k + 20, 60));
  bool complement_exhausted = false;

  auto kth_value = [&]() {
    std::vector<double> sorted = found_vals;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    return sorted[k - 1];
  };

  for (int attempt = 0; attempt < max_restarts; ++attempt) {
    if (static_cast<int>(found_vals.size()) >= n) break;
    Rng rng(derive_seed(0x5eedULL, attempt));
    Eigen::VectorXd q(n);
    for (int i = 0; i < n; ++i) q(i) = rng.uniform() - 0.5;
    if (found.cols() > 0) q -= found * (found.transpose() * q);
    double nq = q.norm();
    if (nq < 1e-12) continue;
    q /= nq;

    int m = std::min(n - static_cast<int>(found_vals.size()), steps);
    Eigen::MatrixXd basis(n, m);
    Eigen::VectorXd alpha(m), beta(m);
    int built = 0;
    for (int j = 0; j < m; ++j) {
      basis.col(j) = q;
      ++built;
      Eigen::VectorXd z = apply(q);
      alpha(j) = q.dot(z);
      z -= alpha(j) * q;
      if (j > 0) z -= beta(j - 1) * basis.col(j - 1);
      // full reorthogonalization (twice) against the basis and the deflated set
      z -= basis.leftCols(built) * (basis.leftCols(built).transpose() * z);
      if (found.cols() > 0) z -= found * (found.transpose() * z);
      z -= basis.leftCols(built) * (basis.leftCols(built).transpose() * z);
      if (found.cols() > 0) z -= found * (found.transpose() * z);
      beta(j) = z.norm();
      if (beta(j) < 1e-13) break;  // invariant subspace exhausted
      q = z / beta(j);
    }

    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(built, built);
    for (int j = 0; j < built; ++j) {
      tri(j, j) = alpha(j);
      if (j + 1 < built) {
        tri(j, j + 1) = beta(j);
        tri(j + 1, j) = beta(j);
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(tri);
    if (small.info() != Eigen::Success)
      raise(Errc::eigen_failure, "tridiagonal eigendecomposition failed");

    // Collect converged Ritz pairs, largest first.
    bool accepted_any = false;
    double largest_new = -std::numeric_limits<double>::infinity();
    for (int idx = built - 1; idx >= 0; --idx) {
      double theta = small.eigenvalues()(idx);
      Eigen::VectorXd v = basis.leftCols(built) * small.eigenvectors().col(idx);
      if (found.cols() > 0) v -= found * (found.transpose() * v);
      double nv = v.norm();
      if (nv < 1e-8) continue;
      v /= nv;
      double resid = (apply(v) - theta * v).lpNorm<Eigen::Infinity>();
      if (resid <= std::max(tol, 1e-10)) {
        found.conservativeResize(Eigen::NoChange, found.cols() + 1);
        found.col(found.cols() - 1) = v;
        found_vals.push_back(theta);
        accepted_any = true;
        largest_new = std::max(largest_new, theta);
      }
    }
    if (!accepted_any) {
      steps = std::min(n, steps * 2);
      continue;
    }
    if (static_cast<int>(found_vals.size()) >= k && largest_new <= kth_value() + gap) {
      // Nothing new above the k-th value: the top-k set is complete.
      complement_exhausted = true;
      break;
    }
  }

  if (static_cast<int>(found_vals.size()) < k ||
      (!complement_exhausted && static_cast<int>(found_vals.size()) < n))
    raise(Errc::eigen_failure, "Lanczos iteration did not converge to tolerance");

  // Order the pairs by eigenvalue, descending.
  std::vector<int> order(found_vals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return found_vals[a] > found_vals[b]; });
  out_vals.resize(k);
  out_vecs.resize(n, k);
  for (int i = 0; i < k; ++i) {
    out_vals(i) = found_vals[order[i]];
    out_vecs.col(i) = found.col(order[i]);
  }
}

inline bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) < b(i)) return true;
    if (a(i) > b(i)) return false;
  }
  return false;
}

}  // namespace detail

/// Leading eigenpairs of P = D^{-1} S and the row-normalized embedding.
///
/// The decomposition runs on the symmetric matrix D^{-1/2} S D^{-1/2},
/// whose spectrum coincides with P's, and eigenvectors are mapped back
/// through D^{-1/2}; this guarantees a real spectrum. Within the top
/// (near-degenerate) eigenvalue group the basis is rotated so that the
/// leading eigenvector is the constant vector, which P always owns at
/// eigenvalue 1; the remaining vectors then carry the cluster-separating
/// directions even when S has several connected components. Each
/// eigenvector's sign is fixed so its largest-magnitude entry is positive,
/// and ties between near-equal eigenvalues are ordered by lexicographic
/// comparison of the sign-fixed vectors.
inline SpectralEmbedding spectral_embedding(const SimilarityGraph& s, int k,
                                            const EmbeddingOptions& opts = {}) {
  const int n = s.n;
  if (k < 2 || k > n)
    raise(Errc::invalid_k, "spectral_embedding: K must be in [2, n], got " + std::to_string(k));

  SpectralEmbedding out;
  out.degrees = s.row_sums();
  for (int i = 0; i < n; ++i)
    if (!(out.degrees(i) > 0.0))
      raise(Errc::isolated_point, "point " + std::to_string(i) + " has no similar neighbours");

  Eigen::VectorXd dinv_sqrt = out.degrees.array().rsqrt();

  Eigen::VectorXd vals;
  Eigen::MatrixXd vecs;  // eigenvectors of the symmetrized matrix
  if (n <= opts.dense_threshold) {
    Eigen::MatrixXd m(n, n);
    if (s.uses_dense())
      m = s.dense;
    else
      m = Eigen::MatrixXd(s.sparse);
    m = dinv_sqrt.asDiagonal() * m * dinv_sqrt.asDiagonal();
    m = 0.5 * (m + m.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success)
      raise(Errc::eigen_failure, "symmetric eigendecomposition failed");
    vals.resize(k);
    vecs.resize(n, k);
    for (int i = 0; i < k; ++i) {
      vals(i) = solver.eigenvalues()(n - 1 - i);
      vecs.col(i) = solver.eigenvectors().col(n - 1 - i);
    }
  } else {
    auto apply = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      Eigen::VectorXd y = dinv_sqrt.asDiagonal() * x;
      y = s.apply(y);
      return dinv_sqrt.asDiagonal() * y;
    };
    detail::lanczos_topk(apply, n, k, opts.tol, opts.max_restarts, vals, vecs);
  }

  if (std::abs(vals(0) - 1.0) > 1e-8)
    raise(Errc::eigen_failure,
          "leading eigenvalue is not 1: " + std::to_string(vals(0)));

  // Rotate the top near-degenerate group so its first vector is the constant
  // direction w = D^{1/2} 1 (always an eigenvector at eigenvalue 1).
  int group = 1;
  while (group < k && std::abs(vals(group) - vals(0)) <= 1e-10) ++group;
  {
    Eigen::VectorXd w = out.degrees.array().sqrt();
    w /= w.norm();
    Eigen::MatrixXd vg = vecs.leftCols(group);
    Eigen::VectorXd proj = vg * (vg.transpose() * w);
    double nrm = proj.norm();
    if (nrm > 1e-8) {
      std::vector<Eigen::VectorXd> basis;
      basis.push_back(proj / nrm);
      for (int c = 0; c < group && static_cast<int>(basis.size()) < group; ++c) {
        Eigen::VectorXd r = vg.col(c);
        for (const auto& q : basis) r -= q * q.dot(r);
        for (const auto& q : basis) r -= q * q.dot(r);
        double rn = r.norm();
        if (rn > 1e-6) basis.push_back(r / rn);
      }
      if (static_cast<int>(basis.size()) == group)
        for (int c = 0; c < group; ++c) vecs.col(c) = basis[c];
    }
  }

  // Map back to eigenvectors of P and fix signs.
  Eigen::MatrixXd u(n, k);
  for (int c = 0; c < k; ++c) {
    u.col(c) = dinv_sqrt.asDiagonal() * vecs.col(c);
    int arg = 0;
    double mag = -1.0;
    for (int i = 0; i < n; ++i) {
      double a = std::abs(u(i, c));
      if (a > mag) {
        mag = a;
        arg = i;
      }
    }
    if (u(arg, c) < 0.0) u.col(c) = -u.col(c);
  }

  // Deterministic order inside near-equal eigenvalue runs (the pinned
  // constant vector stays first).
  {
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    int start = 1;
    while (start < k) {
      int stop = start;
      while (stop + 1 < k && std::abs(vals(stop + 1) - vals(start)) <= 1e-12) ++stop;
      std::stable_sort(order.begin() + start, order.begin() + stop + 1, [&](int a, int b) {
        return detail::lex_less(u.col(a), u.col(b));
      });
      start = stop + 1;
    }
    Eigen::VectorXd vals2(k);
    Eigen::MatrixXd u2(n, k);
    for (int c = 0; c < k; ++c) {
      vals2(c) = vals(order[c]);
      u2.col(c) = u.col(order[c]);
    }
    vals = vals2;
    u = u2;
  }

  out.eigenvalues = vals;
  out.eigenvectors = u;
  out.embedding.resize(n, k - 1);
  for (int i = 0; i < n; ++i) {
    Eigen::RowVectorXd row = u.row(i).tail(k - 1);
    double nrm = row.norm();
    if (nrm < 1e-12) {
      out.embedding.row(i).setZero();
      out.degenerate_rows.push_back(i);
    } else {
      out.embedding.row(i) = row / nrm;
    }
  }
  return out;
}

enum class PartitionerKind { hard, fuzzy };

struct SpectralOptions {
  std::optional<int> p_override;
  EmbeddingOptions embedding;
  int restarts = 50;
  int threads = 1;
};

/// Result of the composed pipeline plus its diagnostics.
struct SpectralResult {
  ClusterResult clusters;
  SpectralEmbedding embedding;
  int p = 0;
};

/// The full clustering pipeline on standardized features: choose p, build
/// the mutual-kNN similarity graph, embed, partition. Deterministic given
/// (features, K, kind, seed).
inline SpectralResult spectral_cluster(const FeatureMatrix& features, int k,
                                       PartitionerKind kind, std::uint64_t seed,
                                       const SpectralOptions& opts = {}) {
  const int n = static_cast<int>(features.n());
  if (k < 2) raise(Errc::invalid_k, "spectral_cluster: K must be at least 2");
  if (k >= n)
    raise(Errc::invalid_k, "spectral_cluster: K must be smaller than the number of points");

  SpectralResult result;
  result.p = opts.p_override ? *opts.p_override : choose_p(n, k);
  if (result.p < 1 || result.p >= n)
    raise(Errc::invalid_parameter, "p must satisfy 1 <= p < n");

  SimilarityGraph s = build_similarity(features.rows, result.p, opts.threads);
  result.embedding = spectral_embedding(s, k, opts.embedding);

  if (kind == PartitionerKind::hard) {
    KMeansOptions ko;
    ko.restarts = opts.restarts;
    ko.threads = opts.threads;
    result.clusters = kmeans(result.embedding.embedding, k, seed, ko);
  } else {
    FuzzyOptions fo;
    fo.restarts = opts.restarts;
    fo.threads = opts.threads;
    result.clusters = fuzzy_kmeans(result.embedding.embedding, k, seed, fo);
  }
  return result;
}

}  // namespace fbtc
