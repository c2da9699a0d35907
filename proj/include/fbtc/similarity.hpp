#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cstdint>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "fbtc/error.hpp"
#include "fbtc/parallel.hpp"

namespace fbtc {

/// Neighbour count for the mutual-kNN graph: about half the typical cluster
/// size n/K, kept within [4, 8] unless the typical cluster is smaller than
/// 4.5 points, in which case p drops to 3 or 2.
inline int choose_p(int n, int K) {
  if (n < 2) raise(Errc::invalid_parameter, "choose_p: need at least 2 points");
  if (K < 1 || K >= n)
    raise(Errc::invalid_k, "choose_p: K must satisfy 1 <= K < n, got K=" + std::to_string(K) +
                               " with n=" + std::to_string(n));
  double ratio = static_cast<double>(n) / K;
  int p;
  if (ratio < 3.5)
    p = 2;
  else if (ratio < 4.5)
    p = 3;
  else
    p = std::max(4, std::min(8, n / (2 * K)));
  return std::min(p, n - 1);
}

/// Indices of the p nearest neighbours of every point (self excluded),
/// Euclidean metric, distance ties broken by the lower index. Each set is
/// sorted by (distance, index).
inline std::vector<std::vector<int>> knn_sets(const Eigen::MatrixXd& points, int p,
                                              int threads = 1) {
  const Eigen::Index n = points.rows();
  if (p < 1 || p >= n)
    raise(Errc::invalid_parameter,
          "knn_sets: p must satisfy 1 <= p < n, got p=" + std::to_string(p));
  std::vector<std::vector<int>> sets(n);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    std::vector<std::pair<double, int>> cand;
    cand.reserve(n - 1);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (static_cast<Eigen::Index>(i) == j) continue;
      double d2 = (points.row(i) - points.row(j)).squaredNorm();
      cand.emplace_back(d2, static_cast<int>(j));
    }
    std::partial_sort(cand.begin(), cand.begin() + p, cand.end());
    sets[i].resize(p);
    for (int k = 0; k < p; ++k) sets[i][k] = cand[k].second;
  });
  return sets;
}

/// Symmetric similarity matrix with entries in {0, 1/2, 1}: 1 for mutual
/// nearest-neighbour pairs, 1/2 for one-directional ones, 0 otherwise, and
/// a zero diagonal. Dense storage up to kDenseLimit points, sparse beyond;
/// the behavioural contract is identical.
struct SimilarityGraph {
  static constexpr int kDenseLimit = 5000;

  int n = 0;
  int p = 0;  // neighbour count used to build the graph (0 if constructed directly)
  Eigen::MatrixXd dense;
  Eigen::SparseMatrix<double> sparse;

  bool uses_dense() const { return dense.size() > 0; }

  double coeff(int i, int j) const {
    return uses_dense() ? dense(i, j) : sparse.coeff(i, j);
  }

  Eigen::VectorXd row_sums() const {
    if (uses_dense()) return dense.rowwise().sum();
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < sparse.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(sparse, k); it; ++it)
        sums(it.row()) += it.value();
    return sums;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    return uses_dense() ? Eigen::VectorXd(dense * x) : Eigen::VectorXd(sparse * x);
  }
};

inline SimilarityGraph build_similarity(const Eigen::MatrixXd& points, int p,
                                        int threads = 1,
                                        int dense_limit = SimilarityGraph::kDenseLimit) {
  const int n = static_cast<int>(points.rows());
  auto sets = knn_sets(points, p, threads);

  SimilarityGraph g;
  g.n = n;
  g.p = p;
  if (n <= dense_limit) {
    std::vector<std::uint8_t> out_edge(static_cast<std::size_t>(n) * n, 0);
    for (int i = 0; i < n; ++i)
      for (int j : sets[i]) out_edge[static_cast<std::size_t>(i) * n + j] = 1;
    g.dense = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        bool ij = out_edge[static_cast<std::size_t>(i) * n + j];
        bool ji = out_edge[static_cast<std::size_t>(j) * n + i];
        double v = (ij && ji) ? 1.0 : ((ij || ji) ? 0.5 : 0.0);
        g.dense(i, j) = v;
        g.dense(j, i) = v;
      }
  } else {
    std::unordered_map<std::uint64_t, int> edges;
    edges.reserve(static_cast<std::size_t>(n) * p);
    auto key = [n](int a, int b) {
      return static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(n) + b;
    };
    for (int i = 0; i < n; ++i)
      for (int j : sets[i]) {
        if (i < j)
          edges[key(i, j)] |= 1;
        else
          edges[key(j, i)] |= 2;
      }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(edges.size() * 2);
    for (const auto& [k, dir] : edges) {
      int i = static_cast<int>(k / n);
      int j = static_cast<int>(k % n);
      double v = (dir == 3) ? 1.0 : 0.5;
      triplets.emplace_back(i, j, v);
      triplets.emplace_back(j, i, v);
    }
    g.sparse.resize(n, n);
    g.sparse.setFromTriplets(triplets.begin(), triplets.end());
  }
  return g;
}

/// Wraps an explicitly given matrix as a SimilarityGraph after checking the
/// contract: symmetric, zero diagonal, entries in {0, 1/2, 1}.
inline SimilarityGraph similarity_from_dense(const Eigen::MatrixXd& s, int p = 0) {
  const int n = static_cast<int>(s.rows());
  if (s.cols() != n) raise(Errc::invalid_parameter, "similarity matrix must be square");
  for (int i = 0; i < n; ++i) {
    if (s(i, i) != 0.0) raise(Errc::invalid_parameter, "similarity diagonal must be zero");
    for (int j = 0; j < n; ++j) {
      double v = s(i, j);
      if (v != 0.0 && v != 0.5 && v != 1.0)
        raise(Errc::invalid_parameter, "similarity entries must be 0, 0.5 or 1");
      if (v != s(j, i)) raise(Errc::invalid_parameter, "similarity matrix must be symmetric");
    }
  }
  SimilarityGraph g;
  g.n = n;
  g.p = p;
  g.dense = s;
  return g;
}

/// Writes the nonzero entries as a coordinate list, one "i j value" line
/// per directed entry, with values printed exactly as "0.5" or "1".
inline void dump_similarity_coo(const SimilarityGraph& g, std::ostream& os) {
  auto print = [&os](int i, int j, double v) {
    os << i << ' ' << j << ' ' << (v == 1.0 ? "1" : (v == 0.5 ? "0.5" : "0")) << '\n';
  };
  if (g.uses_dense()) {
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j)
        if (g.dense(i, j) != 0.0) print(i, j, g.dense(i, j));
  } else {
    // column-major storage; emit in row-major order for readability
    std::vector<std::tuple<int, int, double>> entries;
    for (int k = 0; k < g.sparse.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(g.sparse, k); it; ++it)
        entries.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    std::sort(entries.begin(), entries.end());
    for (const auto& [i, j, v] : entries) print(i, j, v);
  }
}

}  // namespace fbtc
