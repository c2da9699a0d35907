#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "fbtc/error.hpp"

namespace fbtc {

namespace detail {

/// Maximum-sum assignment on a rectangular score matrix (rows to columns,
/// one-to-one). Returns for each row the matched column or -1. Hungarian
/// algorithm with potentials on the zero-padded square matrix, O(n^3).
inline std::vector<int> max_assignment(const std::vector<std::vector<double>>& score) {
  const int rows = static_cast<int>(score.size());
  const int cols = rows ? static_cast<int>(score[0].size()) : 0;
  const int n = std::max(rows, cols);
  if (n == 0) return {};

  // Convert to a minimization problem on an n x n matrix.
  double top = 0.0;
  for (const auto& row : score)
    for (double v : row) top = std::max(top, v);
  std::vector<std::vector<double>> cost(n + 1, std::vector<double>(n + 1, top));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) cost[i + 1][j + 1] = top - score[i][j];

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      int i0 = match[j0], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[i0][j] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
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
      int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> out(rows, -1);
  for (int j = 1; j <= n; ++j) {
    int i = match[j];
    if (i >= 1 && i <= rows && j <= cols) out[i - 1] = j - 1;
  }
  return out;
}

}  // namespace detail

/// Agreement between a found clustering and reference labels.
struct EvaluationReport {
  std::vector<int> reference_label_order;  // distinct reference ids, ascending
  std::vector<int> found_label_order;      // distinct found ids, ascending
  std::vector<std::vector<long long>> contingency;  // rows = reference
  std::vector<long long> reference_sizes;
  std::vector<long long> found_sizes;
  std::vector<int> matching;  // per reference row, matched found column or -1
  double accuracy = 0.0;      // best one-to-one matching accuracy
  double ari = 0.0;           // adjusted Rand index
  long long n = 0;
};

/// Cross-tabulates the two labelings, computes the best-matching accuracy
/// via an optimal one-to-one assignment over the contingency table, and the
/// adjusted Rand index. Invariant under any relabeling of the found
/// clusters.
inline EvaluationReport evaluate(const std::vector<int>& found,
                                 const std::vector<int>& reference) {
  if (found.size() != reference.size())
    raise(Errc::length_mismatch, "evaluate: label vectors differ in length");
  if (found.empty()) raise(Errc::invalid_parameter, "evaluate: empty labelings");

  EvaluationReport rep;
  rep.n = static_cast<long long>(found.size());

  std::map<int, int> ref_ix, found_ix;
  for (int r : reference) ref_ix.emplace(r, 0);
  for (int f : found) found_ix.emplace(f, 0);
  int idx = 0;
  for (auto& [label, i] : ref_ix) {
    i = idx++;
    rep.reference_label_order.push_back(label);
  }
  idx = 0;
  for (auto& [label, i] : found_ix) {
    i = idx++;
    rep.found_label_order.push_back(label);
  }
  const int kr = static_cast<int>(ref_ix.size());
  const int kf = static_cast<int>(found_ix.size());

  rep.contingency.assign(kr, std::vector<long long>(kf, 0));
  for (std::size_t i = 0; i < found.size(); ++i)
    ++rep.contingency[ref_ix[reference[i]]][found_ix[found[i]]];

  rep.reference_sizes.assign(kr, 0);
  rep.found_sizes.assign(kf, 0);
  for (int i = 0; i < kr; ++i)
    for (int j = 0; j < kf; ++j) {
      rep.reference_sizes[i] += rep.contingency[i][j];
      rep.found_sizes[j] += rep.contingency[i][j];
    }

  // Best-matching accuracy.
  std::vector<std::vector<double>> score(kr, std::vector<double>(kf));
  for (int i = 0; i < kr; ++i)
    for (int j = 0; j < kf; ++j) score[i][j] = static_cast<double>(rep.contingency[i][j]);
  rep.matching = detail::max_assignment(score);
  long long matched = 0;
  for (int i = 0; i < kr; ++i)
    if (rep.matching[i] >= 0) matched += rep.contingency[i][rep.matching[i]];
  rep.accuracy = static_cast<double>(matched) / static_cast<double>(rep.n);

  // Adjusted Rand index by pair counting.
  auto comb2 = [](long long m) { return 0.5 * static_cast<double>(m) * (m - 1); };
  double sum_cells = 0.0, sum_ref = 0.0, sum_found = 0.0;
  for (int i = 0; i < kr; ++i)
    for (int j = 0; j < kf; ++j) sum_cells += comb2(rep.contingency[i][j]);
  for (long long a : rep.reference_sizes) sum_ref += comb2(a);
  for (long long b : rep.found_sizes) sum_found += comb2(b);
  double pairs = comb2(rep.n);
  double expected = sum_ref * sum_found / pairs;
  double max_index = 0.5 * (sum_ref + sum_found);
  if (max_index == expected) {
    // Both labelings are single clusters (or all singletons): agreement is
    // total by convention.
    rep.ari = 1.0;
  } else {
    rep.ari = (sum_cells - expected) / (max_index - expected);
  }
  return rep;
}

}  // namespace fbtc
