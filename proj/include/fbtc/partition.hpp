#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "fbtc/error.hpp"
#include "fbtc/parallel.hpp"
#include "fbtc/rng.hpp"

namespace fbtc {

/// Result of a hard or fuzzy partitioning run.
struct ClusterResult {
  std::vector<int> labels;  // cluster index per point, 1..K
  std::optional<Eigen::MatrixXd> weights;  // n x K membership degrees (fuzzy only)
  double wcss = 0.0;        // objective of the selected restart (fWCSS when fuzzy)
  int restarts_run = 0;
  int iterations = 0;       // iterations of the selected restart
  std::uint64_t seed = 0;
  bool converged = true;            // false if the fuzzy loop hit its iteration cap
  std::vector<int> low_confidence;  // fuzzy: points whose top-2 margin is < 0.1
};

/// Called once per iteration of each restart with (restart, iteration,
/// objective). Setting an observer forces single-threaded execution.
using IterationObserver = std::function<void(int, int, double)>;

struct KMeansOptions {
  int restarts = 50;
  int max_iter = 500;
  int threads = 1;
  IterationObserver observer;
};

namespace detail {

inline Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& pts, int k, Rng& rng) {
  const Eigen::Index n = pts.rows();
  Eigen::MatrixXd centers(k, pts.cols());
  Eigen::Index first = static_cast<Eigen::Index>(rng.uniform_int(n));
  centers.row(0) = pts.row(first);
  Eigen::VectorXd d2 = (pts.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) total += d2(i);
    Eigen::Index pick;
    if (total <= 0.0) {
      pick = static_cast<Eigen::Index>(rng.uniform_int(n));
    } else {
      double u = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (u < acc) {
          pick = i;
          break;
        }
      }
    }
    centers.row(c) = pts.row(pick);
    Eigen::VectorXd cand = (pts.rowwise() - centers.row(c)).rowwise().squaredNorm();
    d2 = d2.cwiseMin(cand);
  }
  return centers;
}

struct LloydOutcome {
  std::vector<int> assign;  // 0-based
  Eigen::MatrixXd centers;
  double wcss = 0.0;
  int iterations = 0;
};

inline LloydOutcome lloyd(const Eigen::MatrixXd& pts, int k, Rng& rng,
                          const KMeansOptions& opts, int restart_index) {
  const Eigen::Index n = pts.rows();
  LloydOutcome out;
  out.centers = kmeanspp_init(pts, k, rng);
  out.assign.assign(n, -1);
  double prev_wcss = std::numeric_limits<double>::infinity();

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    bool changed = false;
    // Assign to the nearest center; ties go to the lower index.
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (pts.row(i) - out.centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        double d = (pts.row(i) - out.centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (out.assign[i] != best) {
        out.assign[i] = best;
        changed = true;
      }
    }
    // Repair empty clusters: move each empty center onto the point farthest
    // from its own center and pin that point there. Clusters are never left
    // empty and the objective cannot increase.
    std::vector<int> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) ++counts[out.assign[i]];
    std::vector<bool> pinned(n, false);
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (pinned[i] || counts[out.assign[i]] < 2) continue;
        double d = (pts.row(i) - out.centers.row(out.assign[i])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) continue;  // only possible when k > n
      --counts[out.assign[far]];
      out.assign[far] = c;
      ++counts[c];
      out.centers.row(c) = pts.row(far);
      pinned[far] = true;
      changed = true;
    }
    // Means update.
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, pts.cols());
    for (Eigen::Index i = 0; i < n; ++i) sums.row(out.assign[i]) += pts.row(i);
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0) out.centers.row(c) = sums.row(c) / counts[c];

    double wcss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      wcss += (pts.row(i) - out.centers.row(out.assign[i])).squaredNorm();
    out.iterations = iter;
    if (opts.observer) opts.observer(restart_index, iter, wcss);
    if (wcss > prev_wcss + 1e-9 * std::max(1.0, prev_wcss))
      throw std::logic_error("k-means objective increased within a restart");
    prev_wcss = wcss;
    out.wcss = wcss;
    if (!changed) break;
  }
  return out;
}

}  // namespace detail

/// Lloyd-style K-means with distance-weighted (k-means++) seeding and
/// multiple restarts; the restart with the smallest within-cluster sum of
/// squares wins. Restart r draws from the substream derive_seed(seed, r),
/// so serial and parallel execution select the same result.
inline ClusterResult kmeans(const Eigen::MatrixXd& pts, int k, std::uint64_t seed,
                            const KMeansOptions& opts = {}) {
  const Eigen::Index n = pts.rows();
  if (n < 1) raise(Errc::invalid_parameter, "kmeans: empty input");
  if (k < 1 || k > n)
    raise(Errc::invalid_k, "kmeans: K must be in [1, n], got " + std::to_string(k));

  int restarts = std::max(1, opts.restarts);
  int threads = opts.observer ? 1 : opts.threads;
  std::vector<detail::LloydOutcome> outcomes(restarts);
  parallel_for(restarts, threads, [&](std::size_t r) {
    Rng rng(derive_seed(seed, r));
    outcomes[r] = detail::lloyd(pts, k, rng, opts, static_cast<int>(r));
  });

  int best = 0;
  for (int r = 1; r < restarts; ++r)
    if (outcomes[r].wcss < outcomes[best].wcss) best = r;

  ClusterResult result;
  result.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) result.labels[i] = outcomes[best].assign[i] + 1;
  result.wcss = outcomes[best].wcss;
  result.restarts_run = restarts;
  result.iterations = outcomes[best].iterations;
  result.seed = seed;
  return result;
}

/// Membership row of a point given fixed centroids: normalized inverse
/// squared distances. A point within 1e-12 of one or more centroids splits
/// full membership equally among the coinciding ones.
inline Eigen::VectorXd fuzzy_membership(const Eigen::RowVectorXd& x,
                                        const Eigen::MatrixXd& centers) {
  const int k = static_cast<int>(centers.rows());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd d2(k);
  int coincident = 0;
  for (int c = 0; c < k; ++c) {
    d2(c) = (x - centers.row(c)).squaredNorm();
    if (d2(c) < 1e-24) ++coincident;
  }
  if (coincident > 0) {
    for (int c = 0; c < k; ++c)
      if (d2(c) < 1e-24) w(c) = 1.0 / coincident;
    return w;
  }
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    w(c) = 1.0 / d2(c);
    total += w(c);
  }
  if (total <= 0.0) return Eigen::VectorXd::Constant(k, 1.0 / k);  // all distances overflowed
  return w / total;
}

/// 1-based argmax of a membership row; ties go to the lower cluster.
inline int argmax_label(const Eigen::VectorXd& weights) {
  int best = 0;
  for (int c = 1; c < weights.size(); ++c)
    if (weights(c) > weights(best)) best = c;
  return best + 1;
}

struct FuzzyOptions {
  int restarts = 50;
  int max_iter = 300;
  double tol = 1e-8;  // max centroid movement for convergence
  int threads = 1;
  IterationObserver observer;
};

namespace detail {

struct FuzzyOutcome {
  Eigen::MatrixXd weights;
  Eigen::MatrixXd centers;
  double fwcss = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline FuzzyOutcome fuzzy_run(const Eigen::MatrixXd& pts, int k, Rng& rng,
                              const FuzzyOptions& opts, int restart_index) {
  const Eigen::Index n = pts.rows();
  FuzzyOutcome out;
  out.centers = kmeanspp_init(pts, k, rng);
  out.weights.resize(n, k);

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i)
      out.weights.row(i) = fuzzy_membership(pts.row(i), out.centers).transpose();

    Eigen::MatrixXd next = out.centers;
    for (int c = 0; c < k; ++c) {
      Eigen::RowVectorXd num = Eigen::RowVectorXd::Zero(pts.cols());
      double den = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        double w2 = out.weights(i, c) * out.weights(i, c);
        num += w2 * pts.row(i);
        den += w2;
      }
      if (den > 0.0) next.row(c) = num / den;
    }
    double move = 0.0;
    for (int c = 0; c < k; ++c)
      move = std::max(move, (next.row(c) - out.centers.row(c)).norm());
    out.centers = next;

    double fwcss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (int c = 0; c < k; ++c) {
        double w2 = out.weights(i, c) * out.weights(i, c);
        fwcss += w2 * (pts.row(i) - out.centers.row(c)).squaredNorm();
      }
    out.fwcss = fwcss;
    out.iterations = iter;
    if (opts.observer) opts.observer(restart_index, iter, fwcss);
    if (move < opts.tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace detail

/// Fuzzy K-means (fuzzifier 2): memberships are normalized inverse squared
/// distances, centroids are membership-squared weighted means. Restarts are
/// selected by the smallest fuzzy within-cluster sum of squares. Points
/// whose two largest memberships are within 0.1 of each other are listed in
/// low_confidence.
inline ClusterResult fuzzy_kmeans(const Eigen::MatrixXd& pts, int k, std::uint64_t seed,
                                  const FuzzyOptions& opts = {}) {
  const Eigen::Index n = pts.rows();
  if (n < 1) raise(Errc::invalid_parameter, "fuzzy_kmeans: empty input");
  if (k < 1 || k > n)
    raise(Errc::invalid_k, "fuzzy_kmeans: K must be in [1, n], got " + std::to_string(k));

  int restarts = std::max(1, opts.restarts);
  int threads = opts.observer ? 1 : opts.threads;
  std::vector<detail::FuzzyOutcome> outcomes(restarts);
  parallel_for(restarts, threads, [&](std::size_t r) {
    Rng rng(derive_seed(seed, r));
    outcomes[r] = detail::fuzzy_run(pts, k, rng, opts, static_cast<int>(r));
  });

  int best = 0;
  for (int r = 1; r < restarts; ++r)
    if (outcomes[r].fwcss < outcomes[best].fwcss) best = r;
  const auto& win = outcomes[best];

  ClusterResult result;
  result.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd row = win.weights.row(i).transpose();
    result.labels[i] = argmax_label(row);
    double top = row.maxCoeff();
    double second = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != result.labels[i] - 1) second = std::max(second, row(c));
    if (k > 1 && top - second < 0.1) result.low_confidence.push_back(static_cast<int>(i));
  }
  result.weights = win.weights;
  result.wcss = win.fwcss;
  result.restarts_run = restarts;
  result.iterations = win.iterations;
  result.seed = seed;
  result.converged = win.converged;
  return result;
}

}  // namespace fbtc
