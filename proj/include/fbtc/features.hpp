#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "fbtc/error.hpp"

namespace fbtc {

/// Standardized per-trajectory measures: n rows, one retained column per
/// non-constant measure, z-scored with the population (denominator n)
/// standard deviation.
struct FeatureMatrix {
  Eigen::MatrixXd rows;
  std::vector<std::string> column_ids;
  std::vector<double> column_means;  // raw stats of the retained columns
  std::vector<double> column_sds;
  std::vector<std::string> dropped_columns;  // constant columns, removed

  Eigen::Index n() const { return rows.rows(); }
  Eigen::Index dim() const { return rows.cols(); }
};

/// Per-column z-scoring. Columns whose population sd falls below 1e-12 are
/// dropped and recorded; a zero-variance column carries no information and
/// would only distort nearest-neighbour distances.
inline FeatureMatrix standardize(const Eigen::MatrixXd& raw,
                                 const std::vector<std::string>& column_ids) {
  const Eigen::Index n = raw.rows();
  const Eigen::Index d = raw.cols();
  if (n < 2) raise(Errc::invalid_parameter, "standardize: need at least 2 rows");
  if (static_cast<Eigen::Index>(column_ids.size()) != d)
    raise(Errc::length_mismatch, "standardize: column id count does not match matrix");
  if (!raw.allFinite())
    raise(Errc::non_finite_value, "standardize: non-finite feature value");

  FeatureMatrix out;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index c = 0; c < d; ++c) {
    double mean = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) mean += raw(i, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double dev = raw(i, c) - mean;
      var += dev * dev;
    }
    var /= static_cast<double>(n);
    double sd = std::sqrt(var);
    if (sd < 1e-12) {
      out.dropped_columns.push_back(column_ids[c]);
      continue;
    }
    keep.push_back(c);
    out.column_ids.push_back(column_ids[c]);
    out.column_means.push_back(mean);
    out.column_sds.push_back(sd);
  }
  if (keep.empty())
    raise(Errc::all_columns_constant, "standardize: every column is constant");

  out.rows.resize(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    Eigen::Index c = keep[k];
    for (Eigen::Index i = 0; i < n; ++i)
      out.rows(i, static_cast<Eigen::Index>(k)) =
          (raw(i, c) - out.column_means[k]) / out.column_sds[k];
  }
  return out;
}

/// The clamping band of each column: [mean - limit*sd, mean + limit*sd],
/// with mean and sd taken from the raw column. Recorded so that applying
/// the same bounds again is idempotent.
struct WinsorizeBounds {
  std::vector<double> lo;
  std::vector<double> hi;
};

inline Eigen::MatrixXd apply_winsorize_bounds(const Eigen::MatrixXd& raw,
                                              const WinsorizeBounds& bounds) {
  if (static_cast<Eigen::Index>(bounds.lo.size()) != raw.cols() ||
      static_cast<Eigen::Index>(bounds.hi.size()) != raw.cols())
    raise(Errc::length_mismatch, "winsorize bounds do not match matrix width");
  Eigen::MatrixXd out = raw;
  for (Eigen::Index c = 0; c < raw.cols(); ++c)
    for (Eigen::Index i = 0; i < raw.rows(); ++i)
      out(i, c) = std::clamp(raw(i, c), bounds.lo[c], bounds.hi[c]);
  return out;
}

/// Caps every entry at `limit_sds` population standard deviations from its
/// column mean. The bounds are computed once from the raw columns (and can
/// be captured through `out_bounds`), so re-applying recorded bounds does
/// not move any value twice.
inline Eigen::MatrixXd winsorize(const Eigen::MatrixXd& raw, double limit_sds = 3.0,
                                 WinsorizeBounds* out_bounds = nullptr) {
  const Eigen::Index n = raw.rows();
  if (n < 2) raise(Errc::invalid_parameter, "winsorize: need at least 2 rows");
  if (limit_sds < 0) raise(Errc::invalid_parameter, "winsorize: negative sd limit");
  WinsorizeBounds bounds;
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    double mean = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) mean += raw(i, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double dev = raw(i, c) - mean;
      var += dev * dev;
    }
    var /= static_cast<double>(n);
    double sd = std::sqrt(var);
    bounds.lo.push_back(mean - limit_sds * sd);
    bounds.hi.push_back(mean + limit_sds * sd);
  }
  Eigen::MatrixXd out = apply_winsorize_bounds(raw, bounds);
  if (out_bounds) *out_bounds = std::move(bounds);
  return out;
}

inline int default_probe_k(Eigen::Index n) {
  int k = static_cast<int>(std::min<Eigen::Index>(n / 3, 20));
  return std::clamp(k, 2, static_cast<int>(n) - 2);
}

}  // namespace fbtc

#include "fbtc/partition.hpp"

namespace fbtc {

/// Flags rows likely to be outliers by probing with K-means at a large K:
/// outliers tend to end up alone in their cluster. Only reports indices;
/// whether to remove them is the caller's decision. k_probe is capped at
/// n - 2 so the probe cannot trivially flag everything.
inline std::vector<Eigen::Index> flag_outliers(const FeatureMatrix& features, int k_probe,
                                               std::uint64_t seed = 0) {
  const Eigen::Index n = features.n();
  if (n < 4) return {};
  k_probe = std::clamp(k_probe, 1, static_cast<int>(n) - 2);
  if (k_probe < 2) return {};
  KMeansOptions opts;
  opts.restarts = 10;
  ClusterResult probe = kmeans(features.rows, k_probe, seed, opts);
  std::vector<int> counts(k_probe + 1, 0);
  for (int label : probe.labels) ++counts[label];
  std::vector<Eigen::Index> flagged;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (counts[probe.labels[i]] != 1) continue;
    // A singleton made of a duplicated point is an artifact of cluster
    // repair, not an outlier.
    double nearest = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) nearest = std::min(nearest, (features.rows.row(i) - features.rows.row(j)).squaredNorm());
    if (nearest > 1e-12) flagged.push_back(i);
  }
  return flagged;
}

}  // namespace fbtc
