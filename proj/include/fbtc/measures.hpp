#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fbtc/error.hpp"
#include "fbtc/trajectory.hpp"

namespace fbtc {

/// The twenty trajectory measures, in wire order. The stable I/O ids are
/// "m1".."m20" (see measure_id / measure_index).
enum Measure : int {
  kMax = 0,                  // m1  largest value
  kMin,                      // m2  smallest value
  kRange,                    // m3  m1 - m2
  kMean,                     // m4  trapezoid mean
  kStdDev,                   // m5  trapezoid standard deviation
  kSlope,                    // m6  slope of the best affine approximation
  kIntercept,                // m7  intercept of the best affine approximation
  kAffineR2,                 // m8  share of variance explained by the affine fit
  kCrossingRate,             // m9  crossings of the affine fit per unit time
  kNetVariation,             // m10 (y_N - y_1) / (t_N - t_1)
  kVariationContrast,        // m11 late-vs-early variation around a midpoint
  kTotalVariation,           // m12 total variation per unit time
  kSpikiness,                // m13 net time above vs below the mean
  kDerivMax,                 // m14 max of D_j
  kDerivMin,                 // m15 min of D_j
  kDerivStdDev,              // m16 trapezoid sd of D_j
  kDerivNetVariation,        // m17 (D_N - D_1) / (t_N - t_1)
  kSecondDerivMax,           // m18 max of D2_j
  kSecondDerivMin,           // m19 min of D2_j
  kSecondDerivStdDev,        // m20 trapezoid sd of D2_j
};

inline constexpr int kMeasureCount = 20;

inline std::string measure_id(int index) { return "m" + std::to_string(index + 1); }

inline int measure_index(std::string_view id) {
  if (id.size() >= 2 && (id[0] == 'm' || id[0] == 'M')) {
    int v = 0;
    for (std::size_t i = 1; i < id.size(); ++i) {
      if (id[i] < '0' || id[i] > '9') { v = -1; break; }
      v = v * 10 + (id[i] - '0');
    }
    if (v >= 1 && v <= kMeasureCount) return v - 1;
  }
  raise(Errc::parse_error, "unknown measure id '" + std::string(id) + "'");
}

/// Homogeneity exponents: m[a*y, b*t] = a^value_exp * b^time_exp * m[y, t]
/// for positive a, b (midpoints, if any, scaled along with t).
struct ScalingExponents {
  double value_exp;
  double time_exp;
};

inline ScalingExponents measure_scaling(int index) {
  switch (index) {
    case kMax: case kMin: case kRange: case kMean: case kStdDev:
    case kIntercept: case kVariationContrast:
      return {1.0, 0.0};
    case kSlope: case kNetVariation: case kTotalVariation:
    case kDerivMax: case kDerivMin: case kDerivStdDev:
      return {1.0, -1.0};
    case kAffineR2: case kSpikiness:
      return {0.0, 0.0};
    case kCrossingRate:
      return {0.0, -1.0};
    case kDerivNetVariation:
    case kSecondDerivMax: case kSecondDerivMin: case kSecondDerivStdDev:
      return {1.0, -2.0};
  }
  raise(Errc::invalid_parameter, "measure index out of range");
}

/// Which measures to compute. Defaults to all twenty.
struct MeasureSelection {
  std::array<bool, kMeasureCount> mask{};

  static MeasureSelection all() {
    MeasureSelection s;
    s.mask.fill(true);
    return s;
  }

  /// All measures except the ones sensitive to vertical position
  /// (max, min, mean) and horizontal position (intercept).
  static MeasureSelection shape_only() {
    MeasureSelection s = all();
    s.mask[kMax] = s.mask[kMin] = s.mask[kMean] = s.mask[kIntercept] = false;
    return s;
  }

  static MeasureSelection from_ids(const std::vector<std::string>& ids) {
    MeasureSelection s;
    for (const auto& id : ids) s.mask[measure_index(id)] = true;
    return s;
  }

  bool empty() const {
    for (bool b : mask)
      if (b) return false;
    return true;
  }

  std::vector<int> indices() const {
    std::vector<int> out;
    for (int i = 0; i < kMeasureCount; ++i)
      if (mask[i]) out.push_back(i);
    return out;
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (int i : indices()) out.push_back(measure_id(i));
    return out;
  }
};

/// Minimizer of the trapezoid-discretized L2 distance between the
/// trajectory and an affine function.
struct AffineFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<double> fitted;     // intercept + slope * t_j
  std::vector<double> residuals;  // y_j - fitted_j
};

/// Closed-form solution of the discretized least-squares problem. Built
/// from interval midpoint averages, so it is the exact minimizer of the
/// trapezoid objective, not of the ordinary pointwise least squares (the
/// two agree asymptotically on equidistant grids).
inline AffineFit affine_fit(const Trajectory& traj) {
  const auto& t = traj.times;
  const auto& y = traj.values;
  const std::size_t n = t.size();
  const double span = traj.duration();

  double sum_t = 0.0, sum_y = 0.0, sum_tt = 0.0, sum_ty = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    double dt = t[j + 1] - t[j];
    sum_t += 0.5 * (t[j] + t[j + 1]) * dt;
    sum_y += 0.5 * (y[j] + y[j + 1]) * dt;
    sum_tt += 0.5 * (t[j] * t[j] + t[j + 1] * t[j + 1]) * dt;
    sum_ty += 0.5 * (t[j] * y[j] + t[j + 1] * y[j + 1]) * dt;
  }

  double denom = sum_tt - sum_t * sum_t / span;
  // Positive for any strictly increasing grid with n >= 3; guarded anyway.
  if (!(denom > 1e-14 * std::max(1.0, std::abs(sum_tt))))
    raise(Errc::degenerate_time_spread,
          "trajectory '" + traj.id + "': time spread too small for an affine fit");

  AffineFit fit;
  fit.slope = (sum_ty - sum_t * sum_y / span) / denom;
  fit.intercept = (sum_y - fit.slope * sum_t) / span;
  fit.fitted.resize(n);
  fit.residuals.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    fit.fitted[j] = fit.intercept + fit.slope * t[j];
    fit.residuals[j] = y[j] - fit.fitted[j];
  }
  return fit;
}

/// Value of the trapezoid-discretized least-squares objective at given
/// coefficients. Exposed for diagnostics and tests.
inline double affine_objective(const Trajectory& traj, double intercept, double slope) {
  double acc = 0.0;
  const auto& t = traj.times;
  const auto& y = traj.values;
  for (std::size_t j = 0; j + 1 < t.size(); ++j) {
    double a = intercept + slope * t[j] - y[j];
    double b = intercept + slope * t[j + 1] - y[j + 1];
    acc += 0.5 * (a * a + b * b) * (t[j + 1] - t[j]);
  }
  return acc;
}

struct BasicMeasures {
  double max_value;  // m1
  double min_value;  // m2
  double range;      // m3
  double mean;       // m4
  double std_dev;    // m5
};

inline BasicMeasures basic_measures(const Trajectory& traj) {
  BasicMeasures m{};
  m.max_value = *std::max_element(traj.values.begin(), traj.values.end());
  m.min_value = *std::min_element(traj.values.begin(), traj.values.end());
  m.range = m.max_value - m.min_value;
  m.mean = trapezoid_mean(traj.times, traj.values);
  std::vector<double> sq(traj.values.size());
  for (std::size_t j = 0; j < sq.size(); ++j) {
    double d = traj.values[j] - m.mean;
    sq[j] = d * d;
  }
  m.std_dev = std::sqrt(trapezoid_mean(traj.times, sq));
  return m;
}

struct AffineMeasures {
  double slope;      // m6
  double intercept;  // m7
  double r_squared;  // m8, clamped to [0, 1]
};

/// m8 is the trapezoid integral of (fit - mean)^2 over the window length
/// times the trajectory variance, the discrete analogue of the share of
/// variance explained by the affine approximation. Defined as 1 for
/// constant trajectories; clamped to [0, 1] to absorb quadrature error.
inline AffineMeasures affine_measures(const Trajectory& traj, const AffineFit& fit,
                                      double mean, double std_dev) {
  AffineMeasures m{fit.slope, fit.intercept, 1.0};
  double lo = *std::min_element(traj.values.begin(), traj.values.end());
  double hi = *std::max_element(traj.values.begin(), traj.values.end());
  if (hi == lo) return m;  // constant trajectory
  double var = std_dev * std_dev;
  if (var == 0.0) return m;
  std::vector<double> sq(traj.values.size());
  for (std::size_t j = 0; j < sq.size(); ++j) {
    double d = fit.fitted[j] - mean;
    sq[j] = d * d;
  }
  double explained = trapezoid_integral(traj.times, sq);
  m.r_squared = std::clamp(explained / (traj.duration() * var), 0.0, 1.0);
  return m;
}

inline AffineMeasures affine_measures(const Trajectory& traj, const AffineFit& fit) {
  BasicMeasures b = basic_measures(traj);
  return affine_measures(traj, fit, b.mean, b.std_dev);
}

/// m9: crossings of the affine fit per unit time. An observation crosses
/// when its residual is nonzero and the next nonzero residual has the
/// opposite sign; zero residuals in between are skipped.
inline double crossing_rate(const Trajectory& traj, const AffineFit& fit) {
  const auto& r = fit.residuals;
  const std::size_t n = r.size();
  // next_nonzero[j]: smallest k > j with r[k] != 0, or n if none
  std::vector<std::size_t> next_nonzero(n);
  std::size_t next = n;
  for (std::size_t j = n; j-- > 0;) {
    next_nonzero[j] = next;
    if (r[j] != 0.0) next = j;
  }
  int crossings = 0;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    if (r[j] == 0.0) continue;
    std::size_t k = next_nonzero[j];
    if (k < n && r[j] * r[k] < 0.0) ++crossings;
  }
  return crossings / traj.duration();
}

struct VariationMeasures {
  double net_rate;       // m10
  double contrast;       // m11
  double total_rate;     // m12
  double midpoint_used;  // observation time chosen for m11
};

/// m10-m12. The midpoint defaults to the centre of the observation window;
/// the observation time closest to it is used, ties resolved to the
/// earlier time. m11 = y_N - 2*y_m + y_1, the late-phase net variation
/// minus the early-phase net variation.
inline VariationMeasures variation_measures(const Trajectory& traj,
                                            std::optional<double> midpoint = std::nullopt) {
  const auto& t = traj.times;
  const auto& y = traj.values;
  const std::size_t n = t.size();
  VariationMeasures m{};

  double target = midpoint ? *midpoint : 0.5 * (t.front() + t.back());
  if (!(target > t.front() && target < t.back()))
    raise(Errc::midpoint_out_of_range,
          "trajectory '" + traj.id + "': midpoint " + std::to_string(target) +
              " outside the open observation window");
  // Two observation times equally close to the midpoint resolve to the
  // earlier one. The tie test carries a small relative band so that exact
  // ties stay ties after the rounding introduced by a unit change.
  const double tie_band = 1e-12 * traj.duration();
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    double dist = std::abs(t[j] - target);
    if (dist < best_dist - tie_band) {
      best_dist = dist;
      best = j;
    }
  }

  m.midpoint_used = t[best];
  m.net_rate = (y[n - 1] - y[0]) / traj.duration();
  m.contrast = y[n - 1] - 2.0 * y[best] + y[0];
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j) total += std::abs(y[j + 1] - y[j]);
  m.total_rate = total / traj.duration();
  return m;
}

/// m13: (|S+| - |S-|) / (|S+| + |S-|) where |S+| (resp. |S-|) approximates
/// the time the underlying function spends above (resp. below) its mean.
/// Each observation contributes the halves of its adjacent intervals; an
/// observation exactly on the mean splits its halves by the sides of its
/// neighbours. Negative values indicate upward spikes. `band` widens the
/// on-the-mean comparison to |y - mean| <= band (default exact equality).
inline double spikiness(const Trajectory& traj, double mean, double band = 0.0) {
  const auto& t = traj.times;
  const auto& y = traj.values;
  const std::size_t n = t.size();

  double lo = *std::min_element(y.begin(), y.end());
  double hi = *std::max_element(y.begin(), y.end());
  if (hi == lo) return 0.0;  // constant trajectory

  auto side = [&](std::size_t j) -> int {
    if (y[j] > mean + band) return 1;
    if (y[j] < mean - band) return -1;
    return 0;
  };
  double above = 0.0, below = 0.0;
  auto credit = [&](int s, double window) {
    if (s > 0) above += window;
    else if (s < 0) below += window;
  };
  for (std::size_t j = 0; j < n; ++j) {
    double left_half = (j > 0) ? 0.5 * (t[j] - t[j - 1]) : 0.0;
    double right_half = (j + 1 < n) ? 0.5 * (t[j + 1] - t[j]) : 0.0;
    int s = side(j);
    if (s != 0) {
      credit(s, left_half + right_half);
    } else {
      // On the mean: each half-interval takes the side of its neighbour.
      if (j > 0) credit(side(j - 1), left_half);
      if (j + 1 < n) credit(side(j + 1), right_half);
    }
  }
  double total = above + below;
  if (total == 0.0) return 0.0;
  return (above - below) / total;
}

struct DerivativeMeasures {
  double max_d;     // m14
  double min_d;     // m15
  double std_dev;   // m16
  double net_rate;  // m17
};

/// m14-m17 from the first-derivative profile. The interior mean used by
/// m16 is the left Riemann sum of D over the window, matching the printed
/// estimator rather than the trapezoid form used elsewhere.
inline DerivativeMeasures derivative_measures(const Trajectory& traj,
                                              const DerivativeProfile& d) {
  const auto& t = traj.times;
  const auto& d1 = d.d1;
  const std::size_t n = d1.size();
  DerivativeMeasures m{};
  m.max_d = *std::max_element(d1.begin(), d1.end());
  m.min_d = *std::min_element(d1.begin(), d1.end());
  double mu = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j) mu += d1[j] * (t[j + 1] - t[j]);
  mu /= traj.duration();
  std::vector<double> sq(n);
  for (std::size_t j = 0; j < n; ++j) {
    double dev = d1[j] - mu;
    sq[j] = dev * dev;
  }
  m.std_dev = std::sqrt(trapezoid_mean(t, sq));
  m.net_rate = (d1[n - 1] - d1[0]) / traj.duration();
  return m;
}

struct SecondDerivativeMeasures {
  double max_d2;   // m18
  double min_d2;   // m19
  double std_dev;  // m20
};

/// m18-m20 from the second-derivative profile, with the same left-Riemann
/// interior mean as m16 (computed from D2, not D).
inline SecondDerivativeMeasures second_derivative_measures(const Trajectory& traj,
                                                           const DerivativeProfile& d) {
  const auto& t = traj.times;
  const auto& d2 = d.d2;
  const std::size_t n = d2.size();
  SecondDerivativeMeasures m{};
  m.max_d2 = *std::max_element(d2.begin(), d2.end());
  m.min_d2 = *std::min_element(d2.begin(), d2.end());
  double mu = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j) mu += d2[j] * (t[j + 1] - t[j]);
  mu /= traj.duration();
  std::vector<double> sq(n);
  for (std::size_t j = 0; j < n; ++j) {
    double dev = d2[j] - mu;
    sq[j] = dev * dev;
  }
  m.std_dev = std::sqrt(trapezoid_mean(t, sq));
  return m;
}

struct MeasureOptions {
  DerivativeWeighting weighting = DerivativeWeighting::proximity;
  std::optional<double> midpoint;  // t* for m11; default centre of window
  double mean_band = 0.0;          // on-the-mean tolerance for m13
};

/// Values of the requested measures for one trajectory. Entries that were
/// not requested hold NaN and computed[i] == false.
struct MeasureVector {
  std::array<double, kMeasureCount> values;
  std::array<bool, kMeasureCount> computed{};
  double midpoint_used = std::numeric_limits<double>::quiet_NaN();

  MeasureVector() { values.fill(std::numeric_limits<double>::quiet_NaN()); }

  double at(int index) const {
    if (index < 0 || index >= kMeasureCount || !computed[index])
      raise(Errc::invalid_parameter, "measure " + measure_id(index) + " was not computed");
    return values[index];
  }
};

/// Computes exactly the selected measures, sharing intermediates (mean,
/// affine fit, derivative profiles) between them.
inline MeasureVector compute_measure_vector(const Trajectory& traj,
                                            const MeasureSelection& selection,
                                            const MeasureOptions& options = {}) {
  if (selection.empty())
    raise(Errc::invalid_parameter, "measure selection is empty");
  const auto& sel = selection.mask;
  MeasureVector out;
  try {
    bool need_basic = sel[kMax] || sel[kMin] || sel[kRange] || sel[kMean] ||
                      sel[kStdDev] || sel[kAffineR2] || sel[kSpikiness];
    bool need_fit = sel[kSlope] || sel[kIntercept] || sel[kAffineR2] || sel[kCrossingRate];
    bool need_variation = sel[kNetVariation] || sel[kVariationContrast] || sel[kTotalVariation];
    bool need_d2 = sel[kSecondDerivMax] || sel[kSecondDerivMin] || sel[kSecondDerivStdDev];
    bool need_d1 = need_d2 || sel[kDerivMax] || sel[kDerivMin] || sel[kDerivStdDev] ||
                   sel[kDerivNetVariation];

    BasicMeasures basic{};
    if (need_basic) {
      basic = basic_measures(traj);
      out.values[kMax] = basic.max_value;
      out.values[kMin] = basic.min_value;
      out.values[kRange] = basic.range;
      out.values[kMean] = basic.mean;
      out.values[kStdDev] = basic.std_dev;
    }
    if (need_fit) {
      AffineFit fit = affine_fit(traj);
      AffineMeasures am = affine_measures(traj, fit, basic.mean, basic.std_dev);
      out.values[kSlope] = am.slope;
      out.values[kIntercept] = am.intercept;
      out.values[kAffineR2] = am.r_squared;
      if (sel[kCrossingRate]) out.values[kCrossingRate] = crossing_rate(traj, fit);
    }
    if (need_variation) {
      VariationMeasures vm = variation_measures(traj, options.midpoint);
      out.values[kNetVariation] = vm.net_rate;
      out.values[kVariationContrast] = vm.contrast;
      out.values[kTotalVariation] = vm.total_rate;
      out.midpoint_used = vm.midpoint_used;
    }
    if (sel[kSpikiness])
      out.values[kSpikiness] = spikiness(traj, basic.mean, options.mean_band);
    if (need_d1) {
      DerivativeProfile prof = derivative_profile(traj, options.weighting);
      DerivativeMeasures dm = derivative_measures(traj, prof);
      out.values[kDerivMax] = dm.max_d;
      out.values[kDerivMin] = dm.min_d;
      out.values[kDerivStdDev] = dm.std_dev;
      out.values[kDerivNetVariation] = dm.net_rate;
      if (need_d2) {
        SecondDerivativeMeasures sm = second_derivative_measures(traj, prof);
        out.values[kSecondDerivMax] = sm.max_d2;
        out.values[kSecondDerivMin] = sm.min_d2;
        out.values[kSecondDerivStdDev] = sm.std_dev;
      }
    }
  } catch (const Error& e) {
    throw Error(e.code(), "computing measures for trajectory '" + traj.id + "': " + e.what());
  }
  // Expose only what was asked for; intermediates stay internal.
  for (int i = 0; i < kMeasureCount; ++i) {
    if (sel[i]) {
      out.computed[i] = true;
    } else {
      out.values[i] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

}  // namespace fbtc
