#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fbtc/error.hpp"

namespace fbtc {

/// One individual's longitudinal record: values observed at strictly
/// increasing times. Grids may differ between trajectories and need not be
/// uniform. At least 3 observations are required so that the second
/// derivative stencil has an interior point.
struct Trajectory {
  std::string id;
  std::vector<double> times;
  std::vector<double> values;

  int size() const { return static_cast<int>(times.size()); }
  double duration() const { return times.back() - times.front(); }
};

/// Validates raw parallel sequences and assembles a Trajectory. Input order
/// is preserved.
inline Trajectory validate_trajectory(std::string id, std::vector<double> times,
                                      std::vector<double> values) {
  if (times.size() != values.size())
    raise(Errc::length_mismatch,
          "trajectory '" + id + "': " + std::to_string(times.size()) +
              " times vs " + std::to_string(values.size()) + " values");
  if (times.size() < 3)
    raise(Errc::too_short, "trajectory '" + id + "': need at least 3 observations, got " +
                               std::to_string(times.size()));
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (!std::isfinite(times[j]) || !std::isfinite(values[j]))
      raise(Errc::non_finite_value,
            "trajectory '" + id + "': non-finite entry at position " + std::to_string(j));
  }
  for (std::size_t j = 0; j + 1 < times.size(); ++j) {
    if (!(times[j] < times[j + 1]))
      raise(Errc::non_monotone_times,
            "trajectory '" + id + "': times must be strictly increasing (t[" +
                std::to_string(j) + "]=" + std::to_string(times[j]) + ", t[" +
                std::to_string(j + 1) + "]=" + std::to_string(times[j + 1]) + ")");
  }
  return Trajectory{std::move(id), std::move(times), std::move(values)};
}

/// Trapezoidal approximation of the integral of G over [t_1, t_N] from
/// samples G(t_j). Exact for piecewise-linear G.
inline double trapezoid_integral(std::span<const double> t, std::span<const double> g) {
  if (t.size() != g.size())
    raise(Errc::length_mismatch, "trapezoid_integral: sample sequences differ in length");
  if (t.size() < 2) raise(Errc::too_short, "trapezoid_integral: need at least 2 samples");
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < t.size(); ++j)
    acc += 0.5 * (g[j] + g[j + 1]) * (t[j + 1] - t[j]);
  return acc;
}

/// Trapezoidal mean of G over its observation window.
inline double trapezoid_mean(std::span<const double> t, std::span<const double> g) {
  return trapezoid_integral(t, g) / (t.back() - t.front());
}

/// How the two one-sided difference quotients are combined at interior
/// points. Both variants are convex combinations; they differ in which
/// neighbour receives the larger weight.
enum class DerivativeWeighting {
  /// The closer neighbour gets the larger weight. Exact for quadratics at
  /// interior points on any grid; second-order accurate.
  proximity,
  /// The farther neighbour gets the larger weight. First-order accurate on
  /// non-uniform grids; coincides with `proximity` on equidistant grids.
  literal,
};

namespace detail {

inline std::vector<double> difference_stencil(const std::vector<double>& t,
                                              const std::vector<double>& g,
                                              DerivativeWeighting weighting) {
  const std::size_t n = t.size();
  std::vector<double> d(n);
  d[0] = (g[1] - g[0]) / (t[1] - t[0]);
  d[n - 1] = (g[n - 1] - g[n - 2]) / (t[n - 1] - t[n - 2]);
  for (std::size_t j = 1; j + 1 < n; ++j) {
    double left = (g[j] - g[j - 1]) / (t[j] - t[j - 1]);
    double right = (g[j + 1] - g[j]) / (t[j + 1] - t[j]);
    double window = t[j + 1] - t[j - 1];
    double w_left, w_right;
    if (weighting == DerivativeWeighting::proximity) {
      w_left = (t[j + 1] - t[j]) / window;
      w_right = (t[j] - t[j - 1]) / window;
    } else {
      w_left = (t[j] - t[j - 1]) / window;
      w_right = (t[j + 1] - t[j]) / window;
    }
    d[j] = w_left * left + w_right * right;
  }
  return d;
}

}  // namespace detail

/// First-derivative approximation D_1..D_N: one-sided differences at the
/// ends, weighted one-sided differences at interior points. Exact for
/// affine trajectories on any grid.
inline std::vector<double> first_derivative(
    const Trajectory& traj, DerivativeWeighting weighting = DerivativeWeighting::proximity) {
  return detail::difference_stencil(traj.times, traj.values, weighting);
}

/// Second-derivative approximation: the first-derivative stencil applied to
/// the sequence (t_j, D_j). Identically zero for affine trajectories.
inline std::vector<double> second_derivative(
    const Trajectory& traj, DerivativeWeighting weighting = DerivativeWeighting::proximity) {
  auto d1 = detail::difference_stencil(traj.times, traj.values, weighting);
  return detail::difference_stencil(traj.times, d1, weighting);
}

/// First and second derivative approximations at every observation time.
struct DerivativeProfile {
  std::vector<double> d1;
  std::vector<double> d2;
};

inline DerivativeProfile derivative_profile(
    const Trajectory& traj, DerivativeWeighting weighting = DerivativeWeighting::proximity) {
  DerivativeProfile p;
  p.d1 = detail::difference_stencil(traj.times, traj.values, weighting);
  p.d2 = detail::difference_stencil(traj.times, p.d1, weighting);
  return p;
}

/// Subtracts the trapezoid mean of the values from every value. Using the
/// trapezoid mean (not the arithmetic mean) keeps centering consistent on
/// non-uniform grids.
inline Trajectory center_vertically(const Trajectory& traj) {
  Trajectory out = traj;
  double mean = trapezoid_mean(traj.times, traj.values);
  for (double& v : out.values) v -= mean;
  return out;
}

/// Shifts times so the first observation is at 0.
inline Trajectory shift_horizontally(const Trajectory& traj) {
  Trajectory out = traj;
  double t0 = traj.times.front();
  for (double& t : out.times) t -= t0;
  return out;
}

}  // namespace fbtc
