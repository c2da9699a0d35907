#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fbtc/rng.hpp"
#include "fbtc/trajectory.hpp"

namespace fbtc {

/// Parameters of the three-group benchmark generator. The groups share the
/// same intercept distribution (so they overlap vertically) and differ only
/// in shape: linear growth, a step increase, and slow quadratic growth.
/// `separation` scales the three shape coefficients relative to the shared
/// intercept spread; 1 is the documented default, larger values make the
/// groups easier to tell apart.
struct ThreeGroupSpec {
  int n_per_group = 15;
  int n_obs = 10;
  double noise_sd = 0.0;
  double separation = 1.0;

  double intercept_min = 0.0, intercept_max = 2.0;  // all groups
  double slope_min = 1.5, slope_max = 2.5;          // group 1: a + b*t
  double step_min = 1.5, step_max = 2.5;            // group 2: a + c*[t >= t_step]
  double step_time_min = 0.4, step_time_max = 0.6;  // group 2 step location
  double quad_min = 0.5, quad_max = 0.9;            // group 3: a + d*t^2
};

/// Trajectories plus their reference group labels (contiguous from 1).
struct LabeledDataset {
  std::vector<Trajectory> trajectories;
  std::vector<int> labels;
  ThreeGroupSpec generator_spec;
};

/// Synthesizes 3 groups of trajectories over equidistant times on [0, 1].
/// Trajectory i draws from the substream derive_seed(seed, i), so the
/// dataset is reproducible and independent of generation order. Draw order
/// within a trajectory: intercept, shape coefficient, step location (group
/// 2 only), then one noise value per observation.
inline LabeledDataset generate_three_group(const ThreeGroupSpec& spec, std::uint64_t seed) {
  if (spec.n_per_group < 2)
    raise(Errc::invalid_parameter, "generate_three_group: need at least 2 per group");
  if (spec.n_obs < 3)
    raise(Errc::invalid_parameter, "generate_three_group: need at least 3 observations");

  LabeledDataset out;
  out.generator_spec = spec;
  const int total = 3 * spec.n_per_group;
  std::vector<double> times(spec.n_obs);
  for (int j = 0; j < spec.n_obs; ++j)
    times[j] = static_cast<double>(j) / (spec.n_obs - 1);

  for (int i = 0; i < total; ++i) {
    int group = i / spec.n_per_group + 1;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    double intercept = rng.uniform(spec.intercept_min, spec.intercept_max);
    std::vector<double> values(spec.n_obs);
    if (group == 1) {
      double slope = spec.separation * rng.uniform(spec.slope_min, spec.slope_max);
      for (int j = 0; j < spec.n_obs; ++j) values[j] = intercept + slope * times[j];
    } else if (group == 2) {
      double height = spec.separation * rng.uniform(spec.step_min, spec.step_max);
      double step_at = rng.uniform(spec.step_time_min, spec.step_time_max);
      for (int j = 0; j < spec.n_obs; ++j)
        values[j] = intercept + (times[j] >= step_at ? height : 0.0);
    } else {
      double coeff = spec.separation * rng.uniform(spec.quad_min, spec.quad_max);
      for (int j = 0; j < spec.n_obs; ++j)
        values[j] = intercept + coeff * times[j] * times[j];
    }
    if (spec.noise_sd > 0.0)
      for (int j = 0; j < spec.n_obs; ++j) values[j] += rng.normal(0.0, spec.noise_sd);

    std::string id = "t" + std::string(i + 1 < 10 ? "00" : (i + 1 < 100 ? "0" : "")) +
                     std::to_string(i + 1);
    out.trajectories.push_back(validate_trajectory(id, times, std::move(values)));
    out.labels.push_back(group);
  }
  return out;
}

}  // namespace fbtc
