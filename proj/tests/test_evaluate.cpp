#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

#include "fbtc/evaluate.hpp"
#include "fbtc/measures.hpp"
#include "fbtc/rng.hpp"
#include "fbtc/synthetic.hpp"
#include "fbtc/trajectory.hpp"

using namespace fbtc;
using Catch::Approx;

namespace {

// Brute-force best matching accuracy: try every permutation of found labels
// onto reference labels (small K only).
double brute_accuracy(const std::vector<int>& found, const std::vector<int>& reference) {
  std::vector<int> fl = found, rl = reference;
  std::sort(fl.begin(), fl.end());
  fl.erase(std::unique(fl.begin(), fl.end()), fl.end());
  std::sort(rl.begin(), rl.end());
  rl.erase(std::unique(rl.begin(), rl.end()), rl.end());
  int kf = static_cast<int>(fl.size());
  int kr = static_cast<int>(rl.size());
  int k = std::max(kf, kr);
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  long long best = 0;
  do {
    long long correct = 0;
    for (std::size_t i = 0; i < found.size(); ++i) {
      int fi = static_cast<int>(std::lower_bound(fl.begin(), fl.end(), found[i]) - fl.begin());
      int ri = static_cast<int>(std::lower_bound(rl.begin(), rl.end(), reference[i]) - rl.begin());
      if (perm[fi] == ri) ++correct;
    }
    best = std::max(best, correct);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / found.size();
}

}  // namespace

TEST_CASE("evaluation on fixed labelings") {
  SECTION("identical labelings") {
    EvaluationReport rep = evaluate({1, 1, 2, 2, 3}, {1, 1, 2, 2, 3});
    REQUIRE(rep.accuracy == 1.0);
    REQUIRE(rep.ari == Approx(1.0));
  }
  SECTION("permuted group ids still score perfectly") {
    EvaluationReport rep = evaluate({3, 3, 1, 1, 2}, {1, 1, 2, 2, 3});
    REQUIRE(rep.accuracy == 1.0);
    REQUIRE(rep.ari == Approx(1.0));
  }
  SECTION("checkerboard disagreement") {
    // contingency all ones; ARI by direct pair counting is -0.5
    EvaluationReport rep = evaluate({1, 2, 1, 2}, {1, 1, 2, 2});
    REQUIRE(rep.accuracy == Approx(0.5));
    REQUIRE(rep.ari == Approx(-0.5));
  }
  SECTION("contingency layout: rows are reference groups") {
    EvaluationReport rep = evaluate({1, 1, 2, 2}, {1, 2, 1, 2});
    REQUIRE(rep.contingency.size() == 2);     // reference rows
    REQUIRE(rep.contingency[0].size() == 2);  // found columns
    REQUIRE(rep.contingency[0][0] == 1);
    REQUIRE(rep.reference_sizes == std::vector<long long>{2, 2});
  }
  SECTION("length mismatch") {
    try {
      evaluate({1, 2}, {1, 2, 3});
      FAIL("expected error");
    } catch (const Error& e) {
      REQUIRE(e.code() == Errc::length_mismatch);
    }
  }
}

TEST_CASE("hungarian matching agrees with permutation brute force") {
  Rng rng(333);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 6 + static_cast<int>(rng.uniform_int(20));
    int kf = 2 + static_cast<int>(rng.uniform_int(4));
    int kr = 2 + static_cast<int>(rng.uniform_int(4));
    std::vector<int> found(n), reference(n);
    for (int i = 0; i < n; ++i) {
      found[i] = 1 + static_cast<int>(rng.uniform_int(kf));
      reference[i] = 1 + static_cast<int>(rng.uniform_int(kr));
    }
    EvaluationReport rep = evaluate(found, reference);
    REQUIRE(rep.accuracy == Approx(brute_accuracy(found, reference)));
  }
}

TEST_CASE("evaluation is invariant under relabeling of found clusters") {
  Rng rng(404);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 10 + static_cast<int>(rng.uniform_int(30));
    std::vector<int> found(n), reference(n);
    for (int i = 0; i < n; ++i) {
      found[i] = 1 + static_cast<int>(rng.uniform_int(4));
      reference[i] = 1 + static_cast<int>(rng.uniform_int(3));
    }
    EvaluationReport base = evaluate(found, reference);
    // apply a random permutation to the found ids
    std::vector<int> perm{1, 2, 3, 4};
    for (int i = 3; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
    std::vector<int> renamed(n);
    for (int i = 0; i < n; ++i) renamed[i] = perm[found[i] - 1];
    EvaluationReport moved = evaluate(renamed, reference);
    REQUIRE(moved.accuracy == Approx(base.accuracy));
    REQUIRE(moved.ari == Approx(base.ari));
  }
}

TEST_CASE("three-group generator shape") {
  ThreeGroupSpec spec;
  LabeledDataset data = generate_three_group(spec, 0);
  REQUIRE(data.trajectories.size() == 45);
  REQUIRE(data.labels.size() == 45);
  int counts[4] = {0, 0, 0, 0};
  for (int label : data.labels) ++counts[label];
  REQUIRE(counts[1] == 15);
  REQUIRE(counts[2] == 15);
  REQUIRE(counts[3] == 15);
  for (const auto& traj : data.trajectories) {
    REQUIRE(traj.size() == 10);
    REQUIRE(traj.times.front() == 0.0);
    REQUIRE(traj.times.back() == 1.0);
  }
}

TEST_CASE("generator groups carry their shape signatures") {
  ThreeGroupSpec spec;
  LabeledDataset data = generate_three_group(spec, 1);
  for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
    const Trajectory& traj = data.trajectories[i];
    MeasureVector mv = compute_measure_vector(traj, MeasureSelection::all());
    if (data.labels[i] == 1) {
      // noiseless linear growth: perfect fit and telescoping variation
      REQUIRE(mv.at(kAffineR2) == Approx(1.0).margin(1e-9));
      REQUIRE(mv.at(kTotalVariation) == Approx(mv.at(kNetVariation)).margin(1e-12));
    }
    if (data.labels[i] == 3) {
      // exact quadratic: strictly positive curvature at interior stencils
      auto d2 = second_derivative(traj);
      for (std::size_t j = 1; j + 1 < d2.size(); ++j) REQUIRE(d2[j] > 0.0);
    }
  }
}

TEST_CASE("generator determinism and seed sensitivity") {
  ThreeGroupSpec spec;
  LabeledDataset a = generate_three_group(spec, 7);
  LabeledDataset b = generate_three_group(spec, 7);
  REQUIRE(a.trajectories.size() == b.trajectories.size());
  for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
    REQUIRE(a.trajectories[i].values == b.trajectories[i].values);
    REQUIRE(a.trajectories[i].times == b.trajectories[i].times);
  }
  LabeledDataset c = generate_three_group(spec, 8);
  bool any_different = false;
  for (std::size_t i = 0; i < a.trajectories.size(); ++i)
    if (a.trajectories[i].values != c.trajectories[i].values) any_different = true;
  REQUIRE(any_different);
}

TEST_CASE("noise is applied when requested") {
  ThreeGroupSpec spec;
  spec.noise_sd = 0.3;
  LabeledDataset noisy = generate_three_group(spec, 2);
  // group-1 trajectories are no longer exactly affine
  MeasureVector mv =
      compute_measure_vector(noisy.trajectories[0], MeasureSelection::all());
  REQUIRE(mv.at(kAffineR2) < 1.0);
}
