#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbtc/csv.hpp"
#include "fbtc/error.hpp"
#include "fbtc/features.hpp"
#include "fbtc/measures.hpp"
#include "fbtc/parallel.hpp"
#include "fbtc/spectral.hpp"

namespace fbtc {

/// Everything a `cluster` (or `measures`) run needs. Field names mirror
/// the CLI flags and the JSON config keys.
struct RunConfig {
  std::string input_path;
  int k = 0;
  MeasureSelection selection = MeasureSelection::all();
  bool center_vertical = false;
  bool shift_horizontal = false;
  std::optional<double> midpoint;
  std::optional<double> winsorize_limit;
  std::optional<int> p_override;
  PartitionerKind partitioner = PartitionerKind::hard;
  int restarts = 50;
  std::uint64_t seed = 0;
  std::string output_dir;  // empty: compute only, write nothing
  DerivativeWeighting weighting = DerivativeWeighting::proximity;
  int threads = 1;
  bool write_embedding = false;
  bool dump_similarity = false;
  bool drop_outliers = false;
  std::optional<int> outlier_probe_k;  // 0 disables flagging
  bool timings = false;                // include stage timings in the report
};

struct RunResult {
  Dataset dataset;
  std::vector<int> measure_indices;
  Eigen::MatrixXd raw_measures;  // one row per trajectory, selected columns
  FeatureMatrix features;
  std::vector<Eigen::Index> outlier_rows;
  int p = 0;
  ClusterResult clusters;
  SpectralEmbedding embedding;
  std::vector<int> kept_rows;  // dataset rows that entered clustering
  nlohmann::json report;
  std::vector<std::string> files_written;
};

namespace detail {

class StageClock {
 public:
  void start(const std::string& name) {
    name_ = name;
    begin_ = std::chrono::steady_clock::now();
  }
  void stop(nlohmann::json& out) {
    auto end = std::chrono::steady_clock::now();
    out[name_] = std::chrono::duration<double, std::milli>(end - begin_).count();
  }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point begin_;
};

inline Eigen::MatrixXd compute_raw_measures(const std::vector<Trajectory>& trajectories,
                                            const MeasureSelection& selection,
                                            const MeasureOptions& options, int threads) {
  auto indices = selection.indices();
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(trajectories.size()),
                      static_cast<Eigen::Index>(indices.size()));
  parallel_for(trajectories.size(), threads, [&](std::size_t i) {
    MeasureVector mv = compute_measure_vector(trajectories[i], selection, options);
    for (std::size_t c = 0; c < indices.size(); ++c)
      raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = mv.values[indices[c]];
  });
  return raw;
}

inline std::string measures_csv_string(const Dataset& data,
                                       const std::vector<int>& measure_indices,
                                       const Eigen::MatrixXd& raw) {
  std::ostringstream os;
  os << "id";
  for (int m : measure_indices) os << ',' << measure_id(m);
  os << '\n';
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    os << data.trajectories[i].id;
    for (Eigen::Index c = 0; c < raw.cols(); ++c) os << ',' << format_double(raw(i, c));
    os << '\n';
  }
  return os.str();
}

inline nlohmann::json config_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["input"] = cfg.input_path;
  j["k"] = cfg.k;
  j["measures"] = cfg.selection.ids();
  j["center_vertical"] = cfg.center_vertical;
  j["shift_horizontal"] = cfg.shift_horizontal;
  if (cfg.midpoint) j["midpoint"] = *cfg.midpoint; else j["midpoint"] = nullptr;
  if (cfg.winsorize_limit) j["winsorize_limit"] = *cfg.winsorize_limit;
  else j["winsorize_limit"] = nullptr;
  if (cfg.p_override) j["p"] = *cfg.p_override; else j["p"] = nullptr;
  j["partitioner"] = cfg.partitioner == PartitionerKind::hard ? "hard" : "fuzzy";
  j["restarts"] = cfg.restarts;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["derivative_weighting"] =
      cfg.weighting == DerivativeWeighting::proximity ? "proximity" : "literal";
  // the worker cap is deliberately not echoed: results never depend on it,
  // and the report must be identical across thread counts
  j["write_embedding"] = cfg.write_embedding;
  j["dump_similarity"] = cfg.dump_similarity;
  j["drop_outliers"] = cfg.drop_outliers;
  if (cfg.outlier_probe_k) j["outlier_probe_k"] = *cfg.outlier_probe_k;
  else j["outlier_probe_k"] = nullptr;
  j["timings"] = cfg.timings;
  return j;
}

}  // namespace detail

/// Computes the selected measures for every trajectory of the input and,
/// when an output directory is set, writes measures.csv. Shared by the
/// `measures` subcommand and the first stages of `cluster`.
inline RunResult run_measures(const RunConfig& cfg) {
  if (cfg.selection.empty()) raise(Errc::invalid_parameter, "measure selection is empty");
  RunResult result;
  result.dataset = load_trajectories_csv(cfg.input_path);
  if (cfg.center_vertical || cfg.shift_horizontal) {
    for (auto& traj : result.dataset.trajectories) {
      if (cfg.center_vertical) traj = center_vertically(traj);
      if (cfg.shift_horizontal) traj = shift_horizontally(traj);
    }
  }
  MeasureOptions mopts;
  mopts.weighting = cfg.weighting;
  mopts.midpoint = cfg.midpoint;
  result.measure_indices = cfg.selection.indices();
  result.raw_measures = detail::compute_raw_measures(result.dataset.trajectories,
                                                     cfg.selection, mopts, cfg.threads);
  if (!cfg.output_dir.empty()) {
    std::string path = cfg.output_dir + "/measures.csv";
    atomic_write_file(path, detail::measures_csv_string(result.dataset,
                                                        result.measure_indices,
                                                        result.raw_measures));
    result.files_written.push_back(path);
  }
  return result;
}

/// The end-to-end clustering run. All artifact contents are rendered first
/// and written (atomically, per file) only after every stage has succeeded,
/// so a failing run leaves no partial artifact set.
inline RunResult run_cluster(const RunConfig& cfg) {
  if (cfg.k < 2) raise(Errc::invalid_k, "K must be at least 2, got " + std::to_string(cfg.k));
  if (cfg.selection.empty()) raise(Errc::invalid_parameter, "measure selection is empty");
  if (cfg.restarts < 1) raise(Errc::invalid_parameter, "restarts must be positive");

  nlohmann::json timing;
  detail::StageClock clock;

  clock.start("load_and_measures");
  RunConfig stages = cfg;
  stages.output_dir.clear();  // defer all writes to the end
  RunResult result = run_measures(stages);
  const Eigen::Index n = result.raw_measures.rows();
  clock.stop(timing);

  clock.start("features");
  Eigen::MatrixXd capped = result.raw_measures;
  if (cfg.winsorize_limit) capped = winsorize(capped, *cfg.winsorize_limit);
  std::vector<std::string> ids;
  for (int m : result.measure_indices) ids.push_back(measure_id(m));
  result.features = standardize(capped, ids);

  int probe = cfg.outlier_probe_k ? *cfg.outlier_probe_k : default_probe_k(n);
  if (probe > 0) result.outlier_rows = flag_outliers(result.features, probe, cfg.seed);

  result.kept_rows.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) result.kept_rows[i] = static_cast<int>(i);
  if (cfg.drop_outliers && !result.outlier_rows.empty()) {
    std::vector<int> kept;
    std::size_t next_flag = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (next_flag < result.outlier_rows.size() && result.outlier_rows[next_flag] == i) {
        ++next_flag;
        continue;
      }
      kept.push_back(static_cast<int>(i));
    }
    if (static_cast<int>(kept.size()) <= cfg.k)
      raise(Errc::invalid_parameter, "dropping outliers leaves too few trajectories");
    Eigen::MatrixXd sub(kept.size(), capped.cols());
    for (std::size_t r = 0; r < kept.size(); ++r) sub.row(r) = capped.row(kept[r]);
    result.features = standardize(sub, ids);
    result.kept_rows = kept;
  }
  clock.stop(timing);

  clock.start("similarity_and_embedding");
  SpectralOptions sopts;
  sopts.p_override = cfg.p_override;
  sopts.restarts = cfg.restarts;
  sopts.threads = cfg.threads;
  // The similarity graph is rebuilt inside spectral_cluster; build it here
  // only when a dump was requested.
  std::string similarity_dump;
  if (cfg.dump_similarity) {
    int p = cfg.p_override ? *cfg.p_override
                           : choose_p(static_cast<int>(result.features.n()), cfg.k);
    SimilarityGraph s = build_similarity(result.features.rows, p, cfg.threads);
    std::ostringstream os;
    dump_similarity_coo(s, os);
    similarity_dump = os.str();
  }
  SpectralResult spectral =
      spectral_cluster(result.features, cfg.k, cfg.partitioner, cfg.seed, sopts);
  result.p = spectral.p;
  result.embedding = spectral.embedding;
  result.clusters = spectral.clusters;
  clock.stop(timing);

  // Map kept-row labels back onto the full dataset; dropped rows get
  // cluster 0 ("not assigned").
  std::vector<int> full_labels(n, 0);
  for (std::size_t r = 0; r < result.kept_rows.size(); ++r)
    full_labels[result.kept_rows[r]] = result.clusters.labels[r];

  std::vector<std::string> warnings;
  {
    std::vector<int> sizes(cfg.k + 1, 0);
    for (int label : result.clusters.labels) ++sizes[label];
    for (int c = 1; c <= cfg.k; ++c)
      if (sizes[c] < result.p)
        warnings.push_back("cluster " + std::to_string(c) + " has size " +
                           std::to_string(sizes[c]) + " < p = " + std::to_string(result.p) +
                           "; the neighbour count may be too large for this group");
  }

  // ---- render artifacts ----
  std::ostringstream assignments;
  assignments << "id,cluster";
  if (result.clusters.weights)
    for (int c = 1; c <= cfg.k; ++c) assignments << ",weight_" << c;
  assignments << '\n';
  {
    std::vector<int> row_of(n, -1);
    for (std::size_t r = 0; r < result.kept_rows.size(); ++r) row_of[result.kept_rows[r]] = static_cast<int>(r);
    for (Eigen::Index i = 0; i < n; ++i) {
      assignments << result.dataset.trajectories[i].id << ',' << full_labels[i];
      if (result.clusters.weights) {
        for (int c = 0; c < cfg.k; ++c) {
          assignments << ',';
          if (row_of[i] >= 0)
            assignments << format_double((*result.clusters.weights)(row_of[i], c));
          else
            assignments << format_double(0.0);
        }
      }
      assignments << '\n';
    }
  }

  std::string embedding_csv;
  if (cfg.write_embedding) {
    std::ostringstream os;
    os << "id";
    for (int c = 1; c < cfg.k; ++c) os << ",e" << c;
    os << '\n';
    for (std::size_t r = 0; r < result.kept_rows.size(); ++r) {
      os << result.dataset.trajectories[result.kept_rows[r]].id;
      for (int c = 0; c + 1 < cfg.k; ++c)
        os << ',' << format_double(result.embedding.embedding(static_cast<Eigen::Index>(r), c));
      os << '\n';
    }
    embedding_csv = os.str();
  }

  nlohmann::json report;
  report["config"] = detail::config_json(cfg);
  report["n"] = static_cast<int>(n);
  report["n_clustered"] = static_cast<int>(result.kept_rows.size());
  report["p"] = result.p;
  report["eigenvalues"] = std::vector<double>(
      result.embedding.eigenvalues.data(),
      result.embedding.eigenvalues.data() + result.embedding.eigenvalues.size());
  report["wcss"] = result.clusters.wcss;
  report["iterations"] = result.clusters.iterations;
  report["restarts_run"] = result.clusters.restarts_run;
  report["converged"] = result.clusters.converged;
  report["dropped_columns"] = result.features.dropped_columns;
  {
    std::vector<std::string> flagged;
    for (Eigen::Index i : result.outlier_rows)
      flagged.push_back(result.dataset.trajectories[i].id);
    report["outlier_flags"] = flagged;
  }
  report["degenerate_rows"] = result.embedding.degenerate_rows;
  {
    std::vector<std::string> low;
    for (int r : result.clusters.low_confidence)
      low.push_back(result.dataset.trajectories[result.kept_rows[r]].id);
    report["low_confidence"] = low;
  }
  report["warnings"] = warnings;
  if (cfg.timings) report["timings_ms"] = timing;
  result.report = report;

  if (!cfg.output_dir.empty()) {
    auto emit = [&](const std::string& name, const std::string& content) {
      std::string path = cfg.output_dir + "/" + name;
      atomic_write_file(path, content);
      result.files_written.push_back(path);
    };
    emit("measures.csv", detail::measures_csv_string(result.dataset, result.measure_indices,
                                                     result.raw_measures));
    emit("assignments.csv", assignments.str());
    emit("report.json", report.dump(2) + "\n");
    if (cfg.write_embedding) emit("embedding.csv", embedding_csv);
    if (cfg.dump_similarity) emit("similarity.txt", similarity_dump);
  }
  return result;
}

}  // namespace fbtc
