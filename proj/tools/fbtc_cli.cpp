// Command-line front end: feature extraction and trajectory clustering on
// long/wide CSV files, a synthetic benchmark generator, and a label
// comparison tool.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fbtc/fbtc.hpp"

namespace {

using nlohmann::json;

int fail(const std::string& code, const std::string& message) {
  json err;
  err["error"]["code"] = code;
  err["error"]["message"] = message;
  std::cout << err.dump() << std::endl;
  return 1;
}

fbtc::MeasureSelection parse_measures(const std::string& text) {
  if (text.empty() || text == "all") return fbtc::MeasureSelection::all();
  if (text == "shape-only") return fbtc::MeasureSelection::shape_only();
  std::vector<std::string> ids;
  std::string cur;
  for (char c : text + ",") {
    if (c == ',') {
      if (!cur.empty()) ids.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  return fbtc::MeasureSelection::from_ids(ids);
}

/// Applies a JSON config file (keys mirror the CLI flags) underneath any
/// flags given on the command line. The config path comes from --config or
/// the FBTC_CONFIG environment variable.
void apply_config_file(const std::string& path, fbtc::RunConfig& cfg,
                       std::string& measures_text) {
  std::ifstream in(path);
  if (!in) fbtc::raise(fbtc::Errc::io_error, "cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fbtc::raise(fbtc::Errc::parse_error, "config '" + path + "': " + e.what());
  }
  if (j.contains("input")) cfg.input_path = j["input"].get<std::string>();
  if (j.contains("k")) cfg.k = j["k"].get<int>();
  if (j.contains("measures")) {
    if (j["measures"].is_array()) {
      // normalize to the comma-list form the flag parser understands
      measures_text.clear();
      for (const auto& id : j["measures"]) {
        if (!measures_text.empty()) measures_text += ",";
        measures_text += id.get<std::string>();
      }
    } else {
      measures_text = j["measures"].get<std::string>();
    }
  }
  if (j.contains("center_vertical")) cfg.center_vertical = j["center_vertical"].get<bool>();
  if (j.contains("shift_horizontal")) cfg.shift_horizontal = j["shift_horizontal"].get<bool>();
  if (j.contains("midpoint") && !j["midpoint"].is_null())
    cfg.midpoint = j["midpoint"].get<double>();
  if (j.contains("winsorize_limit") && !j["winsorize_limit"].is_null())
    cfg.winsorize_limit = j["winsorize_limit"].get<double>();
  if (j.contains("p") && !j["p"].is_null()) cfg.p_override = j["p"].get<int>();
  if (j.contains("partitioner"))
    cfg.partitioner = j["partitioner"].get<std::string>() == "fuzzy"
                          ? fbtc::PartitionerKind::fuzzy
                          : fbtc::PartitionerKind::hard;
  if (j.contains("restarts")) cfg.restarts = j["restarts"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("derivative_weighting"))
    cfg.weighting = j["derivative_weighting"].get<std::string>() == "literal"
                        ? fbtc::DerivativeWeighting::literal
                        : fbtc::DerivativeWeighting::proximity;
  if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
  if (j.contains("write_embedding")) cfg.write_embedding = j["write_embedding"].get<bool>();
  if (j.contains("dump_similarity")) cfg.dump_similarity = j["dump_similarity"].get<bool>();
  if (j.contains("drop_outliers")) cfg.drop_outliers = j["drop_outliers"].get<bool>();
  if (j.contains("outlier_probe_k") && !j["outlier_probe_k"].is_null())
    cfg.outlier_probe_k = j["outlier_probe_k"].get<int>();
  if (j.contains("timings")) cfg.timings = j["timings"].get<bool>();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-based trajectory clustering"};
  app.require_subcommand(1);

  fbtc::RunConfig cfg;
  std::string measures_text = "all";
  std::string config_path;
  if (const char* env = std::getenv("FBTC_CONFIG")) config_path = env;

  std::string partitioner_text = "hard";
  std::string weighting_text = "proximity";
  double midpoint_value = 0.0;
  double winsorize_value = 0.0;
  int p_value = 0;
  int probe_value = -1;

  auto add_common = [&](CLI::App* cmd, bool clustering) {
    cmd->add_option("-i,--input", cfg.input_path, "input CSV (long or wide format)");
    cmd->add_option("-o,--out", cfg.output_dir, "output directory");
    cmd->add_option("--config", config_path, "JSON config file (flags override it)");
    cmd->add_option("--measures", measures_text,
                    "all, shape-only, or a comma-separated list like m1,m5,m8");
    cmd->add_flag("--center-vertical", cfg.center_vertical,
                  "subtract each trajectory's mean value first");
    cmd->add_flag("--shift-horizontal", cfg.shift_horizontal,
                  "shift each trajectory's times to start at 0");
    cmd->add_option("--midpoint", midpoint_value,
                    "midpoint t* for the variation contrast (default: window centre)");
    cmd->add_option("--derivative-weighting", weighting_text,
                    "proximity (default) or literal interior weighting");
    cmd->add_option("--threads", cfg.threads, "worker thread cap (results do not depend on it)");
    if (clustering) {
      cmd->add_option("-K,--clusters", cfg.k, "number of clusters (required, >= 2)");
      cmd->add_option("--winsorize", winsorize_value,
                      "cap measures at this many SDs from the column mean");
      cmd->add_option("--p", p_value, "override the automatic neighbour count");
      cmd->add_option("--partitioner", partitioner_text, "hard (default) or fuzzy");
      cmd->add_option("--restarts", cfg.restarts, "partitioner restarts (default 50)");
      cmd->add_option("--seed", cfg.seed, "RNG seed (default 0)");
      cmd->add_flag("--write-embedding", cfg.write_embedding, "also write embedding.csv");
      cmd->add_flag("--dump-similarity", cfg.dump_similarity,
                    "also write similarity.txt (i j value coordinate list)");
      cmd->add_flag("--drop-outliers", cfg.drop_outliers,
                    "exclude flagged outliers from clustering (they get cluster 0)");
      cmd->add_option("--outlier-probe", probe_value,
                      "K for the outlier probe (0 disables, default min(n/3, 20))");
      cmd->add_flag("--timings", cfg.timings, "include stage timings in report.json");
    }
  };

  CLI::App* measures_cmd =
      app.add_subcommand("measures", "compute the measure table only (measures.csv)");
  add_common(measures_cmd, false);

  CLI::App* cluster_cmd =
      app.add_subcommand("cluster", "run the full clustering pipeline");
  add_common(cluster_cmd, true);

  CLI::App* synth_cmd =
      app.add_subcommand("synth", "generate the three-group synthetic benchmark");
  fbtc::ThreeGroupSpec spec;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth_cmd->add_option("-o,--out", synth_out, "output CSV path")->required();
  synth_cmd->add_option("--n-per-group", spec.n_per_group, "trajectories per group (default 15)");
  synth_cmd->add_option("--n-obs", spec.n_obs, "observations per trajectory (default 10)");
  synth_cmd->add_option("--seed", synth_seed, "RNG seed (default 0)");
  synth_cmd->add_option("--noise-sd", spec.noise_sd, "additive Gaussian noise SD (default 0)");
  synth_cmd->add_option("--separation", spec.separation,
                        "scale of the shape coefficients (default 1)");

  CLI::App* eval_cmd = app.add_subcommand("eval", "compare a clustering against labels");
  std::string pred_path, ref_path, eval_out;
  eval_cmd->add_option("--pred", pred_path, "assignments.csv or any id,cluster file")->required();
  eval_cmd->add_option("--ref", ref_path, "labeled CSV (id,...,label)")->required();
  eval_cmd->add_option("-o,--out", eval_out, "also write the report JSON here");

  CLI11_PARSE(app, argc, argv);

  try {
    // Load the config file first, then re-parse so explicit flags win.
    if (!config_path.empty() && (measures_cmd->parsed() || cluster_cmd->parsed())) {
      apply_config_file(config_path, cfg, measures_text);
      app.clear();
      CLI11_PARSE(app, argc, argv);
    }
    cfg.selection = parse_measures(measures_text);
    cfg.partitioner = partitioner_text == "fuzzy" ? fbtc::PartitionerKind::fuzzy
                                                  : fbtc::PartitionerKind::hard;
    if (partitioner_text != "fuzzy" && partitioner_text != "hard")
      fbtc::raise(fbtc::Errc::invalid_parameter,
                  "partitioner must be hard or fuzzy, got '" + partitioner_text + "'");
    if (weighting_text != "proximity" && weighting_text != "literal")
      fbtc::raise(fbtc::Errc::invalid_parameter,
                  "derivative weighting must be proximity or literal");
    cfg.weighting = weighting_text == "literal" ? fbtc::DerivativeWeighting::literal
                                                : fbtc::DerivativeWeighting::proximity;
    if (cluster_cmd->count("--midpoint") || measures_cmd->count("--midpoint"))
      cfg.midpoint = midpoint_value;
    if (cluster_cmd->count("--winsorize")) cfg.winsorize_limit = winsorize_value;
    if (cluster_cmd->count("--p")) cfg.p_override = p_value;
    if (probe_value >= 0) cfg.outlier_probe_k = probe_value;

    if (measures_cmd->parsed()) {
      if (cfg.input_path.empty())
        fbtc::raise(fbtc::Errc::invalid_parameter, "--input is required");
      if (cfg.output_dir.empty())
        fbtc::raise(fbtc::Errc::invalid_parameter, "--out is required");
      fbtc::RunResult r = fbtc::run_measures(cfg);
      std::cout << "wrote " << r.files_written.front() << " (" << r.raw_measures.rows()
                << " trajectories, " << r.raw_measures.cols() << " measures)" << std::endl;
      return 0;
    }

    if (cluster_cmd->parsed()) {
      if (cfg.input_path.empty())
        fbtc::raise(fbtc::Errc::invalid_parameter, "--input is required");
      if (cfg.output_dir.empty())
        fbtc::raise(fbtc::Errc::invalid_parameter, "--out is required");
      fbtc::RunResult r = fbtc::run_cluster(cfg);
      std::cout << "clustered " << r.report["n_clustered"] << " of " << r.report["n"]
                << " trajectories into K=" << cfg.k << " groups (p=" << r.p
                << ", wcss=" << r.clusters.wcss << ")" << std::endl;
      for (const auto& w : r.report["warnings"])
        std::cerr << "warning: " << w.get<std::string>() << std::endl;
      for (const auto& f : r.files_written) std::cout << "wrote " << f << std::endl;
      return 0;
    }

    if (synth_cmd->parsed()) {
      fbtc::LabeledDataset data = fbtc::generate_three_group(spec, synth_seed);
      fbtc::Dataset out;
      out.trajectories = data.trajectories;
      out.has_labels = true;
      out.labels = data.labels;
      fbtc::write_long_csv(synth_out, out);
      std::cout << "wrote " << synth_out << " (" << data.trajectories.size()
                << " trajectories, 3 groups)" << std::endl;
      return 0;
    }

    if (eval_cmd->parsed()) {
      auto pred = fbtc::load_labels_csv(pred_path);
      auto ref = fbtc::load_labels_csv(ref_path);
      std::map<std::string, int> ref_map(ref.begin(), ref.end());
      std::vector<int> found, truth;
      for (const auto& [id, label] : pred) {
        auto it = ref_map.find(id);
        if (it == ref_map.end())
          fbtc::raise(fbtc::Errc::parse_error, "id '" + id + "' missing from " + ref_path);
        found.push_back(label);
        truth.push_back(it->second);
      }
      fbtc::EvaluationReport rep = fbtc::evaluate(found, truth);
      json j;
      j["n"] = rep.n;
      j["accuracy"] = rep.accuracy;
      j["ari"] = rep.ari;
      j["reference_labels"] = rep.reference_label_order;
      j["found_labels"] = rep.found_label_order;
      j["contingency"] = rep.contingency;  // rows = reference
      j["reference_sizes"] = rep.reference_sizes;
      j["found_sizes"] = rep.found_sizes;
      std::string text = j.dump(2) + "\n";
      std::cout << text;
      if (!eval_out.empty()) fbtc::atomic_write_file(eval_out, text);
      return 0;
    }
  } catch (const fbtc::Error& e) {
    return fail(e.code_name(), e.what());
  } catch (const std::exception& e) {
    return fail("Internal", e.what());
  }
  return 0;
}
