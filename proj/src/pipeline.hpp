#pragma once

// Experiment configuration and the command pipelines shared by the CLI and
// the C API.
//
// An experiment document (schema "lsfts.experiment/1") names a model (preset,
// path or inline model document), T, seed, estimator settings, evaluation
// grids and an output directory. Every command writes the config verbatim as
// config.json, the merged configuration as resolved_config.json, its outputs,
// and manifest.json with SHA-256 hashes of inputs and outputs.

#include <cstdint>
#include <string>
#include <vector>

#include "estimator.hpp"
#include "json.hpp"
#include "model.hpp"

namespace lsfts {

struct ExperimentConfig {
  nlohmann::json doc;  // merged document (config + overrides)
  nlohmann::json model = {{"preset", "far1"}};
  long T = 512;
  std::uint64_t seed = 1;
  long burn_in = kDefaultBurnIn;
  int threads = 1;
  std::string out = "out";
  nlohmann::json estimator = "auto";
  nlohmann::json u_grid;      // null -> command default
  nlohmann::json omega_grid;  // null -> command default
  int render_points = 32;
  long replications = 20;
  std::string series;
  std::string figure;
  nlohmann::json evaluate = nlohmann::json::object();

  // Throws ConfigError on unknown keys or ill-typed values.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  nlohmann::json resolved() const;
};

TvFarmaModel resolve_model(const ExperimentConfig& cfg);
// "auto" selects default bandwidths; far1/far2 presets use the parabolic taper.
EstimatorConfig resolve_estimator(const ExperimentConfig& cfg, long T);
std::vector<double> resolve_grid(const nlohmann::json& spec, const std::vector<double>& fallback,
                                 const EstimatorConfig* est, const std::string& what);

struct Slice {
  double u = 0.0;
  double omega = 0.0;
};
std::vector<Slice> figure_slices(const std::string& figure);

// command: simulate | truth | estimate | evaluate | reproduce | check.
// config_text is the experiment document (empty for defaults); overrides is a
// JSON object merged over it (seed, threads, out, T, preset, series, figure,
// replications, render_points). Returns the command summary.
nlohmann::json run_command(const std::string& command, const std::string& config_text,
                           const nlohmann::json& overrides = nlohmann::json::object());

// Median over render points of the inter-quartile range of |kernel| across
// replications; amplitude[r] holds the rendered amplitudes of replication r.
double median_iqr(const std::vector<std::vector<double>>& amplitude);

}  // namespace lsfts
