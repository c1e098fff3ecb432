#pragma once

#include "countica/fit.hpp"
#include "countica/scenario.hpp"

#include <string>
#include <vector>

namespace countica {

/// Experiment description: a scenario (or explicit oracle model), fit
/// configuration, restart count and output directory. The content hash
/// fingerprints the manifest plus any referenced input files.
struct ExperimentManifest {
  ScenarioSpec scenario;
  bool use_model_file = false;
  std::string model_path;  // oracle model when use_model_file
  int n = 150;
  FitConfig fit;
  int restarts = 10;
  int projections = 512;
  int eval_n = 150;                 // simulated trajectories per side for SW
  std::string out_dir;
  struct SweepPoint {
    int n = 0;
    int T = 0;
  };
  std::vector<SweepPoint> sweep;    // optional timing sweep over (n, T)

  std::string content_hash;  // filled by load/run

  static ExperimentManifest from_json_string(const std::string& text);
  static ExperimentManifest load(const std::string& path);
};

struct RestartOutcome {
  std::uint64_t seed = 0;
  double mean_cosine = 0.0;
  double sliced_wasserstein = 0.0;
  double final_elbo = 0.0;
  int epochs = 0;
  double seconds_per_epoch = 0.0;
};

struct ExperimentSummary {
  std::vector<RestartOutcome> restarts;
  double mean_cosine = 0.0;  // across restarts
  double best_cosine = 0.0;
  double mean_sliced_wasserstein = 0.0;
  std::string content_hash;
};

/// simulate -> fit (R restarts) -> evaluate. Writes the oracle model, the
/// dataset, one recovery report per restart, summary.json (deterministic
/// given the manifest) and timing.json (wall clock, including the optional
/// (n, T) sweep). Any stage failure rethrows with the stage name.
ExperimentSummary run_experiment(const ExperimentManifest& manifest);

FitConfig fit_config_from_json_string(const std::string& text);
std::string fit_config_to_json_string(const FitConfig& config);

}  // namespace countica
