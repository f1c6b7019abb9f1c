#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pseg/model.hpp"

namespace pseg {

// Algorithm parameters shared by the experiment runner. Radii describe
// centered boxes; theta/gamma default from the model's noise level
// (1/(8 sigma^2), or 1 when sigma = 0).
struct ExperimentParams {
  int patch_radius = 0;        // intensity patch d
  int label_patch_radius = 0;  // label patch d'
  int search_radius = 1;       // neighborhood N
  int block_side = 3;
  std::optional<double> theta;
  std::optional<double> gamma;
  double alpha = 0.0;
  double beta = 1.0;
  int max_outer = 50;
  double primal_tol = 1e-3;
  double step_size = 0.1;
  int inner_iters = 10;
  std::string init = "wmv";  // or "cold"
};

// Parameter sweep over (gamma, beta, alpha, search radius) evaluated on a
// train/validation split of one sampled pool; wmv and admm only.
struct GridSpec {
  std::vector<double> gammas;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<int> search_radii;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
};

struct ExperimentConfig {
  explicit ExperimentConfig(GenerativeModel m) : model(std::move(m)) {}

  GenerativeModel model;
  std::size_t n_train = 1;
  std::size_t n_trials = 1;
  std::vector<std::string> algorithms;  // canonical order mv, nn, wmv, admm
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> output_dir;
  ExperimentParams params;
  std::optional<GridSpec> grid;
};

struct TrialRow {
  std::size_t trial = 0;
  std::string algorithm;
  double dice = 0.0;
  double pixel_error = 0.0;
  bool converged = true;  // admm only; trivially true elsewhere
  bool failed = false;
  std::string message;
};

struct ExperimentResult {
  std::vector<TrialRow> rows;
  std::string csv;
  nlohmann::json summary;
  std::optional<std::string> grid_csv;
  // Every admm trial ended without convergence (drives CLI exit code 4).
  bool admm_all_nonconverged = false;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& doc,
                                         const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& file);

// Runs n_trials rounds of sample-train-segment-score for every requested
// algorithm (same data within a trial), then aggregates. Deterministic given
// the seed and invariant to both worker count and the order algorithms are
// listed. Contract violations inside a trial become failure rows, not
// aborts; bad settings (ConfigError) abort the whole run. With `grid` set,
// runs the sweep instead of trials. Files (results.csv / grid.csv,
// summary.json) are written when output_dir is set.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace pseg
