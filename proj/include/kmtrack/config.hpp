#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kmtrack {

/// Experiment description parsed from the sectioned key-value config format
/// (see README for the schema). The grid is sigma presets x error levels x
/// seeds; semantics of the two axes depend on the scenario.
struct ExperimentConfig {
  // [experiment]
  std::string scenario = "drifting_quadratic";
  int horizon = 100;
  double step_size = 0.5;  // nu
  std::vector<std::uint64_t> seeds = {1};
  std::string out_dir = "runs";

  // [grid]
  std::vector<double> sigma_levels = {0.0};
  std::vector<double> error_levels = {0.0};

  // [oracle]
  double fixed_point_tol = 1e-9;
  long fixed_point_max_iter = 1000000;

  // [quadratic] (also the smooth part of forward_backward)
  int dimension = 2;
  double smoothness = 1.0;
  double strong_convexity = 1.0;

  // [forward_backward]
  double l1_weight = 0.1;

  // [network]
  double bandit_delta = 0.02;
  int calibration_window = 96;

  int grid_parallel = 1;
};

/// Parses a config file; throws std::runtime_error with "<path>:<line>:"
/// diagnostics on malformed lines, unknown sections or unknown keys.
ExperimentConfig parse_config_file(const std::string& path);

/// Same parser over an in-memory string (diagnostics use `name`).
ExperimentConfig parse_config_text(const std::string& text, const std::string& name);

/// Structural validation (ranges, non-empty lists, known scenario); throws
/// std::runtime_error naming the offending field.
void validate_config(const ExperimentConfig& cfg);

}  // namespace kmtrack
