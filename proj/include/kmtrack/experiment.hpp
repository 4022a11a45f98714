#pragma once

#include "kmtrack/bounds.hpp"
#include "kmtrack/config.hpp"
#include "kmtrack/tracker.hpp"

#include <optional>
#include <string>
#include <vector>

namespace kmtrack {

/// One row of the grid summary table.
struct RunSummary {
  std::string cell;  // "s<sigma>_e<error>"
  std::uint64_t seed = 0;
  bool ok = false;
  double mean_residual_F_sq = 0.0;
  double mean_residual_T_sq = 0.0;
  double thm1_slack = 0.0;      // min prefix slack (rhs - lhs)
  double thm2_max_slack = 0.0;  // max over t of measured - bound (<= 0 good)
  double asymptotic_ball = 0.0;  // NaN when the sequence is not contractive
  double final_tracking_error = 0.0;
  double wall_seconds = 0.0;
  std::string error;  // failure description when !ok
};

struct CellOutcome {
  RunSummary summary;
  std::optional<TrackingRun> run;
  std::optional<BoundLedger> ledger;
  std::string csv_path;
};

struct ExperimentOutcome {
  std::vector<CellOutcome> cells;
  bool all_ok = false;
  std::string summary_path;
};

std::string cell_label(double sigma, double error);

/// Executes the full grid (sigma x error x seed), one run per cell, writing
/// one trace CSV per run plus a summary.csv. Per-cell failures are collected
/// in the summaries instead of aborting the grid. Deterministic per
/// (config, seed), independent of grid_parallel.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

/// Builds the operator sequence and start point for one grid cell; exposed
/// for tests and the acceptance suite.
struct CellSpec {
  OperatorSequence sequence;
  Point start;
  RunOptions options;
};
CellSpec build_cell(const ExperimentConfig& cfg, double sigma, double error,
                    std::uint64_t seed);

/// Writes the per-step trace with columns exactly
///   t, residual_F, residual_T, tracking_error, sigma_t, e_T_t, alpha_t,
///   thm1_cum_lhs, thm1_cum_rhs, thm2_bound
/// (12 significant digits, LF line endings).
void write_csv(const TrackingRun& run, const BoundLedger& ledger,
               const std::string& path);

void write_summary_csv(const std::vector<RunSummary>& rows, const std::string& path);

/// Parses rows written by write_summary_csv (used by the summarize command).
std::vector<RunSummary> read_summary_csv(const std::string& path);

}  // namespace kmtrack
