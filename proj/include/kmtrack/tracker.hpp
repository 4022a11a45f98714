#pragma once

#include "kmtrack/operators.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace kmtrack {

/// One time step of the operator sequence: the exact averaged map, the
/// approximate oracle when the step is inexact, and the per-step constants
/// the tracking bounds consume.
struct StepOperator {
  AveragedMap map;                      // exact F_t = (1-alpha_t) I + alpha_t T_t
  std::optional<InexactOracle> oracle;  // T_t approximation with certified bound
  double lipschitz = 1.0;               // declared L_t in [0,1]
  std::optional<double> image_bound;    // certified M_t when the domain is compact
  std::optional<Point> fixed_point;     // closed-form fixed point when known

  double alpha() const { return map.alpha(); }
  double error_bound() const { return oracle ? oracle->error_bound : 0.0; }
};

/// Time-indexed operator family. The generator must be valid for
/// t = 1 .. length + 1; step length + 1 only supplies the final fixed point.
/// Generators must be pure in t so runs are reproducible.
class OperatorSequence {
 public:
  OperatorSequence(int length, std::function<StepOperator(int)> generator);

  int length() const { return length_; }

  /// Operator at step t (1-based); validates the declared constants.
  StepOperator at(int t) const;

 private:
  int length_;
  std::function<StepOperator(int)> generator_;
};

/// Per-step record of everything the bound ledgers need.
struct StepRecord {
  double alpha = 0.0;
  double lipschitz = 1.0;
  double image_bound = 0.0;   // M_t (certified or measured + 10%)
  double error_bound = 0.0;   // e_T,t
  double sigma = 0.0;         // ||x*_{t+1} - x*_t||
  double residual_F = 0.0;    // ||x_t - F_t(x_t)||
  double residual_T = 0.0;    // ||x_t - T_t(x_t)||
  double tracking_error = 0.0;  // ||x_t - x*_t||
};

/// Full record of one run: iterates x_1..x_{T+1}, the fixed-point trajectory
/// used for the bounds, and per-step constants/residuals.
struct TrackingRun {
  std::vector<Point> iterates;      // size T+1
  std::vector<Point> fixed_points;  // size T+1
  std::vector<StepRecord> steps;    // size T
  double final_tracking_error = 0.0;  // ||x_{T+1} - x*_{T+1}||

  int horizon() const { return static_cast<int>(steps.size()); }
  /// ||x_t - x*_t|| for t = 1..T+1.
  double tracking_error_at(int t) const;
};

/// Drifts sigma_t = ||x*_{t+1} - x*_t|| of a fixed-point sequence
/// (length n-1 for n points).
std::vector<double> drift_sequence(const std::vector<Point>& fixed_points);

/// Batch solve for a point with ||x - F(x)|| <= tol. Contractions (declared
/// modulus < 1) iterate F directly; general averaged maps iterate the
/// half-averaged map (I + F)/2. Deterministic given (F, x0); throws when
/// max_iter is exhausted, carrying the last residual.
Point fixed_point_oracle(const AveragedMap& F, const Point& x0, double tol,
                         long max_iter);

struct RunOptions {
  double fixed_point_tol = 1e-9;
  long fixed_point_max_iter = 1000000;
  /// Tolerance for the domain-membership check after every step.
  double domain_tol = 1e-6;
  /// Fixed-point trajectories are required by the ledgers; disable only for
  /// throwaway runs.
  bool track_fixed_points = true;
};

/// Runs x_{t+1} = (1-alpha_t) x_t + alpha_t T^_t(x_t) for t = 1..T, recording
/// residuals against the exact maps and the warm-started fixed-point
/// trajectory. Throws if an iterate leaves the declared domain, citing the
/// step.
TrackingRun run_inexact_km(const OperatorSequence& seq, const Point& x1,
                           const RunOptions& opts = {});

}  // namespace kmtrack
