#pragma once

#include "kmtrack/tracker.hpp"

#include <optional>
#include <vector>

namespace kmtrack {

/// Cumulative residual bound for averaged (non-expansive) sequences: at every
/// prefix, sum_t alpha_t (1-alpha_t) ||x_t - T_t(x_t)||^2 is at most
/// ||x_1 - x*_1||^2 + sum_t r_t with
/// r_t = alpha_t e_t (4 M_t + alpha_t e_t) + sigma_t (4 M_t + sigma_t),
/// plus the mean and asymptotic forms built from the supremal constants.
struct ResidualBoundLedger {
  std::vector<double> r_step;    // r_t
  std::vector<double> cum_lhs;   // prefix sums of alpha(1-alpha) residual_T^2
  std::vector<double> cum_rhs;   // ||x_1 - x*_1||^2 + prefix sums of r_t

  double initial_distance_sq = 0.0;  // ||x_1 - x*_1||^2
  double mean_weighted_residual = 0.0;  // (1/T) sum alpha(1-alpha) res_T^2
  double mean_residual_T_sq = 0.0;      // (1/T) sum res_T^2
  double mean_residual_F_sq = 0.0;      // (1/T) sum res_F^2

  double r_sup = 0.0;        // r from supremal constants
  double alpha_check = 0.0;  // inf alpha_t (1 - alpha_t)
  double alpha_bar = 0.0;    // inf (1 - alpha_t) / alpha_t

  double mean_bound_weighted = 0.0;  // (1/T)||x_1-x*_1||^2 + r_sup
  double mean_bound_T_sq = 0.0;      // mean_bound_weighted / alpha_check
  double mean_bound_F_sq = 0.0;      // mean_bound_weighted / alpha_bar
  double asymptotic_mean_T_sq = 0.0;  // r_sup / alpha_check
  double asymptotic_mean_F_sq = 0.0;  // r_sup / alpha_bar

  bool pathwise_ok = false;  // cum_lhs <= cum_rhs at every prefix
  double min_slack = 0.0;    // min over prefixes of (cum_rhs - cum_lhs)
};

/// Per-step tracking bound for contractive sequences: with
/// c^(t,tau) = prod_{l=tau+1..t} L_l (and 1 for tau = t),
///   ||x_{t+1} - x*_{t+1}|| <= c^(t,0) ||x_1 - x*_1||
///                             + sum_tau c^(t,tau) (alpha_tau e_tau + sigma_tau),
/// together with the one-step recursion it unrolls and, when sup L_t < 1,
/// the asymptotic ball gamma / (1 - L).
struct TrackingBoundLedger {
  std::vector<double> per_step_bound;  // bound on ||x_{t+1} - x*_{t+1}||, t = 1..T
  bool per_step_ok = false;
  bool recursion_ok = false;
  double max_violation = 0.0;  // max over t of measured - bound (<= 0 when ok)

  double gamma = 0.0;          // sup(alpha_t) sup(e_t) + sup(sigma_t)
  double lipschitz_sup = 1.0;  // sup L_t
  std::optional<double> asymptotic_ball;  // gamma / (1 - L), absent when L >= 1
};

/// Coefficient c^(t,tau) = prod_{l=tau+1..t} L_l (1 when tau == t).
double contraction_coefficient(const std::vector<double>& lipschitz, int t, int tau);

ResidualBoundLedger residual_bound_ledger(const TrackingRun& run,
                                          double rel_slack = 1e-7);
TrackingBoundLedger tracking_bound_ledger(const TrackingRun& run,
                                          double rel_slack = 1e-7);

struct BoundLedger {
  ResidualBoundLedger residual;
  TrackingBoundLedger tracking;

  bool satisfied() const {
    return residual.pathwise_ok && tracking.per_step_ok && tracking.recursion_ok;
  }
};

BoundLedger evaluate_bounds(const TrackingRun& run, double rel_slack = 1e-7);

/// Vanishing-error / vanishing-drift diagnostics: prefix means of e_t and
/// sigma_t over dyadic windows, decay flags, and the tail residual levels
/// against the sigma-only asymptotic bounds (and the drift ball sigma/(1-L)
/// for contractive runs).
struct DecayReport {
  std::vector<int> prefix_lengths;
  std::vector<double> mean_error_prefix;
  std::vector<double> mean_drift_prefix;
  bool error_decaying = false;
  bool drift_decaying = false;

  double tail_mean_residual_T_sq = 0.0;  // mean over the last half
  double tail_mean_residual_F_sq = 0.0;
  double bound_residual_T_sq = 0.0;  // sigma (4M + sigma) / alpha_check
  double bound_residual_F_sq = 0.0;  // sigma (4M + sigma) / alpha_bar
  double terminal_tracking_error = 0.0;
  std::optional<double> tracking_ball;  // sigma / (1 - L) for contractive runs
};

/// Requires a run of length >= 10.
DecayReport decay_report(const TrackingRun& run);

}  // namespace kmtrack
