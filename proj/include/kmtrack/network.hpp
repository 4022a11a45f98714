#pragma once

#include "kmtrack/problems.hpp"
#include "kmtrack/tracker.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

namespace kmtrack {

/// Fixed 6-node / 8-directed-link topology with two traffic flows
/// (node 1 -> node 3 and node 4 -> node 6, 0-based 0->2 and 3->5). Flow 0 has
/// two link-disjoint paths; flow 1 has a two-hop path plus a detour. The
/// decision variable stacks the two injection rates and the per-flow link
/// rates: x = [z_0, z_1, r(link, flow 0)..., r(link, flow 1)...], dim 18.
struct Network {
  static constexpr int kNodes = 6;
  static constexpr int kLinks = 8;
  static constexpr int kFlows = 2;

  Matrix incidence;  // kNodes x kLinks, +1 leaves node / -1 enters node
  std::array<std::pair<int, int>, kLinks> links;  // (tail, head), 0-based
  std::array<int, kFlows> source;
  std::array<int, kFlows> dest;
  /// Links a flow's traffic may use (links from which the destination is
  /// reachable); exogenous traffic is supported on the same links.
  std::array<std::vector<int>, kFlows> usable_links;

  static constexpr int dim() { return kFlows + kFlows * kLinks; }
  static int z_index(int flow) { return flow; }
  static int r_index(int link, int flow) { return kFlows + flow * kLinks + link; }

  /// Net node flow of a per-link load vector (incidence * load).
  Point node_flow(const Point& link_load) const;
};

Network build_network();

/// Scenario constants: utility weights, base link costs, per-flow exogenous
/// means (columns sum to the documented per-link totals).
struct ScenarioParams {
  Point kappa;      // utility weights per flow
  Point cost_base;  // base link cost a
  Matrix exo_mean;  // kLinks x kFlows
  static ScenarioParams defaults(const Network& net);
};

/// Per-link channel/power draw and the derived capacity log2(1 + p h).
struct LinkState {
  Point gain;      // normalized channel gain per link
  Point power;     // transmit power of the tail node, per link
  Point capacity;  // log2(1 + p h)
};

/// Sampled exogenous traffic, perturbed costs and the (constant) utility
/// weights at one time step.
struct TrafficState {
  Matrix exogenous;  // kLinks x kFlows, clamped >= 0
  Point cost;        // perturbed link costs a_t, clamped > 0
  Point kappa;       // utility weights
};

/// Temporal variation levels (standard deviations) plus the bandit-feedback
/// settings and the scenario seed.
struct VariationConfig {
  double channel_std = 0.0;
  double power_std = 0.0;
  double traffic_std = 0.0;
  double cost_scale = 0.0;
  double bandit_delta = 0.02;
  int bandit_evals = 16;
  std::uint64_t seed = 0;

  /// Variance profile used by the sigma presets: one scale knob multiplies
  /// all four standard deviations with fixed weights.
  static VariationConfig scaled(double scale, std::uint64_t seed);
};

/// Draws the link and traffic state at step t; deterministic in (cfg.seed, t).
std::pair<LinkState, TrafficState> sample_timestep(const Network& net,
                                                   const ScenarioParams& params,
                                                   const VariationConfig& cfg, int t);

/// Value and gradient of the scenario objective
///   sum_s -kappa_s log(1 + z_s) + a' (r_0 + r_1).
double utility_value(const Network& net, const Point& x, const Point& kappa,
                     const Point& cost);
Point utility_gradient(const Network& net, const Point& x, const Point& kappa,
                       const Point& cost);

/// Feasible set at one step: flow conservation (affine), per-link capacity
/// halfspaces on the total load, and nonnegativity. Throws, naming the link,
/// when a link's capacity cannot carry its exogenous load.
std::shared_ptr<const FeasibleSet> scenario_feasible_set(const Network& net,
                                                         const LinkState& link,
                                                         const TrafficState& traffic);

/// Scenario objective as a SmoothConvexFunction (K = max kappa).
SmoothConvexFunction scenario_objective(const Network& net, const TrafficState& traffic);

/// Full inexact projected-gradient step operator at step t. `bandit_constant`
/// is the calibrated concentration constant; bandit_evals == 0 selects the
/// exact-gradient mode.
StepOperator scenario_operator(const Network& net, const ScenarioParams& params,
                               const VariationConfig& cfg, double nu,
                               double bandit_constant, int t);

/// Operator sequence for a whole run (generator form; valid to horizon + 1).
OperatorSequence scenario_sequence(const Network& net, const ScenarioParams& params,
                                   const VariationConfig& cfg, double nu,
                                   double bandit_constant, int horizon);

/// A reasonable feasible starting point for step-1 problems.
Point scenario_start(const Network& net, const ScenarioParams& params,
                     const VariationConfig& cfg);

/// Calibrates the bandit concentration constant for the scenario's utility
/// at the configured (delta, evals); deterministic.
double scenario_bandit_constant(const Network& net, const ScenarioParams& params,
                                double delta, int evals);

/// Batch-solved optimizer trajectory over `window` steps (warm-started).
std::vector<Point> optimizer_trajectory(const Network& net, const ScenarioParams& params,
                                        const VariationConfig& cfg, double nu,
                                        int window, double tol, long max_iter);

/// Result of matching a drift target by scaling the variance profile.
struct SigmaPreset {
  double target = 0.0;        // requested sup-drift
  double scale = 0.0;         // variance-profile scale that attains it
  double measured_drift = 0.0;   // robust (95th percentile) drift at `scale`
  double mean_solution_norm = 0.0;
  double variation_pct = 0.0;  // 100 * measured_drift / mean_solution_norm
};

/// Bisects the variance scale until the robust sup-drift of the batch-solved
/// optimizer sequence matches `target_sigma` within 10%.
SigmaPreset calibrate_sigma_preset(const Network& net, const ScenarioParams& params,
                                   double target_sigma, double nu, int window,
                                   std::uint64_t calib_seed);

}  // namespace kmtrack
