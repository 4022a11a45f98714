#pragma once

#include "kmtrack/feasible_set.hpp"
#include "kmtrack/operators.hpp"
#include "kmtrack/rng.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

namespace kmtrack {

/// Differentiable convex objective with declared curvature bounds: the
/// gradient is `smoothness`-Lipschitz and, when `strong_convexity` > 0, the
/// function is strongly convex with that constant.
struct SmoothConvexFunction {
  std::function<double(const Point&)> value;
  std::function<Point(const Point&)> gradient;
  double smoothness = 1.0;
  double strong_convexity = 0.0;
};

/// Gradient measurement model. Exact returns the true gradient; Noisy returns
/// the gradient plus a per-step random direction of magnitude exactly
/// `noise_magnitude`; Bandit estimates the gradient from antipodal function
/// evaluations; Custom wraps an external estimator with its own certified
/// bound. Emissions are pure functions of (x, step) under the seed.
struct GradientOracle {
  enum class Mode { Exact, Noisy, Bandit, Custom };
  Mode mode = Mode::Exact;
  double noise_magnitude = 0.0;  // Noisy: injected magnitude == certified bound
  double bandit_delta = 0.0;
  int bandit_evals = 0;
  double bandit_constant = 0.0;  // calibrated C in e_y = K*delta + C*m/sqrt(n)
  std::uint64_t seed = 0;
  using CustomEmit =
      std::function<Point(const SmoothConvexFunction&, const Point&, std::uint64_t)>;
  CustomEmit custom_emit;
  double custom_bound = 0.0;

  static GradientOracle exact() { return {}; }
  static GradientOracle noisy(double e_y, std::uint64_t seed);
  static GradientOracle bandit(double delta, int evals, double constant,
                               std::uint64_t seed);
  static GradientOracle custom(CustomEmit emit, double certified_e_y);

  Point emit(const SmoothConvexFunction& f, const Point& x, std::uint64_t step) const;

  /// Certified deviation bound e_y for emissions (0 for Exact).
  double certified_bound(double smoothness, Eigen::Index dim) const;
};

/// Nonsmooth convex term for proximal steps. L1 and Zero have closed-form
/// proximal points; Custom falls back to the iterative inner solver.
struct ProxFunction {
  enum class Form { Zero, L1, Custom };
  Form form = Form::Zero;
  double l1_weight = 0.0;
  std::function<double(const Point&)> value;
  std::function<Point(const Point&)> subgradient;

  static ProxFunction zero();
  static ProxFunction l1(double weight);
  static ProxFunction custom(std::function<double(const Point&)> value,
                             std::function<Point(const Point&)> subgradient);
};

/// argmin_{x in X} { g(x) + (1/(2 nu)) ||x - y||^2 }. Closed forms where
/// available; otherwise projected subgradient with averaging (inner tolerance
/// `inner_tol`, at most `max_inner` iterations; throws on non-convergence
/// with the final inner residual).
Point prox(const ProxFunction& g, const FeasibleSet& X, double nu, const Point& y,
           double inner_tol = 1e-10, long max_inner = 100000);

/// Gradient descent step I - nu grad f in averaged form: alpha = nu K / 2,
/// base T = I - (2/K) grad f, over the full space. Requires 0 < nu < 2/K.
AveragedMap gradient_step_averaged(const SmoothConvexFunction& f, double nu,
                                   Eigen::Index dim);

/// x -> 2 e_y / K, the operator-level error bound for an unconstrained
/// gradient step fed by measurements with error at most e_y.
double error_transfer_unconstrained(double e_y, double smoothness);

/// Operator-level error bound for the projected/proximal gradient step:
/// (2 nu - nu^2 K / 2) e_y.
double error_transfer_projected(double e_y, double nu, double smoothness);

/// Averaging parameter of the projected/proximal gradient step,
/// 1 / (2 - nu K / 2).
double projected_gradient_alpha(double nu, double smoothness);

/// Inexact averaged operator produced by a gradient-type step: the exact
/// averaged decomposition plus, for non-exact oracles, the approximate base
/// map with its certified error bound.
struct InexactAveragedOperator {
  double alpha = 0.5;
  AveragedMap map;                      // exact averaged form
  std::optional<InexactOracle> oracle;  // absent in Exact mode
  double error_bound = 0.0;             // e_T (0 in Exact mode)
};

/// x -> proj_X(x - nu y) with y from the oracle, as an inexact averaged
/// operator with alpha = 1/(2 - nu K/2). Requires 0 < nu < 2/K and a
/// certified oracle.
InexactAveragedOperator projected_gradient_operator(
    const SmoothConvexFunction& f, std::shared_ptr<const FeasibleSet> X, double nu,
    const GradientOracle& oracle, std::uint64_t step = 0);

/// x -> prox_{g,X,nu}(x - nu y); same averaging parameter and error transfer
/// as the projected gradient step.
InexactAveragedOperator forward_backward_operator(
    const SmoothConvexFunction& f, const ProxFunction& g,
    std::shared_ptr<const FeasibleSet> X, double nu, const GradientOracle& oracle,
    std::uint64_t step = 0);

/// Time-indexed problem family: objective, feasible set and (when available
/// in closed form) the minimizer at each t. Generators must stay valid for
/// t = 1 .. horizon + 1 so runs can record the drift of the final step.
struct TimeVaryingProblem {
  int horizon = 0;
  std::function<SmoothConvexFunction(int)> objective_at;
  std::function<std::shared_ptr<const FeasibleSet>(int)> domain_at;
  std::function<std::optional<ProxFunction>(int)> prox_term_at;  // may return nullopt
  std::optional<std::function<Point(int)>> fixed_point_at;       // closed form
  double smoothness = 1.0;
  double strong_convexity = 0.0;
  Point start;
};

/// Quadratic family f_t(x) = 0.5 (x - c_t)' Q (x - c_t) with spectrum in
/// [k, K] and centers c_{t+1} = c_t + drift. Unconstrained instances expose
/// closed-form fixed points c_t. `rotated` conjugates the spectrum by a
/// random orthogonal matrix; otherwise Q is diagonal.
TimeVaryingProblem make_drifting_quadratic(Eigen::Index m, const Point& drift,
                                           double K, double k, int horizon,
                                           std::uint64_t seed,
                                           std::shared_ptr<const FeasibleSet> domain = nullptr,
                                           bool rotated = true);

/// Same quadratic family (diagonal Q) plus an l1 term; fixed points are the
/// per-coordinate soft-thresholded centers.
TimeVaryingProblem make_drifting_lasso(Eigen::Index m, const Point& drift, double K,
                                       double k, double l1_weight, int horizon,
                                       std::uint64_t seed);

/// Measured vs declared contraction modulus of the projected gradient map.
struct ModulusReport {
  double measured = 0.0;       // sampled lower bound on the true modulus
  double max_form = 0.0;       // max(|1 - nu k|, |1 - nu K|)
  double min_form = 0.0;       // min(|1 - nu k|, |1 - nu K|)
  bool min_form_violated = false;  // measured exceeds the min form
};

ModulusReport gradient_modulus_report(const SmoothConvexFunction& f,
                                      const FeasibleSet& X, double nu, int samples,
                                      std::uint64_t seed);

/// Optional sampler for the declared curvature constants: flags pairs where
/// the gradient is not K-Lipschitz or the strong-convexity inequality fails.
struct CurvatureReport {
  double max_smoothness_ratio = 0.0;   // sup ||grad f(x)-grad f(y)|| / ||x-y||
  double min_convexity_ratio = 0.0;    // inf <grad diff, x-y> / ||x-y||^2
  bool smoothness_violated = false;    // ratio exceeds declared K
  bool convexity_violated = false;     // ratio falls below declared k
};

CurvatureReport check_declared_curvature(const SmoothConvexFunction& f,
                                         Eigen::Index dim, int samples,
                                         std::uint64_t seed, double rel_tol = 1e-9);

}  // namespace kmtrack
