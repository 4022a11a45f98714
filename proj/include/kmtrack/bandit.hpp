#pragma once

#include "kmtrack/point.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <utility>

namespace kmtrack {

using ValueFn = std::function<double(const Point&)>;

struct BanditEstimate {
  Point gradient;
  double certified_bound = 0.0;  // e_y = K*delta + C*m/sqrt(n)
};

/// Multi-point gradient estimator from antipodal function evaluations.
///
/// Uses floor(evals/2) antipodal direction pairs; directions are drawn as
/// columns of random orthogonal matrices so that every full block of m pairs
/// reproduces gradients of quadratics exactly. The certified bound combines
/// the smoothness bias term with a measured concentration constant.
///
/// `feasible` guards the evaluation points (log domains etc.); a violating
/// point raises an error.
BanditEstimate bandit_gradient(const ValueFn& value, const Point& x, double delta,
                               int evals, std::mt19937_64& rng, double smoothness,
                               double concentration_constant,
                               const std::function<bool(const Point&)>& feasible = {});

/// Measures the concentration constant C for the certificate
/// e_y = K*delta + C*m/sqrt(n): runs Monte-Carlo estimates at the probe
/// points against the exact gradient and returns the 3-sigma quantile of
/// (error - K*delta)*sqrt(n)/m, inflated by a 1.25 safety factor.
double calibrate_bandit_constant(const ValueFn& value,
                                 const std::function<Point(const Point&)>& gradient,
                                 const std::vector<Point>& probes, double delta,
                                 int evals, double smoothness, int trials,
                                 std::uint64_t seed);

}  // namespace kmtrack
