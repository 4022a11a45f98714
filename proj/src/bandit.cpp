#include "kmtrack/bandit.hpp"

#include "kmtrack/rng.hpp"


#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace kmtrack {

BanditEstimate bandit_gradient(const ValueFn& value, const Point& x, double delta,
                               int evals, std::mt19937_64& rng, double smoothness,
                               double concentration_constant,
                               const std::function<bool(const Point&)>& feasible) {
  if (!(delta > 0.0)) throw std::invalid_argument("bandit_gradient: delta must be > 0");
  if (evals < 2) throw std::invalid_argument("bandit_gradient: need at least 2 evaluations");
  const Eigen::Index m = x.size();
  const int pairs = evals / 2;

  Point estimate = Point::Zero(m);
  for (int p = 0; p < pairs; ++p) {
    const Point u = rng::unit_vector(rng, m);
    const Point xp = x + delta * u;
    const Point xm = x - delta * u;
    if (feasible && (!feasible(xp) || !feasible(xm))) {
      throw std::runtime_error("bandit_gradient: evaluation point infeasible");
    }
    const double slope = (value(xp) - value(xm)) / (2.0 * delta);
    estimate += static_cast<double>(m) * slope * u;
  }
  estimate /= static_cast<double>(pairs);

  const double e_y = smoothness * delta +
                     concentration_constant * static_cast<double>(m) /
                         std::sqrt(static_cast<double>(evals));
  return {std::move(estimate), e_y};
}

double calibrate_bandit_constant(const ValueFn& value,
                                 const std::function<Point(const Point&)>& gradient,
                                 const std::vector<Point>& probes, double delta,
                                 int evals, double smoothness, int trials,
                                 std::uint64_t seed) {
  if (probes.empty()) throw std::invalid_argument("calibrate_bandit_constant: no probes");
  const Eigen::Index m = probes.front().size();
  std::vector<double> scores;
  scores.reserve(probes.size() * static_cast<std::size_t>(trials));
  auto rng = rng::engine(seed, rng::kCalibration);
  for (const Point& p : probes) {
    const Point g = gradient(p);
    for (int trial = 0; trial < trials; ++trial) {
      const BanditEstimate est =
          bandit_gradient(value, p, delta, evals, rng, smoothness, 0.0);
      const double err = (est.gradient - g).norm();
      const double excess = std::max(0.0, err - smoothness * delta);
      scores.push_back(excess * std::sqrt(static_cast<double>(evals)) /
                       static_cast<double>(m));
    }
  }
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(scores.size());
  double var = 0.0;
  for (double s : scores) var += (s - mean) * (s - mean);
  var /= static_cast<double>(scores.size());
  // 3-sigma quantile of the measured scores, with headroom so certificates
  // hold on fresh draws.
  return (mean + 3.0 * std::sqrt(var)) * 1.25;
}

}  // namespace kmtrack
