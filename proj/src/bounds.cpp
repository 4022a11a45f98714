#include "kmtrack/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace kmtrack {

namespace {

// lhs <= rhs up to relative slack (floored at 1 so tiny magnitudes do not
// sharpen the check).
bool within_slack(double lhs, double rhs, double rel_slack) {
  const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
  return lhs <= rhs + rel_slack * scale;
}

}  // namespace

double contraction_coefficient(const std::vector<double>& lipschitz, int t, int tau) {
  if (t < 1 || t > static_cast<int>(lipschitz.size())) {
    throw std::out_of_range("contraction_coefficient: t out of range");
  }
  if (tau < 0 || tau > t) {
    throw std::out_of_range("contraction_coefficient: tau outside 0..t");
  }
  double prod = 1.0;
  for (int l = tau + 1; l <= t; ++l) prod *= lipschitz[static_cast<std::size_t>(l - 1)];
  return prod;
}

ResidualBoundLedger residual_bound_ledger(const TrackingRun& run, double rel_slack) {
  const int T = run.horizon();
  if (T < 1) throw std::invalid_argument("residual_bound_ledger: empty run");
  if (run.fixed_points.empty() || run.fixed_points.front().size() == 0) {
    throw std::invalid_argument(
        "residual_bound_ledger: run has no fixed-point trajectory");
  }

  ResidualBoundLedger led;
  led.r_step.reserve(static_cast<std::size_t>(T));
  led.cum_lhs.reserve(static_cast<std::size_t>(T));
  led.cum_rhs.reserve(static_cast<std::size_t>(T));
  led.initial_distance_sq =
      (run.iterates.front() - run.fixed_points.front()).squaredNorm();

  double alpha_sup = 0.0, e_sup = 0.0, sigma_sup = 0.0, m_sup = 0.0;
  led.alpha_check = std::numeric_limits<double>::infinity();
  led.alpha_bar = std::numeric_limits<double>::infinity();

  double lhs = 0.0;
  double rhs = led.initial_distance_sq;
  double sum_res_T_sq = 0.0, sum_res_F_sq = 0.0;
  led.pathwise_ok = true;
  led.min_slack = std::numeric_limits<double>::infinity();

  for (const StepRecord& s : run.steps) {
    const double a = s.alpha;
    const double r_t = a * s.error_bound * (4.0 * s.image_bound + a * s.error_bound) +
                       s.sigma * (4.0 * s.image_bound + s.sigma);
    led.r_step.push_back(r_t);

    lhs += a * (1.0 - a) * s.residual_T * s.residual_T;
    rhs += r_t;
    led.cum_lhs.push_back(lhs);
    led.cum_rhs.push_back(rhs);
    led.min_slack = std::min(led.min_slack, rhs - lhs);
    if (!within_slack(lhs, rhs, rel_slack)) led.pathwise_ok = false;

    sum_res_T_sq += s.residual_T * s.residual_T;
    sum_res_F_sq += s.residual_F * s.residual_F;
    alpha_sup = std::max(alpha_sup, a);
    e_sup = std::max(e_sup, s.error_bound);
    sigma_sup = std::max(sigma_sup, s.sigma);
    m_sup = std::max(m_sup, s.image_bound);
    led.alpha_check = std::min(led.alpha_check, a * (1.0 - a));
    led.alpha_bar = std::min(led.alpha_bar, (1.0 - a) / a);
  }

  const double Td = static_cast<double>(T);
  led.mean_weighted_residual = lhs / Td;
  led.mean_residual_T_sq = sum_res_T_sq / Td;
  led.mean_residual_F_sq = sum_res_F_sq / Td;
  led.r_sup = alpha_sup * e_sup * (4.0 * m_sup + alpha_sup * e_sup) +
              sigma_sup * (4.0 * m_sup + sigma_sup);
  led.mean_bound_weighted = led.initial_distance_sq / Td + led.r_sup;
  led.mean_bound_T_sq = led.mean_bound_weighted / led.alpha_check;
  led.mean_bound_F_sq = led.mean_bound_weighted / led.alpha_bar;
  led.asymptotic_mean_T_sq = led.r_sup / led.alpha_check;
  led.asymptotic_mean_F_sq = led.r_sup / led.alpha_bar;
  return led;
}

TrackingBoundLedger tracking_bound_ledger(const TrackingRun& run, double rel_slack) {
  const int T = run.horizon();
  if (T < 1) throw std::invalid_argument("tracking_bound_ledger: empty run");

  TrackingBoundLedger led;
  led.per_step_bound.reserve(static_cast<std::size_t>(T));
  led.per_step_ok = true;
  led.recursion_ok = true;
  led.max_violation = -std::numeric_limits<double>::infinity();

  double alpha_sup = 0.0, e_sup = 0.0, sigma_sup = 0.0;
  led.lipschitz_sup = 0.0;

  // Unrolled bound maintained incrementally:
  // B_t = L_t B_{t-1} + alpha_t e_t + sigma_t, starting from ||x_1 - x*_1||.
  double bound = run.tracking_error_at(1);
  for (int t = 1; t <= T; ++t) {
    const StepRecord& s = run.steps[static_cast<std::size_t>(t - 1)];
    const double inc = s.alpha * s.error_bound + s.sigma;
    const double one_step_rhs = s.lipschitz * run.tracking_error_at(t) + inc;
    const double measured = run.tracking_error_at(t + 1);
    if (!within_slack(measured, one_step_rhs, rel_slack)) led.recursion_ok = false;

    bound = s.lipschitz * bound + inc;
    led.per_step_bound.push_back(bound);
    led.max_violation = std::max(led.max_violation, measured - bound);
    if (!within_slack(measured, bound, rel_slack)) led.per_step_ok = false;

    alpha_sup = std::max(alpha_sup, s.alpha);
    e_sup = std::max(e_sup, s.error_bound);
    sigma_sup = std::max(sigma_sup, s.sigma);
    led.lipschitz_sup = std::max(led.lipschitz_sup, s.lipschitz);
  }

  led.gamma = alpha_sup * e_sup + sigma_sup;
  if (led.lipschitz_sup < 1.0) {
    led.asymptotic_ball = led.gamma / (1.0 - led.lipschitz_sup);
  }
  return led;
}

BoundLedger evaluate_bounds(const TrackingRun& run, double rel_slack) {
  return {residual_bound_ledger(run, rel_slack), tracking_bound_ledger(run, rel_slack)};
}

DecayReport decay_report(const TrackingRun& run) {
  const int T = run.horizon();
  if (T < 10) throw std::invalid_argument("decay_report: run length must be >= 10");

  DecayReport rep;
  // Dyadic prefixes T, T/2, T/4, ... down to 8, in increasing order.
  std::vector<int> lens;
  for (int len = T; len >= 8; len /= 2) lens.push_back(len);
  std::reverse(lens.begin(), lens.end());
  rep.prefix_lengths = lens;

  for (int len : lens) {
    double se = 0.0, ss = 0.0;
    for (int t = 0; t < len; ++t) {
      se += run.steps[static_cast<std::size_t>(t)].error_bound;
      ss += run.steps[static_cast<std::size_t>(t)].sigma;
    }
    rep.mean_error_prefix.push_back(se / static_cast<double>(len));
    rep.mean_drift_prefix.push_back(ss / static_cast<double>(len));
  }

  auto decaying = [](const std::vector<double>& means) {
    if (means.size() < 2) return false;
    for (std::size_t i = 1; i < means.size(); ++i) {
      if (means[i] > means[i - 1] * (1.0 + 1e-9) + 1e-15) return false;
    }
    return means.back() <= 0.75 * means.front() + 1e-15;
  };
  rep.error_decaying = decaying(rep.mean_error_prefix);
  rep.drift_decaying = decaying(rep.mean_drift_prefix);

  const int tail_start = T / 2;
  double st = 0.0, sf = 0.0;
  for (int t = tail_start; t < T; ++t) {
    const StepRecord& s = run.steps[static_cast<std::size_t>(t)];
    st += s.residual_T * s.residual_T;
    sf += s.residual_F * s.residual_F;
  }
  const double tail_n = static_cast<double>(T - tail_start);
  rep.tail_mean_residual_T_sq = st / tail_n;
  rep.tail_mean_residual_F_sq = sf / tail_n;

  double sigma_sup = 0.0, m_sup = 0.0, l_sup = 0.0;
  double alpha_check = std::numeric_limits<double>::infinity();
  double alpha_bar = std::numeric_limits<double>::infinity();
  for (const StepRecord& s : run.steps) {
    sigma_sup = std::max(sigma_sup, s.sigma);
    m_sup = std::max(m_sup, s.image_bound);
    l_sup = std::max(l_sup, s.lipschitz);
    alpha_check = std::min(alpha_check, s.alpha * (1.0 - s.alpha));
    alpha_bar = std::min(alpha_bar, (1.0 - s.alpha) / s.alpha);
  }
  const double ball = sigma_sup * (4.0 * m_sup + sigma_sup);
  rep.bound_residual_T_sq = ball / alpha_check;
  rep.bound_residual_F_sq = ball / alpha_bar;
  rep.terminal_tracking_error = run.final_tracking_error;
  if (l_sup < 1.0) rep.tracking_ball = sigma_sup / (1.0 - l_sup);
  return rep;
}

}  // namespace kmtrack
