#include "kmtrack/tracker.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace kmtrack {

OperatorSequence::OperatorSequence(int length, std::function<StepOperator(int)> generator)
    : length_(length), generator_(std::move(generator)) {
  if (length_ < 1) throw std::invalid_argument("OperatorSequence: length must be >= 1");
  if (!generator_) throw std::invalid_argument("OperatorSequence: null generator");
}

StepOperator OperatorSequence::at(int t) const {
  if (t < 1 || t > length_ + 1) {
    throw std::out_of_range("OperatorSequence::at: step " + std::to_string(t) +
                            " outside 1.." + std::to_string(length_ + 1));
  }
  StepOperator op = generator_(t);
  const double a = op.alpha();
  if (!(a > 0.0 && a < 1.0)) {
    throw std::invalid_argument("OperatorSequence: alpha_" + std::to_string(t) +
                                " outside (0,1)");
  }
  if (!(op.lipschitz >= 0.0 && op.lipschitz <= 1.0)) {
    throw std::invalid_argument("OperatorSequence: L_" + std::to_string(t) +
                                " outside [0,1]");
  }
  if (!std::isfinite(op.error_bound()) || op.error_bound() < 0.0) {
    throw std::invalid_argument("OperatorSequence: e_T," + std::to_string(t) +
                                " not a finite nonnegative value");
  }
  if (op.image_bound && !std::isfinite(*op.image_bound)) {
    throw std::invalid_argument("OperatorSequence: M_" + std::to_string(t) +
                                " not finite");
  }
  return op;
}

double TrackingRun::tracking_error_at(int t) const {
  const int T = horizon();
  if (t < 1 || t > T + 1) throw std::out_of_range("tracking_error_at: bad step");
  return t <= T ? steps[static_cast<std::size_t>(t - 1)].tracking_error
                : final_tracking_error;
}

std::vector<double> drift_sequence(const std::vector<Point>& fixed_points) {
  if (fixed_points.size() < 2) {
    throw std::invalid_argument("drift_sequence: need at least 2 points");
  }
  std::vector<double> out;
  out.reserve(fixed_points.size() - 1);
  for (std::size_t i = 0; i + 1 < fixed_points.size(); ++i) {
    require_same_dim(fixed_points[i], fixed_points[i + 1], "drift_sequence");
    out.push_back((fixed_points[i + 1] - fixed_points[i]).norm());
  }
  return out;
}

Point fixed_point_oracle(const AveragedMap& F, const Point& x0, double tol,
                         long max_iter) {
  // F is averaged by construction (alpha < 1), so Picard iteration on F
  // itself converges whenever fixed points exist.
  Point x = x0;
  double residual = 0.0;
  for (long it = 0; it <= max_iter; ++it) {
    Point fx = F.apply(x);
    residual = (x - fx).norm();
    if (residual <= tol) return x;
    x = std::move(fx);
  }
  throw std::runtime_error("fixed_point_oracle: residual " + std::to_string(residual) +
                           " above tolerance after " + std::to_string(max_iter) +
                           " iterations");
}

namespace {

Point step_fixed_point(const StepOperator& op, const Point& warm, const RunOptions& opts) {
  if (op.fixed_point) return *op.fixed_point;
  return fixed_point_oracle(op.map, warm, opts.fixed_point_tol,
                            opts.fixed_point_max_iter);
}

}  // namespace

TrackingRun run_inexact_km(const OperatorSequence& seq, const Point& x1,
                           const RunOptions& opts) {
  const int T = seq.length();
  StepOperator op = seq.at(1);
  if (!op.map.domain().contains(x1, opts.domain_tol)) {
    throw std::invalid_argument("run_inexact_km: x1 outside the declared domain");
  }

  TrackingRun run;
  run.iterates.reserve(static_cast<std::size_t>(T) + 1);
  run.fixed_points.reserve(static_cast<std::size_t>(T) + 1);
  run.steps.reserve(static_cast<std::size_t>(T));

  Point x = x1;
  Point xstar;
  if (opts.track_fixed_points) xstar = step_fixed_point(op, x1, opts);
  run.iterates.push_back(x);
  run.fixed_points.push_back(xstar);

  for (int t = 1; t <= T; ++t) {
    const double alpha = op.alpha();
    const Point tx = op.map.apply_base(x);
    const double residual_T = (x - tx).norm();
    const Point fx = (1.0 - alpha) * x + alpha * tx;
    const double residual_F = (x - fx).norm();

    Point xnext =
        op.oracle ? apply_inexact_averaged(alpha, *op.oracle, x, op.map.domain()) : fx;
    if (!op.map.domain().contains(xnext, opts.domain_tol)) {
      throw std::runtime_error("run_inexact_km: iterate left the domain at step " +
                               std::to_string(t));
    }

    StepOperator next = seq.at(t + 1);
    Point xstar_next;
    double sigma = 0.0;
    double tracking_error = 0.0;
    if (opts.track_fixed_points) {
      xstar_next = step_fixed_point(next, xstar, opts);
      sigma = (xstar_next - xstar).norm();
      tracking_error = (x - xstar).norm();
    }

    double M;
    if (op.image_bound) {
      M = *op.image_bound;
    } else {
      // The bounds only ever use the operator images at the visited points;
      // measure there and inflate 10%.
      M = std::max({fx.norm(), xnext.norm(), xstar.norm(), xstar_next.norm()});
      M *= 1.1;
    }

    run.steps.push_back(StepRecord{alpha, op.lipschitz, M, op.error_bound(), sigma,
                                   residual_F, residual_T, tracking_error});
    run.iterates.push_back(xnext);
    run.fixed_points.push_back(xstar_next);
    x = std::move(xnext);
    xstar = std::move(xstar_next);
    op = std::move(next);
  }

  if (opts.track_fixed_points) {
    run.final_tracking_error = (x - xstar).norm();
  }
  return run;
}

}  // namespace kmtrack
