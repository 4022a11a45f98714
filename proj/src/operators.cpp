#include "kmtrack/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace kmtrack {

OperatorClass OperatorClass::contraction(double L) {
  if (!(L >= 0.0 && L < 1.0)) {
    throw std::invalid_argument("OperatorClass::contraction: modulus must be in [0,1)");
  }
  return {Kind::Contraction, L};
}

OperatorClass OperatorClass::averaged(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("OperatorClass::averaged: alpha must be in (0,1)");
  }
  return {Kind::Averaged, alpha};
}

AveragedMap::AveragedMap(double alpha, MapFn base,
                         std::shared_ptr<const FeasibleSet> domain,
                         OperatorClass base_class, std::string name,
                         std::optional<double> map_lipschitz)
    : alpha_(alpha),
      base_(std::move(base)),
      domain_(std::move(domain)),
      base_class_(base_class),
      name_(std::move(name)),
      map_lipschitz_(map_lipschitz) {
  if (!(alpha_ > 0.0 && alpha_ < 1.0)) {
    throw std::invalid_argument("AveragedMap: alpha must be in (0,1)");
  }
  if (!domain_) throw std::invalid_argument("AveragedMap: null domain");
  if (map_lipschitz_ && !(*map_lipschitz_ >= 0.0)) {
    throw std::invalid_argument("AveragedMap: negative Lipschitz bound");
  }
}

Point AveragedMap::apply_base(const Point& x) const {
  if (x.size() != domain_->dim()) {
    throw std::invalid_argument("AveragedMap(" + name_ + "): dimension mismatch");
  }
  Point tx = base_(x);
  require_same_dim(x, tx, "AveragedMap(" + name_ + ")");
  require_finite(tx, "base map " + name_);
  return tx;
}

Point AveragedMap::apply(const Point& x) const {
  if (direct_) {
    if (x.size() != domain_->dim()) {
      throw std::invalid_argument("AveragedMap(" + name_ + "): dimension mismatch");
    }
    Point out = direct_(x);
    require_finite(out, "averaged map over " + name_);
    return out;
  }
  const Point tx = apply_base(x);
  Point out = (1.0 - alpha_) * x + alpha_ * tx;
  require_finite(out, "averaged map over " + name_);
  return out;
}

double AveragedMap::lipschitz_bound() const {
  const double implied = (1.0 - alpha_) + alpha_ * base_class_.lipschitz_bound();
  return map_lipschitz_ ? std::min(*map_lipschitz_, implied) : implied;
}

Point apply_inexact_averaged(double alpha, const InexactOracle& oracle, const Point& x,
                             const FeasibleSet& domain) {
  if (x.size() != domain.dim()) {
    throw std::invalid_argument("apply_inexact_averaged: dimension mismatch");
  }
  Point tx = oracle.approx(x);
  require_same_dim(x, tx, "apply_inexact_averaged");
  require_finite(tx, "inexact oracle");
  Point out = (1.0 - alpha) * x + alpha * tx;
  require_finite(out, "inexact averaged step");
  return out;
}

double composed_alpha(double a1, double a2) {
  return (a1 + a2 - 2.0 * a1 * a2) / (1.0 - a1 * a2);
}

AveragedMap compose_averaged(const AveragedMap& f1, const AveragedMap& f2) {
  if (f1.domain().dim() != f2.domain().dim()) {
    throw std::invalid_argument("compose_averaged: incompatible dimensions");
  }
  const double alpha = composed_alpha(f1.alpha(), f2.alpha());
  // Evaluation is F1(F2(x)); the base of the composition is recovered from
  // the combination so that fixed points and residual identities carry over.
  auto inner = f2;
  auto outer = f1;
  MapFn direct = [inner, outer](const Point& x) -> Point {
    return outer.apply(inner.apply(x));
  };
  MapFn base = [direct, alpha](const Point& x) -> Point {
    return (direct(x) - (1.0 - alpha) * x) / alpha;
  };
  AveragedMap composed(alpha, std::move(base), f2.domain_ptr(),
                       OperatorClass::averaged(alpha), f1.name() + " o " + f2.name());
  composed.direct_ = std::move(direct);
  return composed;
}

std::pair<double, double> convex_combination_identity(const Point& x, const Point& y,
                                                      double theta) {
  require_same_dim(x, y, "convex_combination_identity");
  const double lhs = ((1.0 - theta) * x + theta * y).squaredNorm();
  const double rhs = (1.0 - theta) * x.squaredNorm() + theta * y.squaredNorm() -
                     theta * (1.0 - theta) * (x - y).squaredNorm();
  return {lhs, rhs};
}

double empirical_lipschitz(const MapFn& f,
                           const std::vector<std::pair<Point, Point>>& samples) {
  if (samples.empty()) {
    throw std::invalid_argument("empirical_lipschitz: no sample pairs");
  }
  double best = -1.0;
  for (const auto& [x, y] : samples) {
    const double d = (x - y).norm();
    if (d == 0.0) continue;  // coincident pair
    best = std::max(best, (f(x) - f(y)).norm() / d);
  }
  if (best < 0.0) {
    throw std::invalid_argument("empirical_lipschitz: all sample pairs coincident");
  }
  return best;
}

}  // namespace kmtrack
