#include "kmtrack/feasible_set.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace kmtrack {

FeasibleSet FeasibleSet::full_space(Eigen::Index dim) {
  FeasibleSet s;
  s.kind_ = Kind::FullSpace;
  s.dim_ = dim;
  return s;
}

FeasibleSet FeasibleSet::box(Point lo, Point hi) {
  require_same_dim(lo, hi, "FeasibleSet::box");
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (lo[i] > hi[i]) throw std::invalid_argument("FeasibleSet::box: lo > hi");
  }
  FeasibleSet s;
  s.kind_ = Kind::Box;
  s.dim_ = lo.size();
  s.lo_ = std::move(lo);
  s.hi_ = std::move(hi);
  return s;
}

FeasibleSet FeasibleSet::nonnegative(Eigen::Index dim) {
  const double inf = std::numeric_limits<double>::infinity();
  return box(Point::Zero(dim), Point::Constant(dim, inf));
}

FeasibleSet FeasibleSet::ball(Point center, double radius) {
  if (!(radius >= 0.0)) throw std::invalid_argument("FeasibleSet::ball: radius < 0");
  FeasibleSet s;
  s.kind_ = Kind::Ball;
  s.dim_ = center.size();
  s.center_ = std::move(center);
  s.radius_ = radius;
  return s;
}

FeasibleSet FeasibleSet::simplex(Eigen::Index dim, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("FeasibleSet::simplex: scale <= 0");
  FeasibleSet s;
  s.kind_ = Kind::Simplex;
  s.dim_ = dim;
  s.scale_ = scale;
  return s;
}

FeasibleSet FeasibleSet::halfspaces(Eigen::Index dim, std::vector<Halfspace> hs) {
  for (const auto& h : hs) {
    if (h.normal.size() != dim) {
      throw std::invalid_argument("FeasibleSet::halfspaces: normal dimension mismatch");
    }
    if (h.normal.norm() <= 0.0) {
      throw std::invalid_argument("FeasibleSet::halfspaces: zero normal");
    }
  }
  FeasibleSet s;
  s.kind_ = Kind::Halfspaces;
  s.dim_ = dim;
  s.halfspaces_ = std::move(hs);
  return s;
}

FeasibleSet FeasibleSet::affine(Matrix A, Point b) {
  if (A.rows() != b.size()) {
    throw std::invalid_argument("FeasibleSet::affine: A rows != b size");
  }
  FeasibleSet s;
  s.kind_ = Kind::Affine;
  s.dim_ = A.cols();
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
  s.A_pinv_ = cod.pseudoInverse();
  s.A_ = std::move(A);
  s.b_ = std::move(b);
  return s;
}

FeasibleSet FeasibleSet::intersection(std::vector<FeasibleSet> members) {
  if (members.empty()) {
    throw std::invalid_argument("FeasibleSet::intersection: no members");
  }
  FeasibleSet s;
  s.kind_ = Kind::Intersection;
  s.dim_ = members.front().dim();
  // Flatten so every component projects in closed form.
  for (auto& m : members) {
    if (m.dim() != s.dim_) {
      throw std::invalid_argument("FeasibleSet::intersection: dimension mismatch");
    }
    if (m.kind_ == Kind::Intersection) {
      for (auto& inner : m.members_) s.members_.push_back(std::move(inner));
    } else if (m.kind_ == Kind::Halfspaces && m.halfspaces_.size() > 1) {
      for (auto& h : m.halfspaces_) {
        s.members_.push_back(halfspaces(s.dim_, {h}));
      }
    } else {
      s.members_.push_back(std::move(m));
    }
  }
  return s;
}

namespace {

Point project_simplex_sorted(const Point& y, double scale) {
  // Sort-based projection onto { x >= 0, sum x = scale }.
  std::vector<double> u(y.data(), y.data() + y.size());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0;
  double tau = 0.0;
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    cumsum += u[static_cast<std::size_t>(i)];
    const double t = (cumsum - scale) / static_cast<double>(i + 1);
    if (u[static_cast<std::size_t>(i)] > t) {
      tau = t;
      k = i + 1;
    }
  }
  (void)k;
  return (y.array() - tau).max(0.0);
}

}  // namespace

void FeasibleSet::project_component_into(const Point& y, Point& out) const {
  switch (kind_) {
    case Kind::FullSpace:
      out = y;
      return;
    case Kind::Box:
      out = y.cwiseMax(lo_).cwiseMin(hi_);
      return;
    case Kind::Ball: {
      const double n = (y - center_).norm();
      if (n <= radius_) {
        out = y;
      } else {
        out = center_ + (radius_ / n) * (y - center_);
      }
      return;
    }
    case Kind::Simplex:
      out = project_simplex_sorted(y, scale_);
      return;
    case Kind::Halfspaces:
      if (halfspaces_.size() == 1) {
        const Halfspace& h = halfspaces_.front();
        const double g = h.normal.dot(y) - h.offset;
        if (g <= 0.0) {
          out = y;
        } else {
          out = y - (g / h.normal.squaredNorm()) * h.normal;
        }
        return;
      }
      break;  // multi-halfspace handled by Dykstra below
    case Kind::Affine:
      // Minimum-norm correction onto { A x = b }.
      out.noalias() = y - A_pinv_ * (A_ * y - b_);
      return;
    case Kind::Intersection:
      break;
  }
  throw std::logic_error("project_component: not a closed-form component");
}

Point FeasibleSet::project_component(const Point& y) const {
  Point out(y.size());
  project_component_into(y, out);
  return out;
}

Point FeasibleSet::project(const Point& y) const {
  if (y.size() != dim_) {
    throw std::invalid_argument("FeasibleSet::project: dimension mismatch");
  }
  if (kind_ != Kind::Intersection &&
      !(kind_ == Kind::Halfspaces && halfspaces_.size() > 1)) {
    return project_component(y);
  }

  // Dykstra's alternating projections with per-component corrections.
  std::vector<const FeasibleSet*> comps;
  std::vector<FeasibleSet> scratch;
  if (kind_ == Kind::Intersection) {
    for (const auto& m : members_) comps.push_back(&m);
  } else {
    scratch.reserve(halfspaces_.size());
    for (const auto& h : halfspaces_) scratch.push_back(halfspaces(dim_, {h}));
    for (const auto& s : scratch) comps.push_back(&s);
  }

  const std::size_t n = comps.size();
  std::vector<Point> corrections(n, Point::Zero(dim_));
  Point x = y;
  Point z(dim_), px(dim_);
  for (int sweep = 0; sweep < max_dykstra_sweeps_; ++sweep) {
    double max_shift = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      z = x + corrections[i];
      comps[i]->project_component_into(z, px);
      corrections[i] = z - px;
      max_shift = std::max(max_shift, (px - x).norm());
      x.swap(px);
    }
    if (max_shift <= dykstra_tol_) {
      // Converged sweep: all components agree to tolerance.
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, comps[i]->violation(x));
      if (worst <= 100.0 * dykstra_tol_) return x;
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, comps[i]->violation(x));
  throw std::runtime_error(
      "FeasibleSet::project: Dykstra did not converge after " +
      std::to_string(max_dykstra_sweeps_) + " sweeps (residual " + std::to_string(worst) +
      "); the intersection may be empty");
}

double FeasibleSet::violation(const Point& x) const {
  switch (kind_) {
    case Kind::FullSpace:
      return 0.0;
    case Kind::Box: {
      double v = 0.0;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        v = std::max(v, lo_[i] - x[i]);
        v = std::max(v, x[i] - hi_[i]);
      }
      return v;
    }
    case Kind::Ball:
      return std::max(0.0, (x - center_).norm() - radius_);
    case Kind::Simplex: {
      double v = std::abs(x.sum() - scale_);
      v = std::max(v, -x.minCoeff());
      return std::max(v, 0.0);
    }
    case Kind::Halfspaces: {
      double v = 0.0;
      for (const auto& h : halfspaces_) {
        v = std::max(v, (h.normal.dot(x) - h.offset) / h.normal.norm());
      }
      return v;
    }
    case Kind::Affine:
      return (A_ * x - b_).lpNorm<Eigen::Infinity>();
    case Kind::Intersection: {
      double v = 0.0;
      for (const auto& m : members_) v = std::max(v, m.violation(x));
      return v;
    }
  }
  return 0.0;
}

bool FeasibleSet::contains(const Point& x, double tol) const {
  if (x.size() != dim_) return false;
  return violation(x) <= tol;
}

std::optional<double> FeasibleSet::radius_bound() const {
  switch (kind_) {
    case Kind::Box: {
      if (!lo_.allFinite() || !hi_.allFinite()) return std::nullopt;
      double sq = 0.0;
      for (Eigen::Index i = 0; i < lo_.size(); ++i) {
        sq += std::pow(std::max(std::abs(lo_[i]), std::abs(hi_[i])), 2);
      }
      return std::sqrt(sq);
    }
    case Kind::Ball:
      return center_.norm() + radius_;
    case Kind::Simplex:
      return scale_;
    case Kind::Intersection: {
      std::optional<double> best;
      for (const auto& m : members_) {
        if (auto r = m.radius_bound()) {
          best = best ? std::min(*best, *r) : *r;
        }
      }
      return best;
    }
    default:
      return std::nullopt;
  }
}

}  // namespace kmtrack
