#pragma once

#include "kmtrack/point.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace kmtrack {

/// Closed halfspace { x : normal . x <= offset }.
struct Halfspace {
  Point normal;
  double offset = 0.0;
};

/// Closed convex feasible set with a Euclidean projection. Box, ball, simplex,
/// single halfspaces and affine subspaces project in closed form; finite
/// intersections are handled by Dykstra's alternating projections.
///
/// Immutable after construction; projection is a pure function.
class FeasibleSet {
 public:
  enum class Kind { FullSpace, Box, Ball, Simplex, Halfspaces, Affine, Intersection };

  static FeasibleSet full_space(Eigen::Index dim);
  static FeasibleSet box(Point lo, Point hi);
  /// Box with a uniform lower bound and no upper bound (componentwise x >= lo).
  static FeasibleSet nonnegative(Eigen::Index dim);
  static FeasibleSet ball(Point center, double radius);
  /// Scaled standard simplex { x >= 0, sum x = scale }.
  static FeasibleSet simplex(Eigen::Index dim, double scale);
  static FeasibleSet halfspaces(Eigen::Index dim, std::vector<Halfspace> hs);
  /// Affine subspace { x : A x = b }.
  static FeasibleSet affine(Matrix A, Point b);
  /// Intersection of member sets; nested intersections and halfspace lists are
  /// flattened so Dykstra sweeps over closed-form components only.
  static FeasibleSet intersection(std::vector<FeasibleSet> members);

  Kind kind() const { return kind_; }
  Eigen::Index dim() const { return dim_; }

  /// Euclidean projection onto the set. For intersections this runs Dykstra
  /// to `dykstra_tol`; throws on non-convergence (suspected empty set).
  Point project(const Point& y) const;

  bool contains(const Point& x, double tol = 1e-8) const;

  /// Certified sup-norm bound sup { ||x|| : x in set } when the set is
  /// provably bounded (box with finite bounds, ball, simplex).
  std::optional<double> radius_bound() const;

  double dykstra_tol() const { return dykstra_tol_; }
  int max_dykstra_sweeps() const { return max_dykstra_sweeps_; }

 private:
  FeasibleSet() = default;

  Point project_component(const Point& y) const;
  void project_component_into(const Point& y, Point& out) const;
  double violation(const Point& x) const;

  Kind kind_ = Kind::FullSpace;
  Eigen::Index dim_ = 0;

  // Box
  Point lo_, hi_;
  // Ball
  Point center_;
  double radius_ = 0.0;
  // Simplex
  double scale_ = 1.0;
  // Halfspaces
  std::vector<Halfspace> halfspaces_;
  // Affine: A x = b, with the pseudo-inverse cached for the projection
  Matrix A_;
  Point b_;
  Matrix A_pinv_;
  // Intersection
  std::vector<FeasibleSet> members_;

  double dykstra_tol_ = 1e-10;
  int max_dykstra_sweeps_ = 10000;
};

}  // namespace kmtrack
