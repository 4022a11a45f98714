#pragma once

#include "kmtrack/feasible_set.hpp"
#include "kmtrack/point.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kmtrack {

using MapFn = std::function<Point(const Point&)>;

/// Regularity class of a map on its domain.
struct OperatorClass {
  enum class Kind { NonExpansive, Contraction, Averaged };
  Kind kind = Kind::NonExpansive;
  /// Lipschitz modulus in [0,1) for Contraction, averaging parameter in (0,1)
  /// for Averaged, unused for NonExpansive.
  double modulus = 0.0;

  static OperatorClass non_expansive() { return {Kind::NonExpansive, 1.0}; }
  static OperatorClass contraction(double L);
  static OperatorClass averaged(double alpha);

  /// Lipschitz bound implied by the class (1 unless Contraction).
  double lipschitz_bound() const {
    return kind == Kind::Contraction ? modulus : 1.0;
  }
};

/// Averaged map F = (1 - alpha) I + alpha T over a declared domain. The base
/// map T shares its fixed points with F; evaluation is pure.
class AveragedMap {
 public:
  /// `map_lipschitz`, when given, declares a modulus for the full map F that
  /// is tighter than the one implied by the base class (e.g. gradient steps
  /// on strongly convex objectives contract even though their base map is
  /// merely non-expansive).
  AveragedMap(double alpha, MapFn base, std::shared_ptr<const FeasibleSet> domain,
              OperatorClass base_class, std::string name = "T",
              std::optional<double> map_lipschitz = std::nullopt);

  /// (1 - alpha) x + alpha T(x); hard error on dimension mismatch or
  /// non-finite output. Maps built by compose_averaged evaluate the
  /// composition directly (bit-for-bit sequential application).
  Point apply(const Point& x) const;

  /// The base map T alone.
  Point apply_base(const Point& x) const;

  double alpha() const { return alpha_; }
  const FeasibleSet& domain() const { return *domain_; }
  std::shared_ptr<const FeasibleSet> domain_ptr() const { return domain_; }
  const OperatorClass& base_class() const { return base_class_; }
  const std::string& name() const { return name_; }

  /// Declared Lipschitz bound of F: the explicit modulus when given,
  /// otherwise (1 - alpha) + alpha * (base modulus).
  double lipschitz_bound() const;

 private:
  friend AveragedMap compose_averaged(const AveragedMap&, const AveragedMap&);

  double alpha_;
  MapFn base_;
  std::shared_ptr<const FeasibleSet> domain_;
  OperatorClass base_class_;
  std::string name_;
  std::optional<double> map_lipschitz_;
  MapFn direct_;  // set for compositions; overrides the combination in apply()
};

/// Approximate evaluation of a base map with a certified deviation bound:
/// || T(x) - approx(x) || <= error_bound on the domain. `exact` carries the
/// true map when it is available (test mode); oracles built from measurements
/// leave it empty.
struct InexactOracle {
  MapFn approx;
  double error_bound = 0.0;
  std::optional<MapFn> exact;
};

/// One inexact running step: (1 - alpha) x + alpha approx(x).
Point apply_inexact_averaged(double alpha, const InexactOracle& oracle, const Point& x,
                             const FeasibleSet& domain);

/// Composition F1 after F2 of two averaged maps with non-expansive bases. The
/// result is averaged with parameter
///   alpha = (a1 + a2 - 2 a1 a2) / (1 - a1 a2),
/// and evaluates as exactly sequential application.
AveragedMap compose_averaged(const AveragedMap& f1, const AveragedMap& f2);

/// Combined averaging parameter of the composition rule above.
double composed_alpha(double a1, double a2);

/// Both sides of the norm identity
///   ||(1-theta) x + theta y||^2
///     = (1-theta)||x||^2 + theta||y||^2 - theta(1-theta)||x - y||^2,
/// exposed for direct numerical verification.
std::pair<double, double> convex_combination_identity(const Point& x, const Point& y,
                                                      double theta);

/// Largest ratio ||F(x)-F(y)|| / ||x-y|| over the sample pairs; a lower bound
/// on the true modulus. Coincident pairs are skipped.
double empirical_lipschitz(const MapFn& f,
                           const std::vector<std::pair<Point, Point>>& samples);

}  // namespace kmtrack
