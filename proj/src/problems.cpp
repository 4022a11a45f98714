#include "kmtrack/problems.hpp"

#include "kmtrack/bandit.hpp"

#include <Eigen/QR>

#include <cmath>
#include <stdexcept>
#include <utility>

namespace kmtrack {

GradientOracle GradientOracle::noisy(double e_y, std::uint64_t seed) {
  if (!(e_y >= 0.0)) throw std::invalid_argument("GradientOracle::noisy: e_y < 0");
  GradientOracle o;
  o.mode = Mode::Noisy;
  o.noise_magnitude = e_y;
  o.seed = seed;
  return o;
}

GradientOracle GradientOracle::bandit(double delta, int evals, double constant,
                                      std::uint64_t seed) {
  if (!(delta > 0.0)) throw std::invalid_argument("GradientOracle::bandit: delta <= 0");
  if (evals < 2) throw std::invalid_argument("GradientOracle::bandit: evals < 2");
  GradientOracle o;
  o.mode = Mode::Bandit;
  o.bandit_delta = delta;
  o.bandit_evals = evals;
  o.bandit_constant = constant;
  o.seed = seed;
  return o;
}

GradientOracle GradientOracle::custom(CustomEmit emit, double certified_e_y) {
  if (!emit) throw std::invalid_argument("GradientOracle::custom: null estimator");
  if (!(certified_e_y >= 0.0) || !std::isfinite(certified_e_y)) {
    throw std::invalid_argument("GradientOracle::custom: bound must be finite and >= 0");
  }
  GradientOracle o;
  o.mode = Mode::Custom;
  o.custom_emit = std::move(emit);
  o.custom_bound = certified_e_y;
  return o;
}

Point GradientOracle::emit(const SmoothConvexFunction& f, const Point& x,
                           std::uint64_t step) const {
  switch (mode) {
    case Mode::Exact:
      return f.gradient(x);
    case Mode::Noisy: {
      // Per-step offset of magnitude exactly e_y; independent of x so the
      // approximate map stays a pure function at each step.
      auto g = rng::engine(seed, rng::kOracleNoise, step);
      return f.gradient(x) + noise_magnitude * rng::unit_vector(g, x.size());
    }
    case Mode::Bandit: {
      auto g = rng::engine(seed, rng::kBanditDirections, step);
      return bandit_gradient(f.value, x, bandit_delta, bandit_evals, g, f.smoothness,
                             bandit_constant)
          .gradient;
    }
    case Mode::Custom:
      return custom_emit(f, x, step);
  }
  throw std::logic_error("GradientOracle::emit: unknown mode");
}

double GradientOracle::certified_bound(double smoothness, Eigen::Index dim) const {
  switch (mode) {
    case Mode::Exact:
      return 0.0;
    case Mode::Noisy:
      return noise_magnitude;
    case Mode::Bandit:
      return smoothness * bandit_delta +
             bandit_constant * static_cast<double>(dim) /
                 std::sqrt(static_cast<double>(bandit_evals));
    case Mode::Custom:
      return custom_bound;
  }
  throw std::logic_error("GradientOracle::certified_bound: unknown mode");
}

ProxFunction ProxFunction::zero() {
  ProxFunction g;
  g.form = Form::Zero;
  g.value = [](const Point&) { return 0.0; };
  g.subgradient = [](const Point& x) { return Point(Point::Zero(x.size())); };
  return g;
}

ProxFunction ProxFunction::l1(double weight) {
  if (!(weight >= 0.0)) throw std::invalid_argument("ProxFunction::l1: weight < 0");
  ProxFunction g;
  g.form = Form::L1;
  g.l1_weight = weight;
  g.value = [weight](const Point& x) { return weight * x.lpNorm<1>(); };
  g.subgradient = [weight](const Point& x) {
    Point s(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      s[i] = weight * (x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0));
    }
    return s;
  };
  return g;
}

ProxFunction ProxFunction::custom(std::function<double(const Point&)> value,
                                  std::function<Point(const Point&)> subgradient) {
  ProxFunction g;
  g.form = Form::Custom;
  g.value = std::move(value);
  g.subgradient = std::move(subgradient);
  return g;
}

namespace {

double soft_threshold(double v, double tau) {
  if (v > tau) return v - tau;
  if (v < -tau) return v + tau;
  return 0.0;
}

// Stationarity residual of the prox objective: displacement of one small
// projected (sub)gradient step from x.
double prox_residual(const ProxFunction& g, const FeasibleSet& X, double nu,
                     const Point& y, const Point& x, double probe_step) {
  const Point grad = g.subgradient(x) + (x - y) / nu;
  return (x - X.project(x - probe_step * grad)).norm() / probe_step;
}

Point prox_iterative(const ProxFunction& g, const FeasibleSet& X, double nu,
                     const Point& y, double inner_tol, long max_inner) {
  // Projected subgradient with weighted averaging on the (1/nu)-strongly
  // convex prox objective.
  Point u = X.project(y);
  Point avg = u;
  double weight_sum = 0.0;
  const double probe = std::min(1.0, nu);
  for (long j = 1; j <= max_inner; ++j) {
    const Point d = g.subgradient(u) + (u - y) / nu;
    const double step = 2.0 * nu / static_cast<double>(j + 1);
    u = X.project(u - step * d);
    const double w = static_cast<double>(j);
    weight_sum += w;
    avg += (w / weight_sum) * (u - avg);
    if (j % 50 == 0 || j == max_inner) {
      if (prox_residual(g, X, nu, y, avg, probe) <= inner_tol) return avg;
    }
  }
  throw std::runtime_error(
      "prox: inner solver did not converge (final residual " +
      std::to_string(prox_residual(g, X, nu, y, avg, probe)) + ")");
}

}  // namespace

Point prox(const ProxFunction& g, const FeasibleSet& X, double nu, const Point& y,
           double inner_tol, long max_inner) {
  if (!(nu > 0.0)) throw std::invalid_argument("prox: nu must be > 0");
  switch (g.form) {
    case ProxFunction::Form::Zero:
      return X.project(y);
    case ProxFunction::Form::L1: {
      const double tau = nu * g.l1_weight;
      Point s(y.size());
      for (Eigen::Index i = 0; i < y.size(); ++i) s[i] = soft_threshold(y[i], tau);
      // Componentwise objective + componentwise set keeps the closed form.
      if (X.kind() == FeasibleSet::Kind::FullSpace) return s;
      if (X.kind() == FeasibleSet::Kind::Box) return X.project(s);
      return prox_iterative(g, X, nu, y, inner_tol, max_inner);
    }
    case ProxFunction::Form::Custom:
      return prox_iterative(g, X, nu, y, inner_tol, max_inner);
  }
  throw std::logic_error("prox: unknown form");
}

AveragedMap gradient_step_averaged(const SmoothConvexFunction& f, double nu,
                                   Eigen::Index dim) {
  const double K = f.smoothness;
  if (!(nu > 0.0 && nu < 2.0 / K)) {
    throw std::invalid_argument("gradient_step_averaged: nu must lie in (0, 2/K)");
  }
  const double alpha = nu * K / 2.0;
  auto grad = f.gradient;
  MapFn base = [grad, K](const Point& x) -> Point { return x - (2.0 / K) * grad(x); };
  auto domain = std::make_shared<const FeasibleSet>(FeasibleSet::full_space(dim));
  std::optional<double> modulus;
  if (f.strong_convexity > 0.0) {
    modulus = std::max(std::abs(1.0 - nu * f.strong_convexity), std::abs(1.0 - nu * K));
  }
  return AveragedMap(alpha, std::move(base), std::move(domain),
                     OperatorClass::non_expansive(), "I - (2/K) grad f", modulus);
}

double error_transfer_unconstrained(double e_y, double smoothness) {
  if (!(e_y >= 0.0)) throw std::invalid_argument("error_transfer_unconstrained: e_y < 0");
  if (!(smoothness > 0.0)) throw std::invalid_argument("error_transfer_unconstrained: K <= 0");
  return 2.0 * e_y / smoothness;
}

double error_transfer_projected(double e_y, double nu, double smoothness) {
  return (2.0 * nu - nu * nu * smoothness / 2.0) * e_y;
}

double projected_gradient_alpha(double nu, double smoothness) {
  return 1.0 / (2.0 - nu * smoothness / 2.0);
}

namespace {

// Shared construction for projected gradient and forward-backward steps: the
// full step x -> B(x - nu y(x)) (B = projection or prox) is alpha-averaged
// with alpha = 1/(2 - nu K/2); its base map is recovered from the
// combination. `backward` must be non-expansive.
InexactAveragedOperator inexact_gradient_step(
    const SmoothConvexFunction& f, std::shared_ptr<const FeasibleSet> X, double nu,
    const GradientOracle& oracle, std::uint64_t step,
    std::function<Point(const Point&)> backward, const std::string& name) {
  const double K = f.smoothness;
  if (!(nu > 0.0 && nu < 2.0 / K)) {
    throw std::invalid_argument(name + ": nu must lie in (0, 2/K)");
  }
  const double alpha = projected_gradient_alpha(nu, K);
  const double e_y = oracle.certified_bound(K, X->dim());
  if (!std::isfinite(e_y)) {
    throw std::invalid_argument(name + ": oracle has no finite certified error bound");
  }

  auto grad = f.gradient;
  MapFn exact_base = [grad, backward, nu, alpha](const Point& x) -> Point {
    const Point stepped = backward(x - nu * grad(x));
    return ((alpha - 1.0) / alpha) * x + (1.0 / alpha) * stepped;
  };

  // The backward map is non-expansive, so the composite inherits the modulus
  // of I - nu grad f when f is strongly convex.
  std::optional<double> modulus;
  if (f.strong_convexity > 0.0) {
    modulus = std::max(std::abs(1.0 - nu * f.strong_convexity), std::abs(1.0 - nu * K));
  }

  InexactAveragedOperator out{alpha,
                              AveragedMap(alpha, exact_base, X,
                                          OperatorClass::non_expansive(), name, modulus),
                              std::nullopt,
                              0.0};
  if (oracle.mode != GradientOracle::Mode::Exact) {
    SmoothConvexFunction f_copy = f;
    GradientOracle oracle_copy = oracle;
    MapFn approx_base = [f_copy, oracle_copy, backward, nu, alpha,
                         step](const Point& x) -> Point {
      const Point y = oracle_copy.emit(f_copy, x, step);
      const Point stepped = backward(x - nu * y);
      return ((alpha - 1.0) / alpha) * x + (1.0 / alpha) * stepped;
    };
    out.error_bound = error_transfer_projected(e_y, nu, K);
    out.oracle = InexactOracle{std::move(approx_base), out.error_bound, exact_base};
  }
  return out;
}

}  // namespace

InexactAveragedOperator projected_gradient_operator(
    const SmoothConvexFunction& f, std::shared_ptr<const FeasibleSet> X, double nu,
    const GradientOracle& oracle, std::uint64_t step) {
  auto set = X;
  return inexact_gradient_step(
      f, X, nu, oracle, step,
      [set](const Point& y) { return set->project(y); }, "projected gradient");
}

InexactAveragedOperator forward_backward_operator(
    const SmoothConvexFunction& f, const ProxFunction& g,
    std::shared_ptr<const FeasibleSet> X, double nu, const GradientOracle& oracle,
    std::uint64_t step) {
  auto set = X;
  ProxFunction g_copy = g;
  return inexact_gradient_step(
      f, X, nu, oracle, step,
      [g_copy, set, nu](const Point& y) { return prox(g_copy, *set, nu, y); },
      "forward-backward");
}

namespace {

Matrix quadratic_matrix(Eigen::Index m, double K, double k, std::uint64_t seed,
                        bool rotated) {
  Point eigs(m);
  if (m == 1) {
    eigs[0] = K;
  } else {
    for (Eigen::Index i = 0; i < m; ++i) {
      eigs[i] = k + (K - k) * static_cast<double>(i) / static_cast<double>(m - 1);
    }
  }
  if (!rotated) return eigs.asDiagonal();
  auto g = rng::engine(seed, rng::kProblem, 7);
  Matrix G(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < m; ++i) G(i, j) = rng::gaussian(g);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  return Q * eigs.asDiagonal() * Q.transpose();
}

}  // namespace

TimeVaryingProblem make_drifting_quadratic(Eigen::Index m, const Point& drift, double K,
                                           double k, int horizon, std::uint64_t seed,
                                           std::shared_ptr<const FeasibleSet> domain,
                                           bool rotated) {
  if (!(k > 0.0 && k <= K)) {
    throw std::invalid_argument("make_drifting_quadratic: need 0 < k <= K");
  }
  if (drift.size() != m) {
    throw std::invalid_argument("make_drifting_quadratic: drift dimension mismatch");
  }
  const Matrix Q = quadratic_matrix(m, K, k, seed, rotated);
  auto g = rng::engine(seed, rng::kInit);
  const Point c1 = rng::gaussian_vector(g, m);
  const Point drift_copy = drift;

  auto set = domain ? domain
                    : std::make_shared<const FeasibleSet>(FeasibleSet::full_space(m));
  const bool unconstrained = set->kind() == FeasibleSet::Kind::FullSpace;

  auto center_at = [c1, drift_copy](int t) -> Point {
    return c1 + static_cast<double>(t - 1) * drift_copy;
  };

  TimeVaryingProblem p;
  p.horizon = horizon;
  p.smoothness = K;
  p.strong_convexity = k;
  p.objective_at = [Q, center_at, K, k](int t) {
    const Point c = center_at(t);
    SmoothConvexFunction f;
    f.smoothness = K;
    f.strong_convexity = k;
    f.value = [Q, c](const Point& x) {
      const Point d = x - c;
      return 0.5 * d.dot(Q * d);
    };
    f.gradient = [Q, c](const Point& x) -> Point { return Q * (x - c); };
    return f;
  };
  p.domain_at = [set](int) { return set; };
  p.prox_term_at = [](int) { return std::optional<ProxFunction>{}; };
  if (unconstrained) {
    p.fixed_point_at = [center_at](int t) { return center_at(t); };
  }
  p.start = c1 + Point::Ones(m).normalized();
  return p;
}

TimeVaryingProblem make_drifting_lasso(Eigen::Index m, const Point& drift, double K,
                                       double k, double l1_weight, int horizon,
                                       std::uint64_t seed) {
  if (!(k > 0.0 && k <= K)) {
    throw std::invalid_argument("make_drifting_lasso: need 0 < k <= K");
  }
  const Matrix Q = quadratic_matrix(m, K, k, seed, false);  // diagonal
  const Point diag = Q.diagonal();
  auto g = rng::engine(seed, rng::kInit);
  // Keep centers clear of the soft-threshold dead zone so the solution
  // trajectory actually moves with the drift.
  Point c1 = rng::gaussian_vector(g, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    c1[i] += (c1[i] >= 0.0 ? 1.0 : -1.0) * (1.0 + l1_weight / diag[i]);
  }
  const Point drift_copy = drift;
  auto center_at = [c1, drift_copy](int t) -> Point {
    return c1 + static_cast<double>(t - 1) * drift_copy;
  };

  TimeVaryingProblem p;
  p.horizon = horizon;
  p.smoothness = K;
  p.strong_convexity = k;
  p.objective_at = [Q, center_at, K, k](int t) {
    const Point c = center_at(t);
    SmoothConvexFunction f;
    f.smoothness = K;
    f.strong_convexity = k;
    f.value = [Q, c](const Point& x) {
      const Point d = x - c;
      return 0.5 * d.dot(Q * d);
    };
    f.gradient = [Q, c](const Point& x) -> Point { return Q * (x - c); };
    return f;
  };
  auto set = std::make_shared<const FeasibleSet>(FeasibleSet::full_space(m));
  p.domain_at = [set](int) { return set; };
  const ProxFunction l1 = ProxFunction::l1(l1_weight);
  p.prox_term_at = [l1](int) { return std::optional<ProxFunction>(l1); };
  // Minimizer of the separable objective: per-coordinate soft threshold.
  p.fixed_point_at = [center_at, diag, l1_weight](int t) {
    const Point c = center_at(t);
    Point out(c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      out[i] = soft_threshold(c[i], l1_weight / diag[i]);
    }
    return out;
  };
  p.start = c1 + Point::Ones(m).normalized();
  return p;
}

CurvatureReport check_declared_curvature(const SmoothConvexFunction& f,
                                         Eigen::Index dim, int samples,
                                         std::uint64_t seed, double rel_tol) {
  auto g = rng::engine(seed, rng::kProblem, 13);
  CurvatureReport rep;
  rep.min_convexity_ratio = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    const Point x = 3.0 * rng::gaussian_vector(g, dim);
    const Point y = 3.0 * rng::gaussian_vector(g, dim);
    const double d2 = (x - y).squaredNorm();
    if (d2 == 0.0) continue;
    const Point gd = f.gradient(x) - f.gradient(y);
    rep.max_smoothness_ratio =
        std::max(rep.max_smoothness_ratio, gd.norm() / std::sqrt(d2));
    rep.min_convexity_ratio = std::min(rep.min_convexity_ratio, gd.dot(x - y) / d2);
  }
  rep.smoothness_violated =
      rep.max_smoothness_ratio > f.smoothness * (1.0 + rel_tol);
  rep.convexity_violated =
      rep.min_convexity_ratio < f.strong_convexity * (1.0 - rel_tol) - rel_tol;
  return rep;
}

ModulusReport gradient_modulus_report(const SmoothConvexFunction& f,
                                      const FeasibleSet& X, double nu, int samples,
                                      std::uint64_t seed) {
  auto g = rng::engine(seed, rng::kProblem, 11);
  std::vector<std::pair<Point, Point>> pairs;
  pairs.reserve(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    pairs.emplace_back(2.0 * rng::gaussian_vector(g, X.dim()),
                       2.0 * rng::gaussian_vector(g, X.dim()));
  }
  auto grad = f.gradient;
  const FeasibleSet* set = &X;
  MapFn map = [grad, set, nu](const Point& x) { return set->project(x - nu * grad(x)); };

  ModulusReport rep;
  rep.measured = empirical_lipschitz(map, pairs);
  rep.max_form = std::max(std::abs(1.0 - nu * f.strong_convexity),
                          std::abs(1.0 - nu * f.smoothness));
  rep.min_form = std::min(std::abs(1.0 - nu * f.strong_convexity),
                          std::abs(1.0 - nu * f.smoothness));
  rep.min_form_violated = rep.measured > rep.min_form + 1e-9;
  return rep;
}

}  // namespace kmtrack
