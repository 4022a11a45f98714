#include "kmtrack/problems.hpp"
#include "kmtrack/tracker.hpp"

#include <doctest.h>

#include <cmath>

using namespace kmtrack;

namespace {

Point vec(std::initializer_list<double> vals) {
  Point p(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double v : vals) p[i++] = v;
  return p;
}

std::shared_ptr<const FeasibleSet> full(Eigen::Index dim) {
  return std::make_shared<const FeasibleSet>(FeasibleSet::full_space(dim));
}

// Static sequence wrapping one averaged map, with the constants declared.
OperatorSequence static_sequence(int T, const AveragedMap& map, double L,
                                 std::optional<Point> fixed_point = std::nullopt) {
  return OperatorSequence(T, [map, L, fixed_point](int) {
    return StepOperator{map, std::nullopt, L, std::nullopt, fixed_point};
  });
}

}  // namespace

TEST_CASE("drift sequence") {
  CHECK_THROWS_AS(drift_sequence({vec({1})}), std::invalid_argument);

  // Constant sequence: the time-invariant case has zero drift.
  std::vector<Point> constant(5, vec({1, 2}));
  for (double s : drift_sequence(constant)) CHECK(s == 0.0);

  std::vector<Point> moving;
  for (int t = 1; t <= 6; ++t) moving.push_back(vec({0.1 * t, 0}));
  for (double s : drift_sequence(moving)) CHECK(s == doctest::Approx(0.1));

  std::vector<Point> alt = {vec({0, 0}), vec({1, 0}), vec({0, 0})};
  const auto d = drift_sequence(alt);
  REQUIRE(d.size() == 2);
  CHECK(d[0] == doctest::Approx(1.0));
  CHECK(d[1] == doctest::Approx(1.0));
}

TEST_CASE("fixed point oracle") {
  // F(x) = 0.5 x + 1 as an averaged map: alpha = 0.5, T(x) = 2 (constant).
  AveragedMap affine(0.5, [](const Point& x) { return Point(Point::Constant(x.size(), 2.0)); },
                     full(1), OperatorClass::contraction(0.0));
  const Point fp = fixed_point_oracle(affine, vec({0}), 1e-10, 1000);
  CHECK(fp[0] == doctest::Approx(2.0).epsilon(1e-9));

  // Identity: x0 is already fixed, zero iterations.
  AveragedMap ident(0.5, [](const Point& x) { return x; }, full(1),
                    OperatorClass::non_expansive());
  CHECK(fixed_point_oracle(ident, vec({5}), 1e-14, 0)[0] == 5.0);

  // Projected gradient for f(x) = 0.5||x - (3,3)||^2 on the box [0,1]^2.
  SmoothConvexFunction f;
  f.smoothness = 1.0;
  f.strong_convexity = 1.0;
  const Point target = vec({3, 3});
  f.value = [target](const Point& x) { return 0.5 * (x - target).squaredNorm(); };
  f.gradient = [target](const Point& x) -> Point { return x - target; };
  auto box = std::make_shared<const FeasibleSet>(FeasibleSet::box(vec({0, 0}), vec({1, 1})));
  InexactAveragedOperator op =
      projected_gradient_operator(f, box, 1.0, GradientOracle::exact());
  const Point sol = fixed_point_oracle(op.map, vec({0, 0}), 1e-10, 100000);
  CHECK((sol - vec({1, 1})).norm() < 1e-9);

  // Exhausted budget carries the last residual (rotation spirals in slowly).
  Eigen::Matrix2d rot;
  rot << std::cos(1.0), -std::sin(1.0), std::sin(1.0), std::cos(1.0);
  AveragedMap slow(0.5, [rot](const Point& x) -> Point { return rot * x; }, full(2),
                   OperatorClass::non_expansive());
  CHECK_THROWS_WITH_AS(fixed_point_oracle(slow, vec({64, 0}), 1e-12, 5),
                       doctest::Contains("residual"), std::runtime_error);
}

TEST_CASE("static contraction run: geometric decay") {
  // F(x) = 0.5 x via alpha = 0.5, T(x) = 0 (zero map): fixed point 0.
  AveragedMap half(0.5, [](const Point& x) { return Point(Point::Zero(x.size())); },
                   full(1), OperatorClass::contraction(0.0));
  OperatorSequence seq = static_sequence(20, half, 0.5, vec({0}));
  TrackingRun run = run_inexact_km(seq, vec({1}));

  REQUIRE(run.horizon() == 20);
  CHECK(run.iterates.back()[0] == doctest::Approx(std::pow(2.0, -20.0)).epsilon(1e-12));
  for (int t = 1; t < 20; ++t) {
    CHECK(run.steps[size_t(t)].residual_F ==
          doctest::Approx(0.5 * run.steps[size_t(t - 1)].residual_F));
  }
  // sigma == 0 for a static map.
  for (const auto& s : run.steps) CHECK(s.sigma == 0.0);
  // Contraction limit: ||x_t - x*|| <= L^{t-1} ||x_1 - x*||.
  for (int t = 1; t <= 21; ++t) {
    CHECK(run.tracking_error_at(t) <= std::pow(0.5, t - 1) * 1.0 + 1e-15);
  }
}

TEST_CASE("identity-base map: everything is fixed") {
  AveragedMap ident(0.3, [](const Point& x) { return x; }, full(2),
                    OperatorClass::non_expansive());
  OperatorSequence seq = static_sequence(10, ident, 1.0);
  TrackingRun run = run_inexact_km(seq, vec({2, -1}));
  for (const auto& x : run.iterates) CHECK((x - vec({2, -1})).norm() == 0.0);
  for (const auto& s : run.steps) {
    CHECK(s.residual_F == 0.0);
    CHECK(s.residual_T == 0.0);
  }
}

TEST_CASE("shifting quadratic: exact one-step tracking") {
  // f_t(x) = 0.5 (x - 0.1 t)^2, nu = 1 = 1/K: the step lands on the current
  // minimizer, so x_{t+1} = 0.1 t and the tracking error stays at the drift.
  const double drift = 0.1;
  auto objective = [drift](int t) {
    SmoothConvexFunction f;
    f.smoothness = 1.0;
    f.strong_convexity = 1.0;
    const double c = drift * t;
    f.value = [c](const Point& x) { return 0.5 * (x[0] - c) * (x[0] - c); };
    f.gradient = [c](const Point& x) { return Point(vec({x[0] - c})); };
    return f;
  };
  auto space = full(1);
  OperatorSequence seq(30, [objective, space, drift](int t) {
    InexactAveragedOperator op =
        projected_gradient_operator(objective(t), space, 1.0, GradientOracle::exact());
    return StepOperator{std::move(op.map), std::nullopt, 0.0, std::nullopt,
                        Point(vec({drift * t}))};
  });
  TrackingRun run = run_inexact_km(seq, vec({0}));
  for (int t = 1; t <= 30; ++t) {
    CHECK(run.iterates[size_t(t)][0] == doctest::Approx(drift * t).epsilon(1e-12));
  }
  for (int t = 2; t <= 30; ++t) {
    CHECK(run.steps[size_t(t - 1)].tracking_error == doctest::Approx(drift));
    CHECK(run.steps[size_t(t - 1)].sigma == doctest::Approx(drift));
  }
}

TEST_CASE("residual proportionality holds along runs") {
  auto t_map = [](const Point& x) -> Point {
    Point y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = 0.9 * x[i] + 0.05 * std::sin(x[i]);
    return y;
  };
  AveragedMap map(0.4, t_map, full(2), OperatorClass::non_expansive());
  OperatorSequence seq = static_sequence(50, map, 1.0);
  TrackingRun run = run_inexact_km(seq, vec({2, 3}));
  for (const auto& s : run.steps) {
    if (s.residual_T > 1e-12) {
      CHECK(s.residual_F / s.residual_T == doctest::Approx(0.4).epsilon(1e-10));
    }
  }
}

TEST_CASE("domain violations are hard errors naming the step") {
  // Base map pushes out of the unit box; the domain check trips at step 1.
  auto box = std::make_shared<const FeasibleSet>(FeasibleSet::box(vec({0}), vec({1})));
  AveragedMap escape(0.9, [](const Point& x) { return Point(x.array() + 5.0); }, box,
                     OperatorClass::non_expansive());
  OperatorSequence seq(3, [escape](int) {
    return StepOperator{escape, std::nullopt, 1.0, std::nullopt, std::nullopt};
  });
  RunOptions opts;
  opts.track_fixed_points = false;
  CHECK_THROWS_WITH_AS(run_inexact_km(seq, vec({0.5}), opts),
                       doctest::Contains("step 1"), std::runtime_error);

  CHECK_THROWS_WITH_AS(run_inexact_km(seq, vec({7.0}), opts),
                       doctest::Contains("x1"), std::invalid_argument);
}

TEST_CASE("inexact run records the oracle bound and residuals against the exact map") {
  // T = 0 with an approximation offset by exactly 0.08.
  auto zero_map = [](const Point& x) { return Point(Point::Zero(x.size())); };
  InexactOracle oracle{[](const Point& x) { return Point(Point::Constant(x.size(), 0.08)); },
                       0.08, MapFn([](const Point& x) { return Point(Point::Zero(x.size())); })};
  AveragedMap map(0.5, zero_map, full(1), OperatorClass::contraction(0.0));
  OperatorSequence seq(10, [map, oracle](int) {
    return StepOperator{map, oracle, 0.5, std::nullopt, Point(Point::Zero(1))};
  });
  TrackingRun run = run_inexact_km(seq, vec({1}));
  for (const auto& s : run.steps) CHECK(s.error_bound == doctest::Approx(0.08));
  // First step: x_2 = 0.5 * 1 + 0.5 * 0.08 = 0.54, while residual_T measured
  // against the exact zero map is |x_1 - 0| = 1.
  CHECK(run.iterates[1][0] == doctest::Approx(0.54));
  CHECK(run.steps[0].residual_T == doctest::Approx(1.0));
}

TEST_CASE("deterministic: identical inputs give identical runs") {
  TimeVaryingProblem prob = make_drifting_quadratic(3, vec({0.01, 0.0, -0.02}), 2.0,
                                                    0.5, 40, 123);
  auto build = [&prob]() {
    GradientOracle oracle = GradientOracle::noisy(0.05, 999);
    return OperatorSequence(prob.horizon, [&prob, oracle](int t) {
      InexactAveragedOperator op = projected_gradient_operator(
          prob.objective_at(t), prob.domain_at(t), 0.4, oracle,
          static_cast<std::uint64_t>(t));
      std::optional<Point> fp;
      if (prob.fixed_point_at) fp = (*prob.fixed_point_at)(t);
      return StepOperator{std::move(op.map), std::move(op.oracle), 0.8, std::nullopt,
                          std::move(fp)};
    });
  };
  OperatorSequence s1 = build();
  OperatorSequence s2 = build();
  TrackingRun r1 = run_inexact_km(s1, prob.start);
  TrackingRun r2 = run_inexact_km(s2, prob.start);
  REQUIRE(r1.iterates.size() == r2.iterates.size());
  for (std::size_t i = 0; i < r1.iterates.size(); ++i) {
    CHECK((r1.iterates[i] - r2.iterates[i]).norm() == 0.0);
  }
  for (std::size_t i = 0; i < r1.steps.size(); ++i) {
    CHECK(r1.steps[i].residual_T == r2.steps[i].residual_T);
    CHECK(r1.steps[i].sigma == r2.steps[i].sigma);
  }
}
