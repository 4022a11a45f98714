#include "kmtrack/feasible_set.hpp"
#include "kmtrack/rng.hpp"

#include <doctest.h>

#include <Eigen/LU>

#include <cmath>
#include <limits>

using namespace kmtrack;

namespace {

Point vec(std::initializer_list<double> vals) {
  Point p(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double v : vals) p[i++] = v;
  return p;
}

// Exhaustive search over a fine grid of the scaled simplex in R^3.
Point brute_force_simplex_r3(const Point& y, double scale, int resolution) {
  Point best = vec({scale, 0, 0});
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= resolution; ++i) {
    for (int j = 0; j + i <= resolution; ++j) {
      Point p(3);
      p[0] = scale * static_cast<double>(i) / resolution;
      p[1] = scale * static_cast<double>(j) / resolution;
      p[2] = scale - p[0] - p[1];
      const double d = (p - y).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = p;
      }
    }
  }
  return best;
}

std::vector<FeasibleSet> sample_sets() {
  std::vector<FeasibleSet> sets;
  sets.push_back(FeasibleSet::box(vec({0, 0}), vec({1, 1})));
  sets.push_back(FeasibleSet::ball(vec({1, -1}), 0.75));
  sets.push_back(FeasibleSet::simplex(2, 1.0));
  sets.push_back(FeasibleSet::halfspaces(2, {{vec({1, 1}), 1.0}}));
  sets.push_back(FeasibleSet::halfspaces(2, {{vec({1, 0}), 0.5}, {vec({0, 1}), 0.25},
                                             {vec({-1, -1}), 0.4}}));
  {
    Matrix a(1, 2);
    a << 1, -1;
    sets.push_back(FeasibleSet::affine(a, vec({0.3})));
  }
  sets.push_back(FeasibleSet::intersection(
      {FeasibleSet::box(vec({-2, -2}), vec({2, 2})), FeasibleSet::ball(vec({0, 0}), 1.5),
       FeasibleSet::halfspaces(2, {{vec({0, 1}), 0.5}})}));
  return sets;
}

}  // namespace

TEST_CASE("closed-form projections") {
  FeasibleSet box = FeasibleSet::box(vec({0, 0}), vec({1, 1}));
  CHECK(box.project(vec({2, -1})) == vec({1, 0}));
  CHECK(box.project(vec({0.5, 0.25})) == vec({0.5, 0.25}));  // interior: identity

  FeasibleSet ball = FeasibleSet::ball(vec({0, 0}), 1.0);
  CHECK((ball.project(vec({3, 4})) - vec({0.6, 0.8})).norm() ==
        doctest::Approx(0.0).epsilon(1e-14));

  FeasibleSet hs = FeasibleSet::halfspaces(1, {{vec({1}), 2.0}});
  CHECK(hs.project(vec({5}))[0] == doctest::Approx(2.0));
  CHECK(hs.project(vec({-5}))[0] == doctest::Approx(-5.0));
}

TEST_CASE("simplex projection: symmetry case and grid oracle") {
  FeasibleSet sim2 = FeasibleSet::simplex(2, 1.0);
  CHECK((sim2.project(vec({0.6, 0.6})) - vec({0.5, 0.5})).norm() ==
        doctest::Approx(0.0).epsilon(1e-14));

  FeasibleSet sim3 = FeasibleSet::simplex(3, 1.0);
  const Point y = vec({0.2, 0.9, 0.5});
  const Point p = sim3.project(y);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.minCoeff() >= 0.0);
  const Point brute = brute_force_simplex_r3(y, 1.0, 400);
  CHECK((p - brute).norm() < 1e-2);  // grid resolution limits the match
  // The sorted projection must not lose to the best grid point.
  CHECK((p - y).squaredNorm() <= (brute - y).squaredNorm() + 1e-12);

  auto g = rng::engine(5, 21);
  for (int i = 0; i < 25; ++i) {
    const Point q = 2.0 * rng::gaussian_vector(g, 3);
    const Point pq = sim3.project(q);
    const Point bq = brute_force_simplex_r3(q, 1.0, 250);
    CHECK((pq - q).squaredNorm() <= (bq - q).squaredNorm() + 1e-12);
    CHECK((pq - bq).norm() < 2e-2);
  }
}

TEST_CASE("affine projection solves the normal equations") {
  Matrix a(2, 3);
  a << 1, 1, 0, 0, 1, 1;
  const Point b = vec({1, 2});
  FeasibleSet aff = FeasibleSet::affine(a, b);
  auto g = rng::engine(6, 22);
  for (int i = 0; i < 50; ++i) {
    const Point y = 3.0 * rng::gaussian_vector(g, 3);
    const Point p = aff.project(y);
    CHECK((a * p - b).norm() == doctest::Approx(0.0).epsilon(1e-10));
    // Correction orthogonal to the nullspace of A <=> y - p in the row space.
    const Point r = y - p;
    Eigen::FullPivLU<Matrix> lu(a);
    const Matrix null = lu.kernel();
    CHECK((null.transpose() * r).norm() == doctest::Approx(0.0).epsilon(1e-10));
  }
}

TEST_CASE("projection idempotence and firm non-expansiveness on all variants") {
  auto g = rng::engine(7, 23);
  for (const FeasibleSet& set : sample_sets()) {
    for (int i = 0; i < 200; ++i) {
      const Point x = 3.0 * rng::gaussian_vector(g, set.dim());
      const Point y = 3.0 * rng::gaussian_vector(g, set.dim());
      const Point px = set.project(x);
      const Point py = set.project(y);
      // proj(proj(y)) = proj(y)
      CHECK((set.project(px) - px).norm() <= 1e-9);
      CHECK(set.contains(px, 1e-8));
      // ||Px - Py||^2 <= (x - y)' (Px - Py)
      CHECK((px - py).squaredNorm() <= (x - y).dot(px - py) + 1e-9);
    }
  }
}

TEST_CASE("dykstra handles intersections and flags empty ones") {
  // Box corner cut by a halfspace: the projection of a far point lands on the
  // cutting surface.
  FeasibleSet inter = FeasibleSet::intersection(
      {FeasibleSet::box(vec({0, 0}), vec({1, 1})),
       FeasibleSet::halfspaces(2, {{vec({1, 1}), 1.0}})});
  const Point p = inter.project(vec({2, 2}));
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK((p - vec({0.5, 0.5})).norm() < 1e-8);

  // Ball and box that do not meet.
  FeasibleSet empty = FeasibleSet::intersection(
      {FeasibleSet::box(vec({0, 0}), vec({1, 1})), FeasibleSet::ball(vec({5, 5}), 0.5)});
  CHECK_THROWS_WITH_AS(empty.project(vec({0, 0})), doctest::Contains("empty"),
                       std::runtime_error);
}

TEST_CASE("radius bounds certify compact variants") {
  CHECK(*FeasibleSet::box(vec({-1, -1}), vec({2, 1})).radius_bound() ==
        doctest::Approx(std::sqrt(5.0)));
  CHECK(*FeasibleSet::ball(vec({3, 4}), 1.0).radius_bound() == doctest::Approx(6.0));
  CHECK(*FeasibleSet::simplex(4, 2.0).radius_bound() == doctest::Approx(2.0));
  CHECK(!FeasibleSet::full_space(2).radius_bound().has_value());
  CHECK(!FeasibleSet::nonnegative(2).radius_bound().has_value());
}

TEST_CASE("construction errors") {
  CHECK_THROWS_AS(FeasibleSet::box(vec({1}), vec({0})), std::invalid_argument);
  CHECK_THROWS_AS(FeasibleSet::ball(vec({0}), -1.0), std::invalid_argument);
  CHECK_THROWS_AS(FeasibleSet::simplex(2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(FeasibleSet::halfspaces(2, {{vec({0, 0}), 1.0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(FeasibleSet::intersection({}), std::invalid_argument);
}
