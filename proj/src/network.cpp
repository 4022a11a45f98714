#include "kmtrack/network.hpp"

#include "kmtrack/bandit.hpp"
#include "kmtrack/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace kmtrack {

namespace {

// Directed links, 0-based nodes. Flow 0 travels 0 -> 2 over the disjoint
// paths (L0,L1) and (L2,L3); flow 1 travels 3 -> 5 over (L4,L5) or the detour
// L7 -> (L0,L6) / (L2,L5).
constexpr std::array<std::pair<int, int>, Network::kLinks> kLinkEnds = {{
    {0, 1},  // L0: 1 -> 2
    {1, 2},  // L1: 2 -> 3
    {0, 4},  // L2: 1 -> 5
    {4, 2},  // L3: 5 -> 3
    {3, 4},  // L4: 4 -> 5
    {4, 5},  // L5: 5 -> 6
    {1, 5},  // L6: 2 -> 6
    {3, 0},  // L7: 4 -> 1
}};

// Documented per-link exogenous means; split across the flows that can use
// the link so conservation stays satisfiable.
constexpr std::array<double, Network::kLinks> kExoTotals = {0.2, 0.3, 0.3, 0.4,
                                                            0.5, 0.2, 0.1, 0.4};

bool reaches(const std::array<std::pair<int, int>, Network::kLinks>& links, int from,
             int target) {
  if (from == target) return true;
  std::vector<int> stack{from};
  std::array<bool, Network::kNodes> seen{};
  seen[static_cast<std::size_t>(from)] = true;
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();
    for (const auto& [tail, head] : links) {
      if (tail == node && !seen[static_cast<std::size_t>(head)]) {
        if (head == target) return true;
        seen[static_cast<std::size_t>(head)] = true;
        stack.push_back(head);
      }
    }
  }
  return false;
}

}  // namespace

Point Network::node_flow(const Point& link_load) const {
  return incidence * link_load;
}

Network build_network() {
  Network net;
  net.links = kLinkEnds;
  net.incidence = Matrix::Zero(Network::kNodes, Network::kLinks);
  for (int l = 0; l < Network::kLinks; ++l) {
    net.incidence(net.links[static_cast<std::size_t>(l)].first, l) = 1.0;
    net.incidence(net.links[static_cast<std::size_t>(l)].second, l) = -1.0;
  }
  net.source = {0, 3};
  net.dest = {2, 5};
  for (int s = 0; s < Network::kFlows; ++s) {
    for (int l = 0; l < Network::kLinks; ++l) {
      // A flow may only load links lying on some source->destination path:
      // the tail must be reachable from the source and the destination from
      // the head. Exogenous traffic obeys the same support, otherwise its
      // divergence could not be absorbed by any nonnegative routing.
      if (reaches(net.links, net.source[static_cast<std::size_t>(s)],
                  net.links[static_cast<std::size_t>(l)].first) &&
          reaches(net.links, net.links[static_cast<std::size_t>(l)].second,
                  net.dest[static_cast<std::size_t>(s)])) {
        net.usable_links[static_cast<std::size_t>(s)].push_back(l);
      }
    }
  }
  return net;
}

ScenarioParams ScenarioParams::defaults(const Network& net) {
  ScenarioParams p;
  p.kappa = Point(Network::kFlows);
  p.kappa << 2.8, 3.0;
  p.cost_base = Point(Network::kLinks);
  p.cost_base << 0.50, 0.55, 0.60, 0.52, 0.48, 0.58, 0.62, 0.45;
  p.exo_mean = Matrix::Zero(Network::kLinks, Network::kFlows);
  for (int l = 0; l < Network::kLinks; ++l) {
    std::vector<int> users;
    for (int s = 0; s < Network::kFlows; ++s) {
      const auto& usable = net.usable_links[static_cast<std::size_t>(s)];
      if (std::find(usable.begin(), usable.end(), l) != usable.end()) {
        users.push_back(s);
      }
    }
    for (int s : users) {
      p.exo_mean(l, s) = kExoTotals[static_cast<std::size_t>(l)] /
                         static_cast<double>(users.size());
    }
  }
  return p;
}

VariationConfig VariationConfig::scaled(double scale, std::uint64_t seed) {
  VariationConfig cfg;
  cfg.channel_std = 0.04 * scale;
  cfg.power_std = 0.04 * scale;
  cfg.traffic_std = 0.012 * scale;
  cfg.cost_scale = 0.30 * scale;
  cfg.seed = seed;
  return cfg;
}

std::pair<LinkState, TrafficState> sample_timestep(const Network& net,
                                                   const ScenarioParams& params,
                                                   const VariationConfig& cfg, int t) {
  auto g = rng::engine(cfg.seed, rng::kScenario, static_cast<std::uint64_t>(t));

  LinkState link;
  link.gain = Point(Network::kLinks);
  link.power = Point(Network::kLinks);
  link.capacity = Point(Network::kLinks);

  // Normalized gain: squared modulus of a complex draw with mean 1 + j1
  // (gain 2 at zero variance, i.e. normalized against the noise floor).
  for (int l = 0; l < Network::kLinks; ++l) {
    const double re = 1.0 + cfg.channel_std * rng::gaussian(g);
    const double im = 1.0 + cfg.channel_std * rng::gaussian(g);
    link.gain[l] = re * re + im * im;
  }
  // Per-node transmit power; a link uses its tail node's draw.
  Point node_power(Network::kNodes);
  for (int i = 0; i < Network::kNodes; ++i) {
    node_power[i] = std::max(0.0, 1.0 + cfg.power_std * rng::gaussian(g));
  }
  for (int l = 0; l < Network::kLinks; ++l) {
    link.power[l] = node_power[net.links[static_cast<std::size_t>(l)].first];
    link.capacity[l] = std::log2(1.0 + link.power[l] * link.gain[l]);
  }

  TrafficState traffic;
  traffic.kappa = params.kappa;
  traffic.exogenous = Matrix::Zero(Network::kLinks, Network::kFlows);
  for (int l = 0; l < Network::kLinks; ++l) {
    for (int s = 0; s < Network::kFlows; ++s) {
      const double mean = params.exo_mean(l, s);
      if (mean > 0.0) {
        traffic.exogenous(l, s) =
            std::max(0.0, mean + cfg.traffic_std * rng::gaussian(g));
      }
    }
  }
  // Costs move mostly through a common factor; the per-link part is kept an
  // order of magnitude smaller so cheapest routes do not flip between steps.
  traffic.cost = Point(Network::kLinks);
  const double common = std::max(0.25, 1.0 + cfg.cost_scale * rng::gaussian(g));
  for (int l = 0; l < Network::kLinks; ++l) {
    traffic.cost[l] = params.cost_base[l] * common *
                      std::max(0.5, 1.0 + 0.1 * cfg.cost_scale * rng::gaussian(g));
  }
  return {std::move(link), std::move(traffic)};
}

double utility_value(const Network&, const Point& x, const Point& kappa,
                     const Point& cost) {
  double v = 0.0;
  for (int s = 0; s < Network::kFlows; ++s) {
    const double z = x[Network::z_index(s)];
    if (z <= -1.0) throw std::domain_error("utility_value: rate at or below -1");
    v -= kappa[s] * std::log(1.0 + z);
  }
  for (int s = 0; s < Network::kFlows; ++s) {
    for (int l = 0; l < Network::kLinks; ++l) {
      v += cost[l] * x[Network::r_index(l, s)];
    }
  }
  return v;
}

Point utility_gradient(const Network&, const Point& x, const Point& kappa,
                       const Point& cost) {
  Point grad(Network::dim());
  for (int s = 0; s < Network::kFlows; ++s) {
    const double z = x[Network::z_index(s)];
    if (z <= -1.0) throw std::domain_error("utility_gradient: rate at or below -1");
    grad[Network::z_index(s)] = -kappa[s] / (1.0 + z);
  }
  for (int s = 0; s < Network::kFlows; ++s) {
    for (int l = 0; l < Network::kLinks; ++l) {
      grad[Network::r_index(l, s)] = cost[l];
    }
  }
  return grad;
}

std::shared_ptr<const FeasibleSet> scenario_feasible_set(const Network& net,
                                                         const LinkState& link,
                                                         const TrafficState& traffic) {
  const int dim = Network::dim();

  // Flow conservation per flow and node:
  //   [T (r^s + w^s)]_i = z_s (1{i = src} - 1{i = dst}).
  Matrix A = Matrix::Zero(Network::kNodes * Network::kFlows, dim);
  Point b = Point::Zero(Network::kNodes * Network::kFlows);
  for (int s = 0; s < Network::kFlows; ++s) {
    const Point exo_flow = net.node_flow(traffic.exogenous.col(s));
    for (int i = 0; i < Network::kNodes; ++i) {
      const int row = s * Network::kNodes + i;
      for (int l = 0; l < Network::kLinks; ++l) {
        A(row, Network::r_index(l, s)) = net.incidence(i, l);
      }
      double zc = 0.0;
      if (i == net.source[static_cast<std::size_t>(s)]) zc -= 1.0;
      if (i == net.dest[static_cast<std::size_t>(s)]) zc += 1.0;
      A(row, Network::z_index(s)) = zc;
      b[row] = -exo_flow[i];
    }
  }

  // Per-link capacity on the total load including exogenous traffic.
  std::vector<Halfspace> caps;
  caps.reserve(Network::kLinks);
  for (int l = 0; l < Network::kLinks; ++l) {
    const double exo = traffic.exogenous.row(l).sum();
    const double headroom = link.capacity[l] - exo;
    if (headroom < 0.0) {
      const auto [tail, head] = net.links[static_cast<std::size_t>(l)];
      throw std::runtime_error("scenario_feasible_set: capacity of link (" +
                               std::to_string(tail + 1) + "," + std::to_string(head + 1) +
                               ") is below its exogenous load");
    }
    Halfspace h;
    h.normal = Point::Zero(dim);
    for (int s = 0; s < Network::kFlows; ++s) h.normal[Network::r_index(l, s)] = 1.0;
    h.offset = headroom;
    caps.push_back(std::move(h));
  }

  // Unusable links carry no flow; fold that into the nonnegativity box.
  const double inf = std::numeric_limits<double>::infinity();
  Point lo = Point::Zero(dim);
  Point hi = Point::Constant(dim, inf);
  for (int s = 0; s < Network::kFlows; ++s) {
    const auto& usable = net.usable_links[static_cast<std::size_t>(s)];
    for (int l = 0; l < Network::kLinks; ++l) {
      if (std::find(usable.begin(), usable.end(), l) == usable.end()) {
        hi[Network::r_index(l, s)] = 0.0;
      }
    }
  }

  std::vector<FeasibleSet> members;
  members.push_back(FeasibleSet::affine(std::move(A), std::move(b)));
  members.push_back(FeasibleSet::halfspaces(dim, std::move(caps)));
  members.push_back(FeasibleSet::box(std::move(lo), std::move(hi)));
  return std::make_shared<const FeasibleSet>(
      FeasibleSet::intersection(std::move(members)));
}

SmoothConvexFunction scenario_objective(const Network& net, const TrafficState& traffic) {
  SmoothConvexFunction f;
  f.smoothness = traffic.kappa.maxCoeff();  // curvature of -k log(1+z) at z = 0
  f.strong_convexity = 0.0;                 // linear in the link rates
  const Network net_copy = net;
  const Point kappa = traffic.kappa;
  const Point cost = traffic.cost;
  f.value = [net_copy, kappa, cost](const Point& x) {
    return utility_value(net_copy, x, kappa, cost);
  };
  f.gradient = [net_copy, kappa, cost](const Point& x) {
    return utility_gradient(net_copy, x, kappa, cost);
  };
  return f;
}

namespace {

// Bandit estimation applies to the rate-utility part only (the link-cost
// gradient is known exactly); the estimator perturbs the two z coordinates.
GradientOracle scenario_bandit_oracle(const Network& net, const TrafficState& traffic,
                                      const VariationConfig& cfg, double constant) {
  const Point kappa = traffic.kappa;
  const Point cost = traffic.cost;
  const double delta = cfg.bandit_delta;
  const int evals = cfg.bandit_evals;
  const std::uint64_t seed = cfg.seed;
  const double K = kappa.maxCoeff();

  ValueFn z_value = [kappa](const Point& z) {
    double v = 0.0;
    for (Eigen::Index s = 0; s < z.size(); ++s) {
      if (z[s] <= -1.0) throw std::domain_error("bandit evaluation: rate at or below -1");
      v -= kappa[s] * std::log(1.0 + z[s]);
    }
    return v;
  };

  auto emit = [z_value, cost, delta, evals, seed, K, constant](
                  const SmoothConvexFunction&, const Point& x,
                  std::uint64_t step) -> Point {
    auto g = rng::engine(seed, rng::kBanditDirections, step);
    Point z(Network::kFlows);
    for (int s = 0; s < Network::kFlows; ++s) z[s] = x[Network::z_index(s)];
    const BanditEstimate est = bandit_gradient(
        z_value, z, delta, evals, g, K, constant,
        [](const Point& p) { return p.minCoeff() > -1.0 + 1e-9; });
    Point y(Network::dim());
    for (int s = 0; s < Network::kFlows; ++s) y[Network::z_index(s)] = est.gradient[s];
    for (int s = 0; s < Network::kFlows; ++s) {
      for (int l = 0; l < Network::kLinks; ++l) y[Network::r_index(l, s)] = cost[l];
    }
    return y;
  };

  const double e_y = K * delta + constant * static_cast<double>(Network::kFlows) /
                                     std::sqrt(static_cast<double>(evals));
  (void)net;
  return GradientOracle::custom(emit, e_y);
}

}  // namespace

StepOperator scenario_operator(const Network& net, const ScenarioParams& params,
                               const VariationConfig& cfg, double nu,
                               double bandit_constant, int t) {
  const auto [link, traffic] = sample_timestep(net, params, cfg, t);
  const SmoothConvexFunction f = scenario_objective(net, traffic);
  if (!(nu > 0.0 && nu < 2.0 / f.smoothness)) {
    throw std::invalid_argument("scenario_operator: nu must lie in (0, 2/K)");
  }
  auto set = scenario_feasible_set(net, link, traffic);

  GradientOracle oracle = cfg.bandit_evals > 0
                              ? scenario_bandit_oracle(net, traffic, cfg, bandit_constant)
                              : GradientOracle::exact();
  InexactAveragedOperator op = projected_gradient_operator(
      f, set, nu, oracle, static_cast<std::uint64_t>(t));

  StepOperator step{std::move(op.map), std::move(op.oracle), 1.0, std::nullopt,
                    std::nullopt};
  return step;
}

OperatorSequence scenario_sequence(const Network& net, const ScenarioParams& params,
                                   const VariationConfig& cfg, double nu,
                                   double bandit_constant, int horizon) {
  const Network net_copy = net;
  const ScenarioParams params_copy = params;
  const VariationConfig cfg_copy = cfg;
  return OperatorSequence(horizon, [net_copy, params_copy, cfg_copy, nu,
                                    bandit_constant](int t) {
    return scenario_operator(net_copy, params_copy, cfg_copy, nu, bandit_constant, t);
  });
}

Point scenario_start(const Network& net, const ScenarioParams& params,
                     const VariationConfig& cfg) {
  const auto [link, traffic] = sample_timestep(net, params, cfg, 1);
  auto set = scenario_feasible_set(net, link, traffic);
  Point guess = Point::Constant(Network::dim(), 0.3);
  for (int s = 0; s < Network::kFlows; ++s) guess[Network::z_index(s)] = 0.8;
  return set->project(guess);
}

double scenario_bandit_constant(const Network& net, const ScenarioParams& params,
                                double delta, int evals) {
  const Point kappa = params.kappa;
  ValueFn z_value = [kappa](const Point& z) {
    double v = 0.0;
    for (Eigen::Index s = 0; s < z.size(); ++s) v -= kappa[s] * std::log(1.0 + z[s]);
    return v;
  };
  auto z_grad = [kappa](const Point& z) {
    Point g(z.size());
    for (Eigen::Index s = 0; s < z.size(); ++s) g[s] = -kappa[s] / (1.0 + z[s]);
    return g;
  };
  std::vector<Point> probes;
  for (double z0 : {0.2, 0.8, 1.5}) {
    for (double z1 : {0.2, 0.8, 1.5}) {
      Point p(2);
      p << z0, z1;
      probes.push_back(std::move(p));
    }
  }
  (void)net;
  return calibrate_bandit_constant(z_value, z_grad, probes, delta, evals,
                                   kappa.maxCoeff(), 60, 0x5ca1ab1eULL);
}

std::vector<Point> optimizer_trajectory(const Network& net, const ScenarioParams& params,
                                        const VariationConfig& cfg, double nu,
                                        int window, double tol, long max_iter) {
  std::vector<Point> traj;
  traj.reserve(static_cast<std::size_t>(window));
  Point warm = scenario_start(net, params, cfg);
  for (int t = 1; t <= window; ++t) {
    const auto [link, traffic] = sample_timestep(net, params, cfg, t);
    const SmoothConvexFunction f = scenario_objective(net, traffic);
    auto set = scenario_feasible_set(net, link, traffic);
    InexactAveragedOperator op =
        projected_gradient_operator(f, set, nu, GradientOracle::exact());
    warm = fixed_point_oracle(op.map, warm, tol, max_iter);
    traj.push_back(warm);
  }
  return traj;
}

namespace {

double robust_sup(std::vector<double> values, double quantile) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t idx = std::min(
      values.size() - 1,
      static_cast<std::size_t>(quantile * static_cast<double>(values.size())));
  return values[idx];
}

}  // namespace

SigmaPreset calibrate_sigma_preset(const Network& net, const ScenarioParams& params,
                                   double target_sigma, double nu, int window,
                                   std::uint64_t calib_seed) {
  auto measure = [&](double scale) {
    VariationConfig cfg = VariationConfig::scaled(scale, calib_seed);
    const std::vector<Point> traj =
        optimizer_trajectory(net, params, cfg, nu, window, 1e-7, 200000);
    const std::vector<double> drifts = drift_sequence(traj);
    double norm_sum = 0.0;
    for (const Point& p : traj) norm_sum += p.norm();
    SigmaPreset out;
    out.target = target_sigma;
    out.scale = scale;
    out.measured_drift = robust_sup(drifts, 0.95);
    out.mean_solution_norm = norm_sum / static_cast<double>(traj.size());
    out.variation_pct = 100.0 * out.measured_drift / out.mean_solution_norm;
    return out;
  };

  // The drift response is smooth and near power-law in the scale, so a
  // damped log-space secant search converges in a handful of probes.
  double scale = 0.05;
  SigmaPreset cur = measure(scale);
  SigmaPreset best = cur;
  for (int it = 0; it < 14; ++it) {
    if (std::abs(cur.measured_drift - target_sigma) <= 0.06 * target_sigma) {
      return cur;
    }
    double ratio = target_sigma / std::max(cur.measured_drift, 1e-9);
    ratio = std::clamp(ratio, 0.2, 5.0);
    scale = std::clamp(scale * ratio, 1e-5, 8.0);
    cur = measure(scale);
    if (std::abs(cur.measured_drift - target_sigma) <
        std::abs(best.measured_drift - target_sigma)) {
      best = cur;
    }
  }
  if (std::abs(best.measured_drift - target_sigma) > 0.10 * target_sigma) {
    throw std::runtime_error(
        "calibrate_sigma_preset: could not match drift target " +
        std::to_string(target_sigma) + " (best " +
        std::to_string(best.measured_drift) + ")");
  }
  return best;
}

}  // namespace kmtrack
