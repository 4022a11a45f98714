#include "kmtrack/experiment.hpp"

#include "kmtrack/network.hpp"
#include "kmtrack/problems.hpp"
#include "kmtrack/rng.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace kmtrack {

namespace {

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string format_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

double clamp_unit(double l) { return std::min(l, 1.0); }

OperatorSequence quadratic_sequence(const ExperimentConfig& cfg, double sigma,
                                    double error, std::uint64_t seed, Point* start) {
  auto dir_rng = rng::engine(seed, rng::kProblem, 3);
  const Point drift = sigma * rng::unit_vector(dir_rng, cfg.dimension);
  TimeVaryingProblem prob =
      make_drifting_quadratic(cfg.dimension, drift, cfg.smoothness,
                              cfg.strong_convexity, cfg.horizon, seed);
  *start = prob.start;
  const double nu = cfg.step_size;
  const double L = clamp_unit(std::max(std::abs(1.0 - nu * prob.strong_convexity),
                                       std::abs(1.0 - nu * prob.smoothness)));
  GradientOracle oracle =
      error > 0.0 ? GradientOracle::noisy(error, seed) : GradientOracle::exact();
  return OperatorSequence(cfg.horizon, [prob, nu, oracle, L](int t) {
    const SmoothConvexFunction f = prob.objective_at(t);
    InexactAveragedOperator op = projected_gradient_operator(
        f, prob.domain_at(t), nu, oracle, static_cast<std::uint64_t>(t));
    std::optional<Point> fp;
    if (prob.fixed_point_at) fp = (*prob.fixed_point_at)(t);
    return StepOperator{std::move(op.map), std::move(op.oracle), L, std::nullopt,
                        std::move(fp)};
  });
}

OperatorSequence forward_backward_sequence(const ExperimentConfig& cfg, double sigma,
                                           double error, std::uint64_t seed,
                                           Point* start) {
  auto dir_rng = rng::engine(seed, rng::kProblem, 3);
  const Point drift = sigma * rng::unit_vector(dir_rng, cfg.dimension);
  TimeVaryingProblem prob =
      make_drifting_lasso(cfg.dimension, drift, cfg.smoothness, cfg.strong_convexity,
                          cfg.l1_weight, cfg.horizon, seed);
  *start = prob.start;
  const double nu = cfg.step_size;
  const double L = clamp_unit(std::max(std::abs(1.0 - nu * prob.strong_convexity),
                                       std::abs(1.0 - nu * prob.smoothness)));
  GradientOracle oracle =
      error > 0.0 ? GradientOracle::noisy(error, seed) : GradientOracle::exact();
  return OperatorSequence(cfg.horizon, [prob, nu, oracle, L](int t) {
    const SmoothConvexFunction f = prob.objective_at(t);
    const ProxFunction g = *prob.prox_term_at(t);
    InexactAveragedOperator op = forward_backward_operator(
        f, g, prob.domain_at(t), nu, oracle, static_cast<std::uint64_t>(t));
    std::optional<Point> fp;
    if (prob.fixed_point_at) fp = (*prob.fixed_point_at)(t);
    return StepOperator{std::move(op.map), std::move(op.oracle), L, std::nullopt,
                        std::move(fp)};
  });
}

// Sigma presets and bandit constants are shared by every cell of a config;
// resolved once up front so parallel execution cannot change them.
struct NetworkContext {
  Network net;
  ScenarioParams params;
  std::map<double, SigmaPreset> presets;
  std::map<int, double> bandit_constants;
};

NetworkContext resolve_network_context(const ExperimentConfig& cfg) {
  NetworkContext ctx;
  ctx.net = build_network();
  ctx.params = ScenarioParams::defaults(ctx.net);
  for (double target : cfg.sigma_levels) {
    ctx.presets.emplace(target,
                        calibrate_sigma_preset(ctx.net, ctx.params, target,
                                               cfg.step_size, cfg.calibration_window,
                                               0xCA11B8ULL));
  }
  for (double e : cfg.error_levels) {
    const int evals = static_cast<int>(std::lround(e));
    if (evals > 0 && ctx.bandit_constants.find(evals) == ctx.bandit_constants.end()) {
      ctx.bandit_constants.emplace(
          evals, scenario_bandit_constant(ctx.net, ctx.params, cfg.bandit_delta, evals));
    }
  }
  return ctx;
}

OperatorSequence network_sequence(const ExperimentConfig& cfg, const NetworkContext& ctx,
                                  double sigma, double error, std::uint64_t seed,
                                  Point* start) {
  const SigmaPreset& preset = ctx.presets.at(sigma);
  const int evals = static_cast<int>(std::lround(error));
  VariationConfig vc = VariationConfig::scaled(preset.scale, seed);
  vc.bandit_delta = cfg.bandit_delta;
  vc.bandit_evals = evals;
  const double constant = evals > 0 ? ctx.bandit_constants.at(evals) : 0.0;
  *start = scenario_start(ctx.net, ctx.params, vc);
  return scenario_sequence(ctx.net, ctx.params, vc, cfg.step_size, constant,
                           cfg.horizon);
}

struct Job {
  double sigma = 0.0;
  double error = 0.0;
  std::uint64_t seed = 0;
};

}  // namespace

std::string cell_label(double sigma, double error) {
  return "s" + format_short(sigma) + "_e" + format_short(error);
}

CellSpec build_cell(const ExperimentConfig& cfg, double sigma, double error,
                    std::uint64_t seed) {
  RunOptions opts;
  opts.fixed_point_tol = cfg.fixed_point_tol;
  opts.fixed_point_max_iter = cfg.fixed_point_max_iter;

  Point start;
  if (cfg.scenario == "drifting_quadratic") {
    OperatorSequence seq = quadratic_sequence(cfg, sigma, error, seed, &start);
    return CellSpec{std::move(seq), std::move(start), opts};
  }
  if (cfg.scenario == "forward_backward") {
    OperatorSequence seq = forward_backward_sequence(cfg, sigma, error, seed, &start);
    return CellSpec{std::move(seq), std::move(start), opts};
  }
  if (cfg.scenario == "network") {
    NetworkContext ctx = resolve_network_context(cfg);
    OperatorSequence seq = network_sequence(cfg, ctx, sigma, error, seed, &start);
    return CellSpec{std::move(seq), std::move(start), opts};
  }
  throw std::runtime_error("build_cell: unknown scenario '" + cfg.scenario + "'");
}

void write_csv(const TrackingRun& run, const BoundLedger& ledger,
               const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  out << "t,residual_F,residual_T,tracking_error,sigma_t,e_T_t,alpha_t,"
         "thm1_cum_lhs,thm1_cum_rhs,thm2_bound\n";
  const int T = run.horizon();
  for (int t = 1; t <= T; ++t) {
    const StepRecord& s = run.steps[static_cast<std::size_t>(t - 1)];
    const std::size_t i = static_cast<std::size_t>(t - 1);
    out << t << ',' << format_g(s.residual_F) << ',' << format_g(s.residual_T) << ','
        << format_g(s.tracking_error) << ',' << format_g(s.sigma) << ','
        << format_g(s.error_bound) << ',' << format_g(s.alpha) << ','
        << format_g(ledger.residual.cum_lhs[i]) << ','
        << format_g(ledger.residual.cum_rhs[i]) << ','
        << format_g(ledger.tracking.per_step_bound[i]) << '\n';
  }
  if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

// Wall times stay out of the persisted summary so identical runs write
// identical bytes; the CLI prints them from the in-memory rows instead.
void write_summary_csv(const std::vector<RunSummary>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_summary_csv: cannot open " + path);
  out << "cell,seed,ok,mean_residual_F_sq,mean_residual_T_sq,thm1_slack,"
         "thm2_max_slack,asymptotic_ball,final_tracking_error,error\n";
  for (const RunSummary& r : rows) {
    out << r.cell << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ','
        << format_g(r.mean_residual_F_sq) << ',' << format_g(r.mean_residual_T_sq)
        << ',' << format_g(r.thm1_slack) << ',' << format_g(r.thm2_max_slack) << ','
        << format_g(r.asymptotic_ball) << ',' << format_g(r.final_tracking_error)
        << ',' << r.error << '\n';
  }
  if (!out) throw std::runtime_error("write_summary_csv: write failed for " + path);
}

std::vector<RunSummary> read_summary_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_summary_csv: cannot open " + path);
  std::vector<RunSummary> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    for (int i = 0; i < 9; ++i) {
      if (!std::getline(ss, f, ',')) {
        throw std::runtime_error("read_summary_csv: malformed row in " + path);
      }
      fields.push_back(f);
    }
    std::getline(ss, f);  // error message (may contain commas)
    RunSummary r;
    r.cell = fields[0];
    r.seed = static_cast<std::uint64_t>(std::stoull(fields[1]));
    r.ok = fields[2] == "1";
    r.mean_residual_F_sq = std::stod(fields[3]);
    r.mean_residual_T_sq = std::stod(fields[4]);
    r.thm1_slack = std::stod(fields[5]);
    r.thm2_max_slack = std::stod(fields[6]);
    r.asymptotic_ball = std::stod(fields[7]);
    r.final_tracking_error = std::stod(fields[8]);
    r.error = f;
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

CellOutcome execute_cell(const ExperimentConfig& cfg,
                         const NetworkContext* net_ctx, const Job& job) {
  CellOutcome out;
  out.summary.cell = cell_label(job.sigma, job.error);
  out.summary.seed = job.seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Point start;
    OperatorSequence seq = [&]() -> OperatorSequence {
      if (cfg.scenario == "drifting_quadratic") {
        return quadratic_sequence(cfg, job.sigma, job.error, job.seed, &start);
      }
      if (cfg.scenario == "forward_backward") {
        return forward_backward_sequence(cfg, job.sigma, job.error, job.seed, &start);
      }
      return network_sequence(cfg, *net_ctx, job.sigma, job.error, job.seed, &start);
    }();

    RunOptions opts;
    opts.fixed_point_tol = cfg.fixed_point_tol;
    opts.fixed_point_max_iter = cfg.fixed_point_max_iter;

    TrackingRun run = run_inexact_km(seq, start, opts);
    BoundLedger ledger = evaluate_bounds(run);

    RunSummary& s = out.summary;
    s.mean_residual_F_sq = ledger.residual.mean_residual_F_sq;
    s.mean_residual_T_sq = ledger.residual.mean_residual_T_sq;
    s.thm1_slack = ledger.residual.min_slack;
    s.thm2_max_slack = ledger.tracking.max_violation;
    s.asymptotic_ball = ledger.tracking.asymptotic_ball
                            ? *ledger.tracking.asymptotic_ball
                            : std::numeric_limits<double>::quiet_NaN();
    s.final_tracking_error = run.final_tracking_error;
    s.ok = ledger.satisfied();
    if (!s.ok) {
      // Name the first violating step for the exit-code diagnostics.
      int bad_t = -1;
      for (std::size_t i = 0; i < ledger.residual.cum_lhs.size(); ++i) {
        if (ledger.residual.cum_lhs[i] > ledger.residual.cum_rhs[i] +
                                             1e-7 * std::max(1.0, ledger.residual.cum_rhs[i])) {
          bad_t = static_cast<int>(i) + 1;
          break;
        }
      }
      if (bad_t < 0) {
        for (int t = 1; t <= run.horizon(); ++t) {
          const double measured = run.tracking_error_at(t + 1);
          const double bound =
              ledger.tracking.per_step_bound[static_cast<std::size_t>(t - 1)];
          if (measured > bound + 1e-7 * std::max(1.0, bound)) {
            bad_t = t;
            break;
          }
        }
      }
      s.error = "bound violated at step " + std::to_string(bad_t);
    }

    out.run = std::move(run);
    out.ledger = std::move(ledger);
  } catch (const std::exception& e) {
    out.summary.ok = false;
    out.summary.error = e.what();
  }
  const auto t1 = std::chrono::steady_clock::now();
  out.summary.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  return out;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  std::filesystem::create_directories(cfg.out_dir);

  // Resolve shared network state (preset calibration, bandit constants)
  // before any parallelism so results cannot depend on scheduling.
  std::optional<NetworkContext> net_ctx;
  if (cfg.scenario == "network") net_ctx = resolve_network_context(cfg);

  std::vector<Job> jobs;
  for (double sigma : cfg.sigma_levels) {
    for (double error : cfg.error_levels) {
      for (std::uint64_t seed : cfg.seeds) {
        jobs.push_back(Job{sigma, error, seed});
      }
    }
  }

  std::vector<CellOutcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  const int workers = std::max(1, std::min<int>(cfg.grid_parallel,
                                                static_cast<int>(jobs.size())));
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) break;
      outcomes[i] = execute_cell(cfg, net_ctx ? &*net_ctx : nullptr, jobs[i]);
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ExperimentOutcome result;
  result.all_ok = true;
  std::vector<RunSummary> rows;
  rows.reserve(outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    CellOutcome& oc = outcomes[i];
    if (oc.run && oc.ledger) {
      oc.csv_path = cfg.out_dir + "/" + oc.summary.cell + "__seed" +
                    std::to_string(oc.summary.seed) + ".csv";
      write_csv(*oc.run, *oc.ledger, oc.csv_path);
    }
    result.all_ok = result.all_ok && oc.summary.ok;
    rows.push_back(oc.summary);
    result.cells.push_back(std::move(oc));
  }
  result.summary_path = cfg.out_dir + "/summary.csv";
  write_summary_csv(rows, result.summary_path);
  return result;
}

}  // namespace kmtrack
