#include "kmtrack/config.hpp"
#include "kmtrack/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace {

void print_summary_rows(const std::vector<kmtrack::RunSummary>& rows) {
  std::printf("%-18s %-8s %-4s %-14s %-14s %-12s %-10s\n", "cell", "seed", "ok",
              "mean_resF^2", "mean_resT^2", "thm1_slack", "wall_s");
  for (const auto& r : rows) {
    std::printf("%-18s %-8llu %-4s %-14.6g %-14.6g %-12.4g %-10.3f\n", r.cell.c_str(),
                static_cast<unsigned long long>(r.seed), r.ok ? "yes" : "NO",
                r.mean_residual_F_sq, r.mean_residual_T_sq, r.thm1_slack,
                r.wall_seconds);
    if (!r.ok && !r.error.empty()) {
      std::printf("    ^ %s\n", r.error.c_str());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inexact running Krasnosel'skii-Mann tracking harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed_override = 0;
  bool seed_given = false;
  int grid_parallel = 0;

  auto* run_cmd = app.add_subcommand("run", "Execute the configured run grid");
  run_cmd->add_option("--config", config_path, "Config file")->required();
  run_cmd->add_option("--out", out_dir, "Output directory override");
  run_cmd->add_option("--seed", seed_override, "Replace the seed list with one seed")
      ->each([&](const std::string&) { seed_given = true; });
  run_cmd->add_option("--grid-parallel", grid_parallel,
                      "Number of grid cells to execute concurrently");

  auto* check_cmd = app.add_subcommand("check", "Validate a config without running");
  check_cmd->add_option("--config", config_path, "Config file")->required();

  std::string summarize_dir;
  auto* summarize_cmd =
      app.add_subcommand("summarize", "Aggregate summary rows from a run directory");
  summarize_cmd->add_option("dir", summarize_dir, "Run output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (run_cmd->parsed()) {
      kmtrack::ExperimentConfig cfg = kmtrack::parse_config_file(config_path);
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      if (seed_given) cfg.seeds = {seed_override};
      if (grid_parallel > 0) cfg.grid_parallel = grid_parallel;
      kmtrack::validate_config(cfg);

      const kmtrack::ExperimentOutcome outcome = kmtrack::run_experiment(cfg);
      std::vector<kmtrack::RunSummary> rows;
      rows.reserve(outcome.cells.size());
      for (const auto& c : outcome.cells) rows.push_back(c.summary);
      print_summary_rows(rows);
      std::printf("summary written to %s\n", outcome.summary_path.c_str());
      if (!outcome.all_ok) {
        for (const auto& c : outcome.cells) {
          if (!c.summary.ok) {
            std::fprintf(stderr, "FAILED cell %s seed %llu: %s\n",
                         c.summary.cell.c_str(),
                         static_cast<unsigned long long>(c.summary.seed),
                         c.summary.error.c_str());
          }
        }
        return 1;
      }
      return 0;
    }

    if (check_cmd->parsed()) {
      kmtrack::ExperimentConfig cfg = kmtrack::parse_config_file(config_path);
      kmtrack::validate_config(cfg);
      std::printf("config ok: scenario=%s horizon=%d grid=%zux%zu seeds=%zu\n",
                  cfg.scenario.c_str(), cfg.horizon, cfg.sigma_levels.size(),
                  cfg.error_levels.size(), cfg.seeds.size());
      return 0;
    }

    if (summarize_cmd->parsed()) {
      std::vector<kmtrack::RunSummary> rows;
      const std::filesystem::path root(summarize_dir);
      if (!std::filesystem::exists(root)) {
        std::cerr << "summarize: no such directory: " << summarize_dir << '\n';
        return 2;
      }
      for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && entry.path().filename() == "summary.csv") {
          const auto part = kmtrack::read_summary_csv(entry.path().string());
          rows.insert(rows.end(), part.begin(), part.end());
        }
      }
      if (rows.empty()) {
        std::cerr << "summarize: no summary.csv found under " << summarize_dir << '\n';
        return 2;
      }
      print_summary_rows(rows);
      for (const auto& r : rows) {
        if (!r.ok) return 1;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
