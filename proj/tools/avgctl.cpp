// Experiment driver: built-in tests and config-file studies.
#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <optional>
#include <thread>

#include "avgctl/runner.hpp"

namespace {

struct Overrides {
  std::string out = "results";
  std::optional<std::uint64_t> seed;
  int jobs = std::max(1u, std::thread::hardware_concurrency());
  std::optional<double> horizon;
  std::optional<int> n_max;
  std::optional<int> grid;
  std::optional<std::string> schedule;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Solver seed");
  cmd->add_option("--jobs", o.jobs, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--horizon", o.horizon, "Final time T");
  cmd->add_option("--n-max", o.n_max, "Last study index N");
  cmd->add_option("--grid", o.grid, "Grid points per state axis");
  cmd->add_option("--schedule", o.schedule, "Weight rule")
      ->check(CLI::IsMember({"halving", "dirac"}));
}

void apply(const Overrides& o, avgctl::ExperimentConfig& c) {
  if (o.seed) c.solver.seed = *o.seed;
  if (o.horizon) c.t_end = *o.horizon;
  if (o.n_max) c.n_max = *o.n_max;
  if (o.grid) c.grid.counts.assign(c.grid.counts.size(), *o.grid);
  if (o.schedule) {
    c.schedule.rule = *o.schedule == "dirac"
                          ? avgctl::WeightSchedule::Rule::kDirac
                          : avgctl::WeightSchedule::Rule::kHalving;
    c.schedule.fixed.clear();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Averaged optimal control experiments"};
  app.require_subcommand(1);

  Overrides o;
  std::string config_path;
  auto* test1 = app.add_subcommand("test1", "Scalar sin family, 5 atoms");
  auto* test2 = app.add_subcommand("test2", "Three planar affine systems");
  auto* run = app.add_subcommand("run", "Study described by a config file");
  run->add_option("path", config_path, "Config file")->required();
  for (auto* cmd : {test1, test2, run}) add_overrides(cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : avgctl::kExitConfig;
  }

  avgctl::ExperimentConfig cfg;
  try {
    if (*test1) {
      cfg = avgctl::builtin_test1_config();
    } else if (*test2) {
      cfg = avgctl::builtin_test2_config();
    } else {
      cfg = avgctl::load_config(config_path);
    }
  } catch (const avgctl::ConfigError& e) {
    std::cerr << (config_path.empty() ? "" : config_path + ": ") << e.what()
              << '\n';
    return avgctl::kExitConfig;
  }
  apply(o, cfg);

  avgctl::RunSettings settings;
  settings.out_dir = o.out;
  settings.jobs = o.jobs;
  try {
    return avgctl::run_experiment(cfg, settings, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return avgctl::kExitSolverFailure;
  }
}
