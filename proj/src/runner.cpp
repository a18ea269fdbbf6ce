#include "avgctl/runner.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace avgctl {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

}  // namespace

int run_experiment(const ExperimentConfig& c, const RunSettings& settings,
                   std::ostream& out, std::ostream& err) {
  try {
    validate_config(c);
  } catch (const ConfigError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kExitConfig;
  }

  const std::filesystem::path dir(settings.out_dir);
  std::filesystem::create_directories(dir);
  auto path = [&](const char* suffix) {
    return dir / fmt::format("{}_{}", c.name, suffix);
  };
  {
    auto f = open_output(path("config.ini"));
    write_config(f, c);
  }

  const ExperimentDescriptor d = build_descriptor(c);
  const auto started = std::chrono::steady_clock::now();
  auto progress = [&](const std::string& what) {
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - started)
                            .count();
    fmt::print(err, "[{:7.1f}s] {}: {}\n", secs, c.name, what);
  };

  bool failure = false;
  ConvergenceReport report;
  try {
    report = convergence_study(d, settings.jobs, progress);
  } catch (const std::exception& e) {
    fmt::print(err, "solver failure: {}\n", e.what());
    return kExitSolverFailure;
  }
  {
    auto f = open_output(path("report.csv"));
    write_report_csv(f, report);
  }
  out << format_report_table(report);

  std::ostringstream summary;
  fmt::print(summary, "experiment: {}\n", c.name);
  fmt::print(summary, "atoms: {}  grid points: {}  rows: {}\n", d.atoms.size(),
             d.grid.size(), report.rows.size());
  if (report.constant) {
    fmt::print(summary,
               "bound constant: {:.6g} (L_f = {:.6g}, L_l = {:.6g}, "
               "L_h = {:.6g}, T - s = {:.6g})\n",
               *report.constant, max_declared_lipschitz(d.atoms),
               *c.lipschitz_running, *c.lipschitz_terminal,
               c.t_end - c.t_start);
    int violations = 0;
    for (const auto& r : report.rows) {
      if (!r.bound_rhs) continue;
      fmt::print(summary, "  N = {}: error {:.6g} <= {:.6g} + 1e-3 ? {} "
                 "(margin {:.6g})\n",
                 r.n, r.error, *r.bound_rhs, *r.bound_ok ? "yes" : "NO",
                 *r.bound_rhs - r.error);
      if (!*r.bound_ok) ++violations;
    }
    fmt::print(summary, "bound check: {}\n",
               violations ? fmt::format("{} row(s) VIOLATE", violations)
                          : std::string("all rows within bound"));
  } else {
    fmt::print(summary, "bound check: disabled\n");
  }
  fmt::print(summary, "unconverged solves: reference {}", report.reference_unconverged);
  for (const auto& r : report.rows) {
    fmt::print(summary, ", N={} {}", r.n, r.unconverged);
    if (r.failed) {
      failure = true;
      fmt::print(err, "N = {} failed: {}\n", r.n, r.failure);
    }
  }
  summary << '\n';

  if (c.trajectory) {
    const std::vector<double> weights =
        c.trajectory_weights.empty()
            ? c.schedule.weights(c.n_min, d.atoms.size())
            : c.trajectory_weights;
    try {
      const Mixture mix = make_mixture(d.atoms, weights);
      const SolveResult r = solve(d.problem, mix, c.trajectory_x0, c.solver);
      auto traj = open_output(path("trajectory.csv"));
      write_trajectory_csv(traj,
                           integrate_all(d.problem, mix, r.control,
                                         c.trajectory_x0));
      auto ctl = open_output(path("control.csv"));
      write_control_csv(ctl, r.control);
      fmt::print(summary, "trajectory: value {:.10g}, converged {}\n", r.value,
                 r.converged ? "yes" : "no");
    } catch (const std::exception& e) {
      failure = true;
      fmt::print(err, "trajectory solve failed: {}\n", e.what());
      fmt::print(summary, "trajectory: FAILED ({})\n", e.what());
    }
  }

  {
    auto f = open_output(path("summary.txt"));
    f << summary.str();
  }
  out << summary.str();

  if (failure) return kExitSolverFailure;
  if (report.any_violation()) return kExitBoundViolation;
  return kExitOk;
}

}  // namespace avgctl
