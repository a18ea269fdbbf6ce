#pragma once

#include <iosfwd>
#include <string>

#include "avgctl/config.hpp"

namespace avgctl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitBoundViolation = 2;
inline constexpr int kExitSolverFailure = 3;

struct RunSettings {
  std::string out_dir = "results";
  int jobs = 1;
};

/**
 * Validates the config, runs its convergence study and writes into out_dir:
 *   <name>_report.csv, <name>_trajectory.csv, <name>_control.csv,
 *   <name>_summary.txt and <name>_config.ini (re-runnable dump).
 * The table goes to `out`, progress and diagnostics to `err`.
 * Returns one of the kExit* codes; solver failure wins over a violation.
 */
int run_experiment(const ExperimentConfig& c, const RunSettings& settings,
                   std::ostream& out, std::ostream& err);

}  // namespace avgctl
