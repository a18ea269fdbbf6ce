#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "avgctl/analysis.hpp"

namespace avgctl {

/// Parse or validation failure. line() is 0 when no single line is to blame.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, int line = 0);
  int line() const { return line_; }

 private:
  int line_;
};

struct DynamicsConfig {
  // scalar_lambda_sin | affine | affine_polar | builtin_test1 | builtin_test2
  std::string kind = "builtin_test1";
  std::vector<double> lambdas;                // scalar_lambda_sin
  std::vector<std::vector<double>> matrices;  // affine, affine_polar: A_i
  std::vector<std::vector<double>> inputs;    // affine: B_i (n x m), may be empty
  std::vector<std::vector<double>> offsets;   // affine: c_i (n), may be empty
};

struct ExperimentConfig {
  std::string name = "experiment";

  int state_dim = 1;
  int control_dim = 1;
  double t_start = 0.0;
  double t_end = 1.0;
  std::vector<double> control_lo{-1.0};
  std::vector<double> control_hi{1.0};
  std::vector<char> control_periodic{0};
  double running_state_weight = 0.0;
  double running_control_weight = 0.0;
  std::vector<double> terminal_linear;
  double terminal_quadratic_weight = 0.0;
  std::optional<double> lipschitz_running;
  std::optional<double> lipschitz_terminal;
  int intervals = 100;
  int substeps = 1;
  double blowup_guard = 1e8;

  DynamicsConfig dynamics;

  WeightSchedule schedule;
  int n_min = 1;
  int n_max = 8;

  StateGrid grid{{-1.0}, {1.0}, {21}};
  SolveOptions solver;
  DomainBox box;
  bool check_bound = true;

  bool trajectory = true;
  std::vector<double> trajectory_x0{1.0};
  std::vector<double> trajectory_weights;  // empty: schedule weights at n_min

  // "section.key" -> line, filled by the parser for error messages.
  std::map<std::string, int> source_lines;
};

/// Sectioned key = value text. Unknown sections or keys, duplicates and
/// values of the wrong type are errors carrying the offending line number.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

/// Full-precision dump that parse_config reads back to an equal config.
void write_config(std::ostream& out, const ExperimentConfig& c);

/// Cross-field checks: dimensions, horizon, weights, boxes. Throws ConfigError.
void validate_config(const ExperimentConfig& c);

ExperimentConfig builtin_test1_config();
ExperimentConfig builtin_test2_config();

std::vector<VectorField> build_atoms(const ExperimentConfig& c);
ControlProblem build_problem(const ExperimentConfig& c);
ExperimentDescriptor build_descriptor(const ExperimentConfig& c);

}  // namespace avgctl
