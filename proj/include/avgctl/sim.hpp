#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "avgctl/fields.hpp"
#include "avgctl/measures.hpp"

namespace avgctl {

/// State norm crossed the blow-up guard (or became non-finite).
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(double time);
  double time() const { return time_; }

 private:
  double time_;
};

struct RunningCost {
  std::function<double(std::span<const double> x, std::span<const double> u)>
      eval;
  /// Optional; central differences are used when empty.
  std::function<void(std::span<const double> x, std::span<const double> u,
                     std::span<double> grad_x, std::span<double> grad_u)>
      gradient;
};

struct TerminalCost {
  std::function<double(std::span<const double> x)> eval;
  std::function<void(std::span<const double> x, std::span<double> grad_x)>
      gradient;
};

/// l(x, u) = state_weight/2 |x|^2 + control_weight |u|^2.
RunningCost quadratic_running_cost(double state_weight, double control_weight);

/// h(x) = linear . x + quadratic_weight/2 |x|^2. An empty `linear` means zero.
TerminalCost linear_quadratic_terminal_cost(std::vector<double> linear,
                                            double quadratic_weight);

/**
 * Piecewise-constant control on a uniform grid over [t_start, t_end]:
 * values[k*dim + j] holds coordinate j on [t_k, t_{k+1}).
 */
struct ControlSignal {
  double t_start = 0.0;
  double t_end = 1.0;
  int intervals = 0;
  int dim = 0;
  std::vector<double> values;

  double step() const { return (t_end - t_start) / intervals; }
  double time(int k) const;
  std::span<const double> at(int k) const {
    return {values.data() + static_cast<std::size_t>(k) * dim,
            static_cast<std::size_t>(dim)};
  }
  std::span<double> at(int k) {
    return {values.data() + static_cast<std::size_t>(k) * dim,
            static_cast<std::size_t>(dim)};
  }
};

/// States at the control knots t_0..t_K.
struct Trajectory {
  std::vector<double> times;
  int dim = 0;
  std::vector<double> states;

  int knots() const { return static_cast<int>(times.size()); }
  std::span<const double> state(int k) const {
    return {states.data() + static_cast<std::size_t>(k) * dim,
            static_cast<std::size_t>(dim)};
  }
};

struct ControlProblem {
  int state_dim = 1;
  int control_dim = 1;
  double t_start = 0.0;
  double t_end = 1.0;
  std::vector<double> control_lo;
  std::vector<double> control_hi;
  std::vector<char> control_periodic;  // empty means no periodic coordinate
  RunningCost running;
  TerminalCost terminal;
  std::optional<double> lipschitz_running;
  std::optional<double> lipschitz_terminal;

  int intervals = 100;
  int substeps = 1;
  double blowup_guard = 1e8;

  void validate() const;
  bool periodic(int j) const {
    return !control_periodic.empty() && control_periodic[j];
  }
  /// Clamp box coordinates, wrap periodic ones into [lo, hi). Accepts one
  /// control vector or a whole stacked signal.
  void project(std::span<double> u) const;
  ControlSignal constant_control(std::span<const double> u) const;
  ControlSignal midpoint_control() const;
};

/// Classic RK4 with `substeps` steps per control interval.
Trajectory integrate(const VectorField& g, const ControlSignal& u,
                     std::span<const double> x0, int substeps = 1,
                     double blowup_guard = 1e8);

/// Trapezoid running cost on the knots plus terminal cost (Problem A).
double cost_single(const ControlProblem& p, const VectorField& g,
                   const ControlSignal& u, std::span<const double> x0);

/// Weighted sum of per-atom costs under one shared control (Problem B).
double cost_averaged(const ControlProblem& p, const Mixture& mix,
                     const ControlSignal& u, std::span<const double> x0);

struct CostGradient {
  double value = 0.0;
  std::vector<double> gradient;  // intervals x control_dim, row-major
};

/// Cost and its exact gradient w.r.t. the stacked control values, by the
/// discrete adjoint of the RK4/trapezoid transcription.
CostGradient cost_and_gradient(const ControlProblem& p, const VectorField& g,
                               const ControlSignal& u,
                               std::span<const double> x0);
CostGradient cost_and_gradient(const ControlProblem& p, const Mixture& mix,
                               const ControlSignal& u,
                               std::span<const double> x0);

std::vector<double> adjoint_gradient(const ControlProblem& p,
                                     const Mixture& mix,
                                     const ControlSignal& u,
                                     std::span<const double> x0);

/// One trajectory per atom under the shared control.
std::vector<Trajectory> integrate_all(const ControlProblem& p,
                                      const Mixture& mix,
                                      const ControlSignal& u,
                                      std::span<const double> x0);

/// Columns: time, then atom{i}_x{d} for every atom i and coordinate d.
void write_trajectory_csv(std::ostream& out,
                          const std::vector<Trajectory>& trajectories);
/// Columns: time, u{j}; one row per control interval (left endpoint).
void write_control_csv(std::ostream& out, const ControlSignal& u);

struct CostLipschitzEstimate {
  double running = 0.0;
  double terminal = 0.0;
};

/// Sampled x-difference quotients of l and h on the box (neighbouring grid
/// points along each state axis, every control sample for l).
CostLipschitzEstimate estimate_cost_lipschitz(const ControlProblem& p,
                                              const DomainBox& box);

}  // namespace avgctl
