#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "avgctl/measures.hpp"
#include "avgctl/sim.hpp"

namespace avgctl {

enum class DescentDirection {
  kGradient,  // steepest descent with Barzilai-Borwein trial steps
  kLbfgs,     // limited-memory BFGS on the coordinates off active bounds
};

struct SolveOptions {
  int restarts = 5;
  int max_iters = 5000;
  double grad_tol = 1e-8;
  double initial_step = 1.0;
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
  std::uint64_t seed = 0;
  DescentDirection direction = DescentDirection::kLbfgs;
  int lbfgs_memory = 20;
  /// Stop (unconverged) once the cost fell by less than
  /// value_tol * max(1, |J|) over the last `value_window` iterations.
  double value_tol = 1e-9;
  int value_window = 20;

  void validate() const;
};

/// Every restart diverged.
class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RestartOutcome {
  double value = 0.0;  // +inf when the start point diverged
  bool converged = false;
  bool diverged = false;
  int iterations = 0;
  double projected_gradient_norm = 0.0;
  bool stalled = false;  // stopped by roundoff or the value window
};

struct SolveResult {
  ControlSignal control;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  int best_restart = 0;
  double projected_gradient_norm = 0.0;
  std::vector<RestartOutcome> restarts;
};

/// Start point of restart `index`: the box midpoint for index 0, otherwise
/// uniform in U from a generator seeded by (seed, index).
ControlSignal restart_start(const ControlProblem& p, std::uint64_t seed,
                            int index);

/**
 * Multistart projected gradient descent on the transcribed cost.
 *
 * Works in the L2(s, T) geometry (discrete gradient divided by the interval
 * length). The search direction is either the negative gradient with a
 * Barzilai-Borwein trial step, or an L-BFGS direction restricted to the
 * coordinates that are not held at a bound; both use monotone Armijo
 * backtracking along the projected path. Box coordinates are clamped,
 * periodic coordinates wrapped. The best restart wins; ties go to the lowest
 * index.
 */
SolveResult solve(const ControlProblem& p, const Mixture& mix,
                  std::span<const double> x0, const SolveOptions& opts);

/// Problem A: known dynamics.
SolveResult solve(const ControlProblem& p, const VectorField& f,
                  std::span<const double> x0, const SolveOptions& opts);

/// Exhaustive minimum of cost_averaged over controls that are constant on
/// `coarse_intervals` pieces with values from `levels` evenly spaced points
/// per control coordinate. Throws if levels^(coarse_intervals * m) > 1e7.
double brute_force_value(const ControlProblem& p, const Mixture& mix,
                         std::span<const double> x0, int levels,
                         int coarse_intervals);

}  // namespace avgctl
