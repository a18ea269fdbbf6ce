#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "avgctl/fields.hpp"
#include "avgctl/measures.hpp"
#include "avgctl/sim.hpp"
#include "avgctl/solve.hpp"

namespace avgctl {

/// Tensor grid of initial states, uniform per coordinate, endpoints included.
struct StateGrid {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<int> counts;

  int dim() const { return static_cast<int>(lo.size()); }
  std::size_t size() const;
  /// Point `index`, first coordinate varying fastest.
  std::vector<double> point(std::size_t index) const;
  void validate() const;
};

struct ValueGrid {
  StateGrid grid;
  std::vector<double> values;
  std::vector<char> converged;

  std::size_t unconverged() const;
};

/// Problem B value function on the grid; one independent solve per point.
ValueGrid value_grid(const ControlProblem& p, const Mixture& mix,
                     const StateGrid& grid, const SolveOptions& opts,
                     int jobs = 1);
/// Problem A value function for known dynamics f.
ValueGrid value_grid(const ControlProblem& p, const VectorField& f,
                     const StateGrid& grid, const SolveOptions& opts,
                     int jobs = 1);

/// max over grid points of |a - b|. Throws on differing grids.
double sup_norm_diff(const ValueGrid& a, const ValueGrid& b);

/**
 * Constant multiplying W1 in the value-function estimate:
 *   L_l * int_0^T t e^{L_f t} dt + L_h * e^{L_f T}
 * with int_0^T t e^{a t} dt = (e^{aT}(aT - 1) + 1) / a^2, evaluated by its
 * power series when aT is small (the a -> 0 limit is T^2 / 2).
 */
double bound_constant(double lipschitz_f, double lipschitz_l,
                        double lipschitz_h, double horizon);

/// (t - s) * dist * e^{L_f (t - s)}.
double gronwall_bound(double lipschitz_f, double dist, double t, double s);

/// Largest declared x-Lipschitz constant among the atoms; throws if any atom
/// has none.
double max_declared_lipschitz(const std::vector<VectorField>& atoms);

struct BoundReport {
  double lhs = 0.0;       // sup-norm gap of the two value grids
  double rhs = 0.0;       // constant * W1
  double constant = 0.0;
  double w1 = 0.0;
  double margin = 0.0;    // rhs - lhs
  bool violated = false;  // lhs > rhs + 1e-3
};

BoundReport check_error_bound(const ControlProblem& p, const Mixture& a,
                           const Mixture& b, const StateGrid& grid,
                           const DomainBox& box, const SolveOptions& opts,
                           int jobs = 1);

/// Weights assigned to the atoms for study index N.
struct WeightSchedule {
  enum class Rule {
    kHalving,  // w_1 = 1 - 2^-N, the rest share 2^-N equally
    kDirac,    // all mass on atom 1
    kFixed,    // the same explicit weights for every N
  };
  Rule rule = Rule::kHalving;
  std::vector<double> fixed;

  std::vector<double> weights(int n, std::size_t atoms) const;
};

/// Everything a convergence study needs. Atom 1 is the true dynamics.
struct ExperimentDescriptor {
  std::string name;
  ControlProblem problem;
  std::vector<VectorField> atoms;
  WeightSchedule schedule;
  int n_min = 1;
  int n_max = 8;
  StateGrid grid;
  SolveOptions solver;
  DomainBox box;
  bool check_bound = true;
};

struct ConvergenceRow {
  int n = 0;
  double alpha1 = 0.0;
  double w1 = 0.0;
  double w1_closed_form = 0.0;  // dirac_target_w1, for cross-checking
  double error = 0.0;
  std::optional<double> order;
  std::optional<double> bound_rhs;
  std::optional<bool> bound_ok;
  std::size_t unconverged = 0;
  bool failed = false;
  std::string failure;
};

struct ConvergenceReport {
  std::string name;
  std::vector<ConvergenceRow> rows;
  std::optional<double> constant;
  std::size_t reference_unconverged = 0;

  bool any_violation() const;
  bool any_failure() const;
};

using ProgressFn = std::function<void(const std::string&)>;

/**
 * For each N in [n_min, n_max]: builds the scheduled mixture, solves its value
 * grid, and compares against the Problem A grid of atom 1. W1 to the true
 * Dirac comes from the transportation LP on a ground-cost column computed
 * once. A row whose solves fail is flagged and the study continues.
 */
ConvergenceReport convergence_study(const ExperimentDescriptor& d, int jobs = 1,
                                    const ProgressFn& progress = nullptr);

/// Header `N,alpha1,w1,error,order,bound_rhs,bound_ok`, values as %.6g;
/// undefined entries are left empty.
void write_report_csv(std::ostream& out, const ConvergenceReport& report);

/// Same columns, space-aligned for terminals.
std::string format_report_table(const ConvergenceReport& report);

/// Runs fn(i) for i in [0, count) on up to `jobs` threads; rethrows the first
/// exception after all workers finish.
void parallel_for(std::size_t count, int jobs,
                  const std::function<void(std::size_t)>& fn);

}  // namespace avgctl
