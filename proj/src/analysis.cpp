#include "avgctl/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace avgctl {

namespace {

std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

template <class Solver>
ValueGrid solve_grid(const StateGrid& grid, int jobs, const Solver& solver) {
  grid.validate();
  ValueGrid out;
  out.grid = grid;
  out.values.assign(grid.size(), 0.0);
  out.converged.assign(grid.size(), 0);
  parallel_for(grid.size(), jobs, [&](std::size_t i) {
    const auto x0 = grid.point(i);
    const SolveResult r = solver(x0);
    out.values[i] = r.value;
    out.converged[i] = r.converged ? 1 : 0;
  });
  return out;
}

// int_0^T t e^{a t} dt as a power series: sum_k a^k T^{k+2} / (k! (k+2)).
double moment_series(double a, double horizon) {
  double term = horizon * horizon;  // a^k T^{k+2} / k!
  double sum = 0.0;
  for (int k = 0; k < 60; ++k) {
    const double add = term / (k + 2);
    sum += add;
    if (std::abs(add) <= 1e-18 * std::abs(sum)) break;
    term *= a * horizon / (k + 1);
  }
  return sum;
}

}  // namespace

void parallel_for(std::size_t count, int jobs,
                  const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::size_t StateGrid::size() const {
  std::size_t total = 1;
  for (int c : counts) total *= static_cast<std::size_t>(c);
  return total;
}

std::vector<double> StateGrid::point(std::size_t index) const {
  std::vector<double> x(lo.size());
  for (std::size_t d = 0; d < lo.size(); ++d) {
    const auto c = static_cast<std::size_t>(counts[d]);
    const std::size_t i = index % c;
    index /= c;
    x[d] = i + 1 == c ? hi[d]
                      : lo[d] + (hi[d] - lo[d]) * static_cast<double>(i) /
                                    static_cast<double>(c - 1);
  }
  return x;
}

void StateGrid::validate() const {
  if (lo.empty() || lo.size() != hi.size() || lo.size() != counts.size()) {
    throw std::invalid_argument("state grid: lo, hi and counts must match");
  }
  for (std::size_t d = 0; d < lo.size(); ++d) {
    if (!(lo[d] <= hi[d])) throw std::invalid_argument("state grid: lo > hi");
    if (counts[d] < 2) {
      throw std::invalid_argument("state grid: at least 2 points per axis");
    }
  }
}

std::size_t ValueGrid::unconverged() const {
  return static_cast<std::size_t>(
      std::count(converged.begin(), converged.end(), 0));
}

ValueGrid value_grid(const ControlProblem& p, const Mixture& mix,
                     const StateGrid& grid, const SolveOptions& opts,
                     int jobs) {
  if (grid.dim() != p.state_dim) {
    throw DimensionError("value grid dimension differs from state dimension");
  }
  return solve_grid(grid, jobs, [&](const std::vector<double>& x0) {
    return solve(p, mix, x0, opts);
  });
}

ValueGrid value_grid(const ControlProblem& p, const VectorField& f,
                     const StateGrid& grid, const SolveOptions& opts,
                     int jobs) {
  if (grid.dim() != p.state_dim) {
    throw DimensionError("value grid dimension differs from state dimension");
  }
  return solve_grid(grid, jobs, [&](const std::vector<double>& x0) {
    return solve(p, f, x0, opts);
  });
}

double sup_norm_diff(const ValueGrid& a, const ValueGrid& b) {
  if (a.grid.lo != b.grid.lo || a.grid.hi != b.grid.hi ||
      a.grid.counts != b.grid.counts || a.values.size() != b.values.size()) {
    throw std::invalid_argument("sup_norm_diff: value grids differ");
  }
  double best = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    best = std::max(best, std::abs(a.values[i] - b.values[i]));
  return best;
}

double bound_constant(double lipschitz_f, double lipschitz_l,
                        double lipschitz_h, double horizon) {
  if (lipschitz_f < 0.0 || lipschitz_l < 0.0 || lipschitz_h < 0.0) {
    throw std::invalid_argument("bound_constant: negative Lipschitz constant");
  }
  if (!(horizon > 0.0)) {
    throw std::invalid_argument("bound_constant: horizon must be positive");
  }
  const double a = lipschitz_f;
  const double at = a * horizon;
  double moment;
  if (at < 1e-2) {
    moment = moment_series(a, horizon);
  } else {
    moment = (std::exp(at) * (at - 1.0) + 1.0) / (a * a);
  }
  return lipschitz_l * moment + lipschitz_h * std::exp(at);
}

double gronwall_bound(double lipschitz_f, double dist, double t, double s) {
  if (t < s) throw std::invalid_argument("gronwall_bound: t < s");
  if (lipschitz_f < 0.0 || dist < 0.0) {
    throw std::invalid_argument("gronwall_bound: negative input");
  }
  const double span = t - s;
  return span * dist * std::exp(lipschitz_f * span);
}

double max_declared_lipschitz(const std::vector<VectorField>& atoms) {
  double best = 0.0;
  for (const auto& a : atoms) {
    const auto l = a.lipschitz_x();
    if (!l) {
      throw std::invalid_argument("field '" + a.label() +
                                  "' has no declared Lipschitz constant");
    }
    best = std::max(best, *l);
  }
  return best;
}

BoundReport check_error_bound(const ControlProblem& p, const Mixture& a,
                           const Mixture& b, const StateGrid& grid,
                           const DomainBox& box, const SolveOptions& opts,
                           int jobs) {
  if (!p.lipschitz_running || !p.lipschitz_terminal) {
    throw std::invalid_argument(
        "check_error_bound: running/terminal Lipschitz constants are required");
  }
  std::vector<VectorField> atoms = a.atoms();
  atoms.insert(atoms.end(), b.atoms().begin(), b.atoms().end());
  const double lf = max_declared_lipschitz(atoms);

  BoundReport r;
  r.constant = bound_constant(lf, *p.lipschitz_running,
                                *p.lipschitz_terminal, p.t_end - p.t_start);
  r.w1 = wasserstein1(a, b, box).distance;
  r.rhs = r.constant * r.w1;
  r.lhs = sup_norm_diff(value_grid(p, a, grid, opts, jobs),
                        value_grid(p, b, grid, opts, jobs));
  r.margin = r.rhs - r.lhs;
  r.violated = r.lhs > r.rhs + 1e-3;
  return r;
}

std::vector<double> WeightSchedule::weights(int n, std::size_t atoms) const {
  std::vector<double> w(atoms, 0.0);
  switch (rule) {
    case Rule::kHalving: {
      const double tail = std::ldexp(1.0, -n);
      w[0] = 1.0 - tail;
      if (atoms == 1) {
        w[0] = 1.0;
      } else {
        for (std::size_t i = 1; i < atoms; ++i)
          w[i] = tail / static_cast<double>(atoms - 1);
      }
      break;
    }
    case Rule::kDirac:
      w[0] = 1.0;
      break;
    case Rule::kFixed:
      if (fixed.size() != atoms) {
        throw std::invalid_argument(
            "fixed schedule: weight count differs from atom count");
      }
      w = fixed;
      break;
  }
  return w;
}

bool ConvergenceReport::any_violation() const {
  return std::any_of(rows.begin(), rows.end(), [](const ConvergenceRow& r) {
    return r.bound_ok.has_value() && !*r.bound_ok;
  });
}

bool ConvergenceReport::any_failure() const {
  return std::any_of(rows.begin(), rows.end(),
                     [](const ConvergenceRow& r) { return r.failed; });
}

ConvergenceReport convergence_study(const ExperimentDescriptor& d, int jobs,
                                    const ProgressFn& progress) {
  if (d.atoms.empty()) throw std::invalid_argument("study needs atoms");
  if (d.n_min < 0 || d.n_max < d.n_min) {
    throw std::invalid_argument("study needs 0 <= n_min <= n_max");
  }
  d.problem.validate();
  d.grid.validate();
  d.box.validate();

  ConvergenceReport report;
  report.name = d.name;
  const VectorField& truth = d.atoms.front();

  std::optional<double> lf;
  if (d.check_bound) {
    if (!d.problem.lipschitz_running || !d.problem.lipschitz_terminal) {
      throw std::invalid_argument(
          "bound check needs running and terminal Lipschitz constants");
    }
    lf = max_declared_lipschitz(d.atoms);
    report.constant =
        bound_constant(*lf, *d.problem.lipschitz_running,
                         *d.problem.lipschitz_terminal,
                         d.problem.t_end - d.problem.t_start);
  }

  // Ground cost column: each atom against the true dynamics.
  std::vector<double> to_truth(d.atoms.size());
  for (std::size_t i = 0; i < d.atoms.size(); ++i)
    to_truth[i] = sup_distance(d.atoms[i], truth, d.box);

  if (progress) progress("reference grid (true dynamics)");
  const ValueGrid reference = value_grid(d.problem, truth, d.grid, d.solver, jobs);
  report.reference_unconverged = reference.unconverged();

  for (int n = d.n_min; n <= d.n_max; ++n) {
    ConvergenceRow row;
    row.n = n;
    const auto weights = d.schedule.weights(n, d.atoms.size());
    row.alpha1 = weights.front();

    // make_mixture drops the same tiny weights, so columns stay aligned.
    std::vector<double> cost;
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (weights[i] >= 1e-12) cost.push_back(to_truth[i]);
    const Mixture mix = make_mixture(d.atoms, weights);
    row.w1 = solve_transport(mix.weights(), {1.0}, cost).cost;
    row.w1_closed_form = 0.0;
    for (std::size_t i = 0; i < mix.size(); ++i)
      row.w1_closed_form += mix.weights()[i] * cost[i];

    if (progress) progress("N = " + std::to_string(n));
    try {
      const ValueGrid vg = value_grid(d.problem, mix, d.grid, d.solver, jobs);
      row.error = sup_norm_diff(vg, reference);
      row.unconverged = vg.unconverged();
    } catch (const std::exception& e) {
      row.failed = true;
      row.failure = e.what();
      row.error = std::nan("");
    }
    if (!report.rows.empty()) {
      const auto& prev = report.rows.back();
      if (!row.failed && !prev.failed && prev.error > 0.0 && row.error > 0.0) {
        row.order = std::log2(prev.error / row.error);
      }
    }
    if (report.constant && !row.failed) {
      row.bound_rhs = *report.constant * row.w1;
      row.bound_ok = row.error <= *row.bound_rhs + 1e-3;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_report_csv(std::ostream& out, const ConvergenceReport& report) {
  out << "N,alpha1,w1,error,order,bound_rhs,bound_ok\n";
  for (const auto& r : report.rows) {
    out << r.n << ',' << format_g(r.alpha1) << ',' << format_g(r.w1) << ','
        << (r.failed ? std::string() : format_g(r.error)) << ','
        << (r.order ? format_g(*r.order) : std::string()) << ','
        << (r.bound_rhs ? format_g(*r.bound_rhs) : std::string()) << ','
        << (r.bound_ok ? (*r.bound_ok ? "1" : "0") : "") << '\n';
  }
}

std::string format_report_table(const ConvergenceReport& report) {
  const std::vector<std::string> header{"N",     "alpha1",    "w1",
                                        "error", "order",     "bound_rhs",
                                        "bound_ok"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : report.rows) {
    cells.push_back({std::to_string(r.n), format_g(r.alpha1), format_g(r.w1),
                     r.failed ? "FAILED" : format_g(r.error),
                     r.order ? format_g(*r.order) : "-",
                     r.bound_rhs ? format_g(*r.bound_rhs) : "-",
                     r.bound_ok ? (*r.bound_ok ? "yes" : "NO") : "-"});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << "  ";
      os << std::string(width[c] - row[c].size(), ' ') << row[c];
    }
    os << '\n';
  };
  emit(header);
  for (const auto& row : cells) emit(row);
  return os.str();
}

}  // namespace avgctl
