// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any
// fails. Pass criterion numbers as arguments to run a subset.
#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <thread>

#include "avgctl/config.hpp"
#include "support/oracles.hpp"

using namespace avgctl;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string join(const std::vector<double>& v, const char* fmt_spec = "{:.4f}") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt::format(fmt::runtime(fmt_spec), v[i]);
  }
  return out;
}

// Test 1 study is shared by criteria 1 and 3.
struct Test1Run {
  ConvergenceReport report;
  double seconds = 0.0;
};

const Test1Run& test1_run() {
  static const Test1Run run = [] {
    Test1Run r;
    const auto t0 = Clock::now();
    r.report = convergence_study(build_descriptor(builtin_test1_config()), jobs());
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

Outcome criterion1() {
  const auto& run = test1_run();
  const auto& rows = run.report.rows;
  Outcome o{rows.size() == 8 && !run.report.any_failure(), ""};
  std::vector<double> ratios, orders;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double ratio = rows[i - 1].error / rows[i].error;
    const double order = rows[i].order.value_or(NAN);
    ratios.push_back(ratio);
    orders.push_back(order);
    if (!(ratio >= 1.8 && ratio <= 2.2)) o.pass = false;
    if (!(std::abs(order - 1.0) <= 0.1)) o.pass = false;
  }
  if (run.seconds > 300.0) o.pass = false;
  o.detail = fmt::format("ratios N=2..8 [{}], orders [{}], {:.1f} s", join(ratios),
                         join(orders), run.seconds);
  return o;
}

Outcome criterion2() {
  const auto t0 = Clock::now();
  const auto report =
      convergence_study(build_descriptor(builtin_test2_config()), jobs());
  const double secs = seconds_since(t0);
  const auto& rows = report.rows;
  Outcome o{rows.size() == 6 && !report.any_failure(), ""};
  std::vector<double> orders;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double order = rows[i].order.value_or(NAN);
    if (!(order >= 0.88 && order <= 1.06)) o.pass = false;
    if (!orders.empty() && order < orders.back() - 0.02) o.pass = false;
    orders.push_back(order);
  }
  if (secs > 900.0) o.pass = false;
  std::size_t unconverged = 0;
  for (const auto& r : rows) unconverged += r.unconverged;
  o.detail = fmt::format("orders N=2..6 [{}], {:.1f} s, {} unconverged grid solves",
                         join(orders), secs, unconverged);
  return o;
}

Outcome criterion3() {
  const auto& run = test1_run();
  const auto cfg = builtin_test1_config();
  const auto atoms = build_atoms(cfg);
  const double constant = std::exp(2.0 * (cfg.t_end - cfg.t_start));
  Outcome o{run.report.rows.size() == 8, ""};
  double worst = INFINITY;
  for (const auto& r : run.report.rows) {
    const auto mix = make_mixture(atoms, cfg.schedule.weights(r.n, atoms.size()));
    const double w1 = wasserstein1(mix, dirac(atoms[0]), cfg.box).distance;
    const double rhs = constant * w1 + 1e-3;
    worst = std::min(worst, rhs - r.error);
    if (r.failed || !(r.error <= rhs)) o.pass = false;
  }
  o.detail = fmt::format("error <= e^(2T) W1 + 1e-3 for N=1..8, smallest margin {:.4g}",
                         worst);
  return o;
}

Outcome criterion4() {
  std::mt19937_64 rng(2024);
  int tuples = 0, violations = 0;
  double worst = -INFINITY;
  for (const auto& cfg : {builtin_test1_config(), builtin_test2_config()}) {
    const auto p = build_problem(cfg);
    const auto atoms = build_atoms(cfg);
    const int n = p.state_dim;
    std::uniform_int_distribution<int> pick(0, static_cast<int>(atoms.size()) - 1);
    std::uniform_int_distribution<int> knot(1, p.intervals);
    for (int trial = 0; trial < 60; ++trial) {
      const int i = pick(rng);
      int j = pick(rng);
      while (j == i) j = pick(rng);
      auto u = p.midpoint_control();
      for (std::size_t k = 0; k < u.values.size(); ++k) {
        const int c = static_cast<int>(k % p.control_dim);
        u.values[k] = std::uniform_real_distribution<double>(
            p.control_lo[c], p.control_hi[c])(rng);
      }
      std::vector<double> x0(n);
      for (int d = 0; d < n; ++d)
        x0[d] = std::uniform_real_distribution<double>(cfg.grid.lo[d],
                                                       cfg.grid.hi[d])(rng);
      const int k = knot(rng);
      const auto a = integrate(atoms[i], u, x0, p.substeps);
      const auto b = integrate(atoms[j], u, x0, p.substeps);
      DomainBox box;
      box.control_lo = p.control_lo;
      box.control_hi = p.control_hi;
      box.state_lo.assign(n, INFINITY);
      box.state_hi.assign(n, -INFINITY);
      for (int q = 0; q <= k; ++q) {
        for (const auto* tr : {&a, &b}) {
          for (int d = 0; d < n; ++d) {
            box.state_lo[d] = std::min(box.state_lo[d], tr->state(q)[d]);
            box.state_hi[d] = std::max(box.state_hi[d], tr->state(q)[d]);
          }
        }
      }
      for (int d = 0; d < n; ++d) {
        const double pad = 0.05 * (box.state_hi[d] - box.state_lo[d]) + 1e-6;
        box.state_lo[d] -= pad;
        box.state_hi[d] += pad;
      }
      box.samples_per_dim = 41;
      double gap = 0.0;
      for (int d = 0; d < n; ++d) {
        const double diff = a.state(k)[d] - b.state(k)[d];
        gap += diff * diff;
      }
      gap = std::sqrt(gap);
      const double dist = sup_distance(atoms[i], atoms[j], box);
      const double bound = gronwall_bound(*atoms[j].lipschitz_x(), dist,
                                          a.times[k], p.t_start);
      worst = std::max(worst, gap - bound);
      if (gap > bound + 1e-6) ++violations;
      ++tuples;
    }
  }
  return {violations == 0 && tuples >= 100,
          fmt::format("{} tuples, {} violations, max(gap - bound) = {:.3g}", tuples,
                      violations, worst)};
}

Outcome criterion5() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  int instances = 0;
  double worst = 0.0;
  auto check = [&](const ControlProblem& p, const Mixture& mix, ControlSignal u,
                   const std::vector<double>& x0) {
    const auto g = adjoint_gradient(p, mix, u, x0);
    const auto fd = oracle::central_gradient(
        [&](const std::vector<double>& z) {
          auto v = u;
          v.values = z;
          return cost_averaged(p, mix, v, x0);
        },
        u.values, 1e-5);
    worst = std::max(worst, oracle::relative_error(g, fd));
    ++instances;
  };
  // Random affine systems, half of them on finite-difference Jacobians.
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 1 + trial % 3, m = 1 + trial % 2;
    ControlProblem p;
    p.state_dim = n;
    p.control_dim = m;
    p.control_lo.assign(m, -1.0);
    p.control_hi.assign(m, 1.0);
    std::vector<double> lin(n);
    for (auto& v : lin) v = ud(rng);
    p.running = quadratic_running_cost(1.0 + ud(rng), 1.0 + ud(rng));
    p.terminal = linear_quadratic_terminal_cost(lin, 1.0 + ud(rng));
    std::vector<VectorField> atoms;
    for (int i = 0; i < 3; ++i) {
      auto f = oracle::random_affine(rng, n, m);
      atoms.push_back(trial % 2 ? f.without_jacobian() : f);
    }
    auto u = p.midpoint_control();
    for (auto& v : u.values) v = 0.9 * ud(rng);
    std::vector<double> x0(n);
    for (auto& v : x0) v = ud(rng);
    check(p, make_mixture(atoms, oracle::random_weights(rng, 3)), u, x0);
  }
  // Both built-in problems with random mixtures and controls.
  for (const auto& cfg : {builtin_test1_config(), builtin_test2_config()}) {
    const auto p = build_problem(cfg);
    const auto atoms = build_atoms(cfg);
    for (int trial = 0; trial < 6; ++trial) {
      auto u = p.midpoint_control();
      for (auto& v : u.values) {
        v = std::uniform_real_distribution<double>(p.control_lo[0] + 1e-3,
                                                   p.control_hi[0] - 1e-3)(rng);
      }
      std::vector<double> x0(p.state_dim);
      for (auto& v : x0) v = ud(rng);
      const auto mix = make_mixture(
          atoms, oracle::random_weights(rng, static_cast<int>(atoms.size())));
      check(p, trial % 2 ? mix : dirac(atoms[trial % atoms.size()]), u, x0);
    }
  }
  return {instances >= 20 && worst <= 1e-4,
          fmt::format("{} instances, worst relative error {:.3g}", instances, worst)};
}

Outcome criterion6() {
  double worst_dirac = 0.0;
  int schedule_cases = 0;
  for (const auto& cfg : {builtin_test1_config(), builtin_test2_config()}) {
    const auto atoms = build_atoms(cfg);
    for (int n = cfg.n_min; n <= cfg.n_max; ++n) {
      const auto mix = make_mixture(atoms, cfg.schedule.weights(n, atoms.size()));
      const double lp = wasserstein1(mix, dirac(atoms[0]), cfg.box).distance;
      const double closed = dirac_target_w1(mix, atoms[0], cfg.box);
      worst_dirac = std::max(worst_dirac, std::abs(lp - closed) / closed);
      ++schedule_cases;
    }
  }

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> lam(-2.0, 2.0);
  std::uniform_int_distribution<int> size(1, 5);
  const DomainBox box{{-3.0}, {3.0}, {-1.0}, {1.0}, 41};
  auto random_mixture = [&] {
    const int k = size(rng);
    std::vector<VectorField> atoms;
    for (int i = 0; i < k; ++i) atoms.push_back(scalar_lambda_sin_field(lam(rng)));
    return make_mixture(atoms, oracle::random_weights(rng, k));
  };
  int triples = 0, broken = 0;
  for (int t = 0; t < 60; ++t) {
    const auto p = random_mixture(), q = random_mixture(), r = random_mixture();
    const double pq = wasserstein1(p, q, box).distance;
    const double qp = wasserstein1(q, p, box).distance;
    const double pr = wasserstein1(p, r, box).distance;
    const double qr = wasserstein1(q, r, box).distance;
    const double pp = wasserstein1(p, p, box).distance;
    const bool ok = std::abs(pq - qp) <= 1e-12 * std::max(1.0, pq) && pp <= 1e-15 &&
                    pr <= pq + qr + 1e-12;
    if (!ok) ++broken;
    ++triples;
  }
  return {worst_dirac <= 1e-9 && broken == 0 && triples >= 50,
          fmt::format("{} schedule cases, worst LP vs closed form {:.3g}; "
                      "{} random triples, {} axiom failures",
                      schedule_cases, worst_dirac, triples, broken)};
}

Outcome criterion7() {
  std::mt19937_64 rng(5);
  int instances = 0, bad = 0;
  double worst = -INFINITY;
  auto run = [&](ControlProblem p, const Mixture& mix, const std::vector<double>& x0,
                 const SolveOptions& opts) {
    p.intervals = 5;
    const double oracle_value = brute_force_value(p, mix, x0, 5, 5);
    const double value = solve(p, mix, x0, opts).value;
    worst = std::max(worst, value - oracle_value);
    if (value > oracle_value + 1e-6) ++bad;
    ++instances;
  };
  {
    const auto cfg = builtin_test1_config();
    const auto p = build_problem(cfg);
    const auto atoms = build_atoms(cfg);
    const auto pi1 = make_mixture(atoms, cfg.schedule.weights(1, atoms.size()));
    for (double x : {-1.0, -0.5, 0.0, 0.5, 1.0}) run(p, pi1, {x}, cfg.solver);
    std::uniform_real_distribution<double> lam(-1.5, 1.5), ux(-1.0, 1.0);
    for (int t = 0; t < 5; ++t) {
      std::vector<VectorField> a{scalar_lambda_sin_field(lam(rng)),
                                 scalar_lambda_sin_field(lam(rng))};
      run(p, make_mixture(a, oracle::random_weights(rng, 2)), {ux(rng)}, cfg.solver);
    }
  }
  {
    const auto cfg = builtin_test2_config();
    const auto p = build_problem(cfg);
    const auto atoms = build_atoms(cfg);
    const auto eq = make_mixture(atoms, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    for (const auto& x : std::vector<std::vector<double>>{
             {-0.4, 0.3}, {1.0, 1.0}, {-1.0, 0.2}, {0.5, -0.8}})
      run(p, eq, x, cfg.solver);
  }
  return {bad == 0 && instances >= 10,
          fmt::format("{} instances, max(solve - oracle) = {:.3g}", instances, worst)};
}

Outcome criterion8() {
  Outcome o{true, ""};
  std::vector<std::string> parts;
  for (const auto& cfg : {builtin_test1_config(), builtin_test2_config()}) {
    const auto d = build_descriptor(cfg);
    const auto a = value_grid(d.problem, dirac(d.atoms[0]), d.grid, d.solver, jobs());
    const auto b = value_grid(d.problem, d.atoms[0], d.grid, d.solver, jobs());
    std::size_t differ = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
      if (a.values[i] != b.values[i]) ++differ;
    if (differ) o.pass = false;
    parts.push_back(fmt::format("{}: {} points, {} differ", cfg.name, a.values.size(),
                                differ));
  }
  o.detail = fmt::format("{}; {}", parts[0], parts[1]);
  return o;
}

Outcome criterion9() {
  const std::vector<std::array<double, 4>> sweep{
      {0.0, 1.0, 0.0, 1.0},    {1e-12, 1.0, 1.0, 1.0}, {1e-9, 0.5, 2.0, 2.0},
      {1e-7, 2.0, 0.3, 1.5},   {1e-5, 1.0, 1.0, 0.7},  {1e-3, 0.2, 0.0, 3.0},
      {5e-3, 1.0, 1.0, 1.0},   {0.02, 3.0, 1.0, 0.4},  {0.1, 1.0, 0.0, 1.0},
      {0.3, 0.7, 0.9, 2.0},    {0.5, 1.0, 1.0, 1.0},   {1.0, 0.0, 1.0, 1.0},
      {1.0, 1.0, 1.0, 1.0},    {1.5, 2.0, 0.5, 0.8},   {2.0, 1.0, 1.0, 1.0},
      {2.0, 0.0, 1.0, 1.0},    {3.0, 1.0, 2.0, 1.2},   {4.0, 0.5, 0.1, 0.5},
      {5.0, 1.0, 1.0, 2.0},    {0.7, 1.3, 0.0, 5.0},
  };
  double worst = 0.0;
  for (const auto& s : sweep) {
    const double got = bound_constant(s[0], s[1], s[2], s[3]);
    const double want = oracle::bound_constant_quadrature(s[0], s[1], s[2], s[3]);
    worst = std::max(worst, std::abs(got - want) / want);
  }
  return {worst <= 1e-8, fmt::format("{} parameter sets, worst relative error {:.3g}",
                                     sweep.size(), worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
      {1, {"Test 1 convergence ratios and orders", criterion1}},
      {2, {"Test 2 convergence orders", criterion2}},
      {3, {"value-function bound on Test 1", criterion3}},
      {4, {"Gronwall trajectory bound", criterion4}},
      {5, {"adjoint gradient vs finite differences", criterion5}},
      {6, {"transport exactness and metric axioms", criterion6}},
      {7, {"solver vs exhaustive oracle", criterion7}},
      {8, {"Dirac reduction bit-for-bit", criterion8}},
      {9, {"bound constant vs quadrature", criterion9}},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& [id, entry] : criteria) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    fmt::print("{} criterion {}: {} -- {}\n", o.pass ? "PASS" : "FAIL", id,
               entry.first, o.detail);
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
