#include "avgctl/solve.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>

namespace avgctl {

namespace {

constexpr int kMaxBacktracks = 60;
constexpr double kMinStep = 1e-12;
constexpr double kMaxStep = 1e12;

// Projected-gradient displacement P(u - g) - u; periodic coordinates are
// unconstrained so their displacement is just -g.
void projected_step(const ControlProblem& p, const ControlSignal& u,
                    std::span<const double> direction, double step,
                    std::span<double> disp) {
  const int m = p.control_dim;
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    const int j = static_cast<int>(i % m);
    const double raw = -step * direction[i];
    if (p.periodic(j)) {
      disp[i] = raw;
    } else {
      disp[i] = std::clamp(u.values[i] + raw, p.control_lo[j], p.control_hi[j]) -
                u.values[i];
    }
  }
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Two-loop recursion: r = H q for the stored curvature pairs.
void lbfgs_apply(const std::deque<std::vector<double>>& ss,
                 const std::deque<std::vector<double>>& ys,
                 std::span<const double> q_in, std::span<double> r) {
  const std::size_t mem = ss.size();
  std::vector<double> q(q_in.begin(), q_in.end());
  std::vector<double> alpha(mem), rho(mem);
  auto dot = [](std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
  };
  for (std::size_t k = mem; k-- > 0;) {
    rho[k] = 1.0 / dot(ys[k], ss[k]);
    alpha[k] = rho[k] * dot(ss[k], q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * ys[k][i];
  }
  const double gamma =
      mem > 0 ? dot(ss.back(), ys.back()) / dot(ys.back(), ys.back()) : 1.0;
  for (std::size_t i = 0; i < q.size(); ++i) r[i] = gamma * q[i];
  for (std::size_t k = 0; k < mem; ++k) {
    const double beta = rho[k] * dot(ys[k], r);
    for (std::size_t i = 0; i < q.size(); ++i)
      r[i] += ss[k][i] * (alpha[k] - beta);
  }
}

template <class Objective>
RestartOutcome descend(const ControlProblem& p, const Objective& objective,
                       ControlSignal& u, const SolveOptions& opts) {
  RestartOutcome out;
  p.project(u.values);
  CostGradient cur;
  try {
    cur = objective(u);
  } catch (const DivergenceError&) {
    out.diverged = true;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }

  const std::size_t size = u.values.size();
  const int m = p.control_dim;
  const double inv_dt = 1.0 / u.step();
  const bool use_lbfgs = opts.direction == DescentDirection::kLbfgs;
  std::vector<double> disp(size), pg(size), dir(size), prev_dir(size),
      search(size), masked(size), last_disp(size);
  std::deque<std::vector<double>> mem_s, mem_y;
  ControlSignal trial = u;
  bool have_history = false;
  std::deque<double> history{cur.value};

  int it = 0;
  for (;; ++it) {
    projected_step(p, u, cur.gradient, 1.0, pg);
    out.projected_gradient_norm = norm2(pg);
    if (out.projected_gradient_norm <= opts.grad_tol) {
      out.converged = true;
      break;
    }
    if (it >= opts.max_iters) break;
    if (static_cast<int>(history.size()) > opts.value_window &&
        history.front() - cur.value <=
            opts.value_tol * std::max(1.0, std::abs(cur.value))) {
      out.stalled = true;
      break;
    }

    for (std::size_t i = 0; i < size; ++i) dir[i] = cur.gradient[i] * inv_dt;

    double step = opts.initial_step;
    bool quasi_newton = false;
    if (use_lbfgs && !mem_s.empty()) {
      // Coordinates pinned at a bound by the gradient stay out of the model.
      for (std::size_t i = 0; i < size; ++i) {
        const int j = static_cast<int>(i % m);
        const bool pinned =
            !p.periodic(j) &&
            ((u.values[i] <= p.control_lo[j] && dir[i] > 0.0) ||
             (u.values[i] >= p.control_hi[j] && dir[i] < 0.0));
        masked[i] = pinned ? 0.0 : dir[i];
      }
      lbfgs_apply(mem_s, mem_y, masked, search);
      double descent = 0.0;
      for (std::size_t i = 0; i < size; ++i) {
        if (masked[i] == 0.0 && dir[i] != 0.0) search[i] = 0.0;
        descent += search[i] * dir[i];
      }
      if (descent > 0.0) {
        quasi_newton = true;
        step = 1.0;
      } else {
        mem_s.clear();
        mem_y.clear();
      }
    }
    if (!quasi_newton) {
      search = dir;
      if (!use_lbfgs && have_history) {
        double ss = 0.0, sy = 0.0;
        for (std::size_t i = 0; i < size; ++i) {
          ss += last_disp[i] * last_disp[i];
          sy += last_disp[i] * (dir[i] - prev_dir[i]);
        }
        if (sy > 0.0) step = std::clamp(ss / sy, kMinStep, kMaxStep);
      }
    }

    bool accepted = false;
    bool below_roundoff = false;
    CostGradient next;
    const double roundoff = 4.0 * std::numeric_limits<double>::epsilon() *
                            std::max(1.0, std::abs(cur.value));
    for (int bt = 0; bt < kMaxBacktracks && step >= kMinStep; ++bt) {
      projected_step(p, u, search, step, disp);
      double slope = 0.0;
      for (std::size_t i = 0; i < size; ++i) {
        trial.values[i] = u.values[i] + disp[i];
        slope += cur.gradient[i] * disp[i];
      }
      p.project(trial.values);
      if (slope < 0.0 && -slope < roundoff) {
        below_roundoff = true;
        break;
      }
      if (slope < 0.0) {
        try {
          next = objective(trial);
          if (next.value <= cur.value + opts.sufficient_decrease * slope) {
            accepted = true;
            break;
          }
        } catch (const DivergenceError&) {
        }
      }
      step *= opts.shrink;
    }
    if (!accepted) {
      if (quasi_newton && !below_roundoff) {
        // Retry from a plain gradient step before giving up.
        mem_s.clear();
        mem_y.clear();
        continue;
      }
      out.stalled = true;
      break;
    }

    if (use_lbfgs) {
      std::vector<double> y(size);
      double sy = 0.0, ss = 0.0, yy = 0.0;
      for (std::size_t i = 0; i < size; ++i) {
        y[i] = next.gradient[i] * inv_dt - dir[i];
        sy += disp[i] * y[i];
        ss += disp[i] * disp[i];
        yy += y[i] * y[i];
      }
      if (sy > 1e-10 * std::sqrt(ss * yy)) {
        mem_s.push_back(disp);
        mem_y.push_back(std::move(y));
        if (static_cast<int>(mem_s.size()) > opts.lbfgs_memory) {
          mem_s.pop_front();
          mem_y.pop_front();
        }
      }
    }
    last_disp = disp;
    prev_dir = dir;
    have_history = true;
    std::swap(u.values, trial.values);
    cur = std::move(next);
    history.push_back(cur.value);
    if (static_cast<int>(history.size()) > opts.value_window + 1) {
      history.pop_front();
    }
  }
  out.iterations = it;
  out.value = cur.value;
  return out;
}

template <class Objective, class Recompute>
SolveResult multistart(const ControlProblem& p, const Objective& objective,
                       const Recompute& recompute, const SolveOptions& opts) {
  p.validate();
  opts.validate();
  SolveResult best;
  best.value = std::numeric_limits<double>::infinity();
  bool found = false;
  for (int r = 0; r < opts.restarts; ++r) {
    ControlSignal u = restart_start(p, opts.seed, r);
    RestartOutcome o = descend(p, objective, u, opts);
    best.restarts.push_back(o);
    if (!o.diverged && (!found || o.value < best.value)) {
      found = true;
      best.value = o.value;
      best.control = std::move(u);
      best.best_restart = r;
      best.converged = o.converged;
      best.iterations = o.iterations;
      best.projected_gradient_norm = o.projected_gradient_norm;
    }
  }
  if (!found) throw SolveError("all restarts diverged");
  best.value = recompute(best.control);
  return best;
}

}  // namespace

void SolveOptions::validate() const {
  if (restarts <= 0) throw std::invalid_argument("restarts must be positive");
  if (max_iters <= 0) throw std::invalid_argument("max_iters must be positive");
  if (!(grad_tol > 0.0)) throw std::invalid_argument("grad_tol must be positive");
  if (!(initial_step > 0.0)) {
    throw std::invalid_argument("initial step must be positive");
  }
  if (!(shrink > 0.0 && shrink < 1.0)) {
    throw std::invalid_argument("shrink factor must lie in (0, 1)");
  }
  if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0)) {
    throw std::invalid_argument("sufficient decrease must lie in (0, 1)");
  }
  if (value_tol < 0.0 || value_window <= 0) {
    throw std::invalid_argument("value_tol must be >= 0, value_window > 0");
  }
  if (lbfgs_memory <= 0) {
    throw std::invalid_argument("lbfgs_memory must be positive");
  }
}

ControlSignal restart_start(const ControlProblem& p, std::uint64_t seed,
                            int index) {
  ControlSignal u = p.midpoint_control();
  if (index == 0) return u;
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    const int j = static_cast<int>(i % p.control_dim);
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    u.values[i] = p.control_lo[j] + (p.control_hi[j] - p.control_lo[j]) * unit;
  }
  p.project(u.values);
  return u;
}

SolveResult solve(const ControlProblem& p, const Mixture& mix,
                  std::span<const double> x0, const SolveOptions& opts) {
  return multistart(
      p,
      [&](const ControlSignal& u) { return cost_and_gradient(p, mix, u, x0); },
      [&](const ControlSignal& u) { return cost_averaged(p, mix, u, x0); },
      opts);
}

SolveResult solve(const ControlProblem& p, const VectorField& f,
                  std::span<const double> x0, const SolveOptions& opts) {
  return multistart(
      p,
      [&](const ControlSignal& u) { return cost_and_gradient(p, f, u, x0); },
      [&](const ControlSignal& u) { return cost_single(p, f, u, x0); }, opts);
}

double brute_force_value(const ControlProblem& p, const Mixture& mix,
                         std::span<const double> x0, int levels,
                         int coarse_intervals) {
  p.validate();
  if (levels <= 0 || coarse_intervals <= 0) {
    throw std::invalid_argument("brute force: levels and intervals must be > 0");
  }
  const int m = p.control_dim;
  const int digits = coarse_intervals * m;
  double size = 1.0;
  for (int d = 0; d < digits; ++d) size *= levels;
  if (size > 1e7) {
    throw std::invalid_argument("brute force: enumeration size exceeds 1e7");
  }

  std::vector<std::vector<double>> grid(m);
  for (int j = 0; j < m; ++j) {
    for (int l = 0; l < levels; ++l) {
      grid[j].push_back(levels == 1 ? 0.5 * (p.control_lo[j] + p.control_hi[j])
                        : l == levels - 1
                            ? p.control_hi[j]
                            : p.control_lo[j] + (p.control_hi[j] -
                                                 p.control_lo[j]) *
                                                    l / (levels - 1));
    }
  }
  // Fine interval k takes the coarse piece containing its midpoint.
  std::vector<int> piece(p.intervals);
  for (int k = 0; k < p.intervals; ++k) {
    piece[k] = std::min(coarse_intervals - 1,
                        static_cast<int>((k + 0.5) * coarse_intervals /
                                         p.intervals));
  }

  ControlSignal u = p.midpoint_control();
  std::vector<int> idx(digits, 0);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    for (int k = 0; k < p.intervals; ++k)
      for (int j = 0; j < m; ++j)
        u.values[k * m + j] = grid[j][idx[piece[k] * m + j]];
    try {
      best = std::min(best, cost_averaged(p, mix, u, x0));
    } catch (const DivergenceError&) {
    }
    int d = 0;
    while (d < digits && ++idx[d] == levels) idx[d++] = 0;
    if (d == digits) break;
  }
  return best;
}

}  // namespace avgctl
