#include "avgctl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace avgctl {

namespace {

std::string time_message(double t) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "trajectory diverged at t = %.6g", t);
  return buf;
}

struct Rk4Work {
  explicit Rk4Work(int n) : k1(n), k2(n), k3(n), k4(n), tmp(n) {}
  std::vector<double> k1, k2, k3, k4, tmp;
};

void rk4_step(const VectorField& g, std::span<double> x,
              std::span<const double> u, double h, Rk4Work& w) {
  const std::size_t n = x.size();
  g.eval(x, u, w.k1);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + 0.5 * h * w.k1[i];
  g.eval(w.tmp, u, w.k2);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + 0.5 * h * w.k2[i];
  g.eval(w.tmp, u, w.k3);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + h * w.k3[i];
  g.eval(w.tmp, u, w.k4);
  for (std::size_t i = 0; i < n; ++i)
    x[i] += h / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
}

bool diverged(std::span<const double> x, double guard) {
  double sq = 0.0;
  for (double v : x) sq += v * v;
  return !std::isfinite(sq) || std::sqrt(sq) > guard;
}

// c (r x k) = a (r x s) * b (s x k), all row-major.
void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, int r, int s, int k) {
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < k; ++j) {
      double acc = 0.0;
      for (int l = 0; l < s; ++l) acc += a[i * s + l] * b[l * k + j];
      c[i * k + j] = acc;
    }
  }
}

// Forward-mode Jacobians of one RK4 step x -> x+ w.r.t. x and u.
class StepJacobian {
 public:
  StepJacobian(int n, int m)
      : n_(n),
        m_(m),
        stage_(4 * n),
        k_(4 * n),
        a_(n * n),
        b_(n * m),
        dkx_(4 * n * n),
        dku_(4 * n * m),
        tx_(n * n),
        tu_(n * m) {}

  // On return x holds x+, jx/ju the step Jacobians.
  void step(const VectorField& g, std::span<double> x,
            std::span<const double> u, double h, std::span<double> jx,
            std::span<double> ju) {
    const int n = n_, m = m_;
    const double coef[4] = {0.0, 0.5 * h, 0.5 * h, h};
    for (int s = 0; s < 4; ++s) {
      std::span<double> st(stage_.data() + s * n, n);
      for (int i = 0; i < n; ++i)
        st[i] = s == 0 ? x[i] : x[i] + coef[s] * k_[(s - 1) * n + i];
      g.eval(st, u, std::span<double>(k_.data() + s * n, n));
      g.jacobian(st, u, a_, b_);
      std::span<double> dkx(dkx_.data() + s * n * n, n * n);
      std::span<double> dku(dku_.data() + s * n * m, n * m);
      if (s == 0) {
        std::copy(a_.begin(), a_.end(), dkx.begin());
        std::copy(b_.begin(), b_.end(), dku.begin());
        continue;
      }
      const double* prevx = dkx_.data() + (s - 1) * n * n;
      const double* prevu = dku_.data() + (s - 1) * n * m;
      // tx = I + coef * dk_{s-1}/dx ; tu = coef * dk_{s-1}/du
      for (int i = 0; i < n * n; ++i) tx_[i] = coef[s] * prevx[i];
      for (int i = 0; i < n; ++i) tx_[i * n + i] += 1.0;
      for (int i = 0; i < n * m; ++i) tu_[i] = coef[s] * prevu[i];
      matmul(a_, tx_, dkx, n, n, n);
      matmul(a_, tu_, dku, n, n, m);
      for (int i = 0; i < n * m; ++i) dku[i] += b_[i];
    }
    const double w[4] = {1.0, 2.0, 2.0, 1.0};
    for (int i = 0; i < n * n; ++i) {
      double acc = 0.0;
      for (int s = 0; s < 4; ++s) acc += w[s] * dkx_[s * n * n + i];
      jx[i] = h / 6.0 * acc;
    }
    for (int i = 0; i < n; ++i) jx[i * n + i] += 1.0;
    for (int i = 0; i < n * m; ++i) {
      double acc = 0.0;
      for (int s = 0; s < 4; ++s) acc += w[s] * dku_[s * n * m + i];
      ju[i] = h / 6.0 * acc;
    }
    for (int i = 0; i < n; ++i)
      x[i] += h / 6.0 *
              (k_[i] + 2.0 * k_[n + i] + 2.0 * k_[2 * n + i] + k_[3 * n + i]);
  }

 private:
  int n_, m_;
  std::vector<double> stage_, k_, a_, b_, dkx_, dku_, tx_, tu_;
};

void running_gradient(const RunningCost& l, std::span<const double> x,
                      std::span<const double> u, std::span<double> gx,
                      std::span<double> gu) {
  if (l.gradient) {
    l.gradient(x, u, gx, gu);
    return;
  }
  std::vector<double> xp(x.begin(), x.end()), up(u.begin(), u.end());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + h;
    const double fp = l.eval(xp, u);
    xp[j] = x[j] - h;
    const double fm = l.eval(xp, u);
    xp[j] = x[j];
    gx[j] = (fp - fm) / ((x[j] + h) - (x[j] - h));
  }
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double h = 1e-6 * (1.0 + std::abs(u[j]));
    up[j] = u[j] + h;
    const double fp = l.eval(x, up);
    up[j] = u[j] - h;
    const double fm = l.eval(x, up);
    up[j] = u[j];
    gu[j] = (fp - fm) / ((u[j] + h) - (u[j] - h));
  }
}

void terminal_gradient(const TerminalCost& h, std::span<const double> x,
                       std::span<double> gx) {
  if (h.gradient) {
    h.gradient(x, gx);
    return;
  }
  std::vector<double> xp(x.begin(), x.end());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double s = 1e-6 * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + s;
    const double fp = h.eval(xp);
    xp[j] = x[j] - s;
    const double fm = h.eval(xp);
    xp[j] = x[j];
    gx[j] = (fp - fm) / ((x[j] + s) - (x[j] - s));
  }
}

void check_compatible(const ControlProblem& p, const VectorField& g,
                      const ControlSignal& u, std::span<const double> x0) {
  if (g.state_dim() != p.state_dim || g.control_dim() != p.control_dim ||
      u.dim != p.control_dim ||
      x0.size() != static_cast<std::size_t>(p.state_dim)) {
    throw DimensionError("dimension mismatch between problem, field '" +
                         g.label() + "', control and initial state");
  }
  if (u.t_start != p.t_start || u.t_end != p.t_end) {
    throw std::invalid_argument("control horizon differs from problem horizon");
  }
}

double running_integral(const ControlProblem& p, const Trajectory& tr,
                        const ControlSignal& u) {
  const double dt = u.step();
  double total = 0.0;
  for (int k = 0; k < u.intervals; ++k) {
    total += 0.5 * dt *
             (p.running.eval(tr.state(k), u.at(k)) +
              p.running.eval(tr.state(k + 1), u.at(k)));
  }
  return total;
}

// Unweighted cost of one atom; adds weight * dJ/du into grad.
double atom_cost_gradient(const ControlProblem& p, const VectorField& g,
                          const ControlSignal& u, std::span<const double> x0,
                          double weight, std::span<double> grad) {
  const int n = p.state_dim, m = p.control_dim, K = u.intervals;
  const Trajectory tr = integrate(g, u, x0, p.substeps, p.blowup_guard);
  const double value = running_integral(p, tr, u) +
                       p.terminal.eval(tr.state(K));

  const double dt = u.step();
  const double h = dt / p.substeps;
  StepJacobian sj(n, m);
  std::vector<double> lam(n), next(n), gx(n), gu(m), gx2(n), gu2(m);
  std::vector<double> jx(n * n), ju(n * m), mx(n * n), mu(n * m), t1(n * n),
      t2(n * m), xs(n);

  terminal_gradient(p.terminal, tr.state(K), lam);
  running_gradient(p.running, tr.state(K), u.at(K - 1), gx, gu);
  for (int i = 0; i < n; ++i) lam[i] += 0.5 * dt * gx[i];

  for (int k = K - 1; k >= 0; --k) {
    // Interval map Jacobians, composed over substeps.
    std::fill(mx.begin(), mx.end(), 0.0);
    for (int i = 0; i < n; ++i) mx[i * n + i] = 1.0;
    std::fill(mu.begin(), mu.end(), 0.0);
    const auto xk = tr.state(k);
    std::copy(xk.begin(), xk.end(), xs.begin());
    for (int s = 0; s < p.substeps; ++s) {
      sj.step(g, xs, u.at(k), h, jx, ju);
      matmul(jx, mu, t2, n, n, m);
      for (int i = 0; i < n * m; ++i) mu[i] = t2[i] + ju[i];
      matmul(jx, mx, t1, n, n, n);
      mx.swap(t1);
    }

    running_gradient(p.running, xk, u.at(k), gx, gu);
    running_gradient(p.running, tr.state(k + 1), u.at(k), gx2, gu2);
    for (int j = 0; j < m; ++j) {
      double acc = 0.5 * dt * (gu[j] + gu2[j]);
      for (int i = 0; i < n; ++i) acc += mu[i * m + j] * lam[i];
      grad[k * m + j] += weight * acc;
    }

    for (int j = 0; j < n; ++j) {
      double acc = 0.5 * dt * gx[j];
      for (int i = 0; i < n; ++i) acc += mx[i * n + j] * lam[i];
      next[j] = acc;
    }
    if (k > 0) {
      running_gradient(p.running, xk, u.at(k - 1), gx2, gu2);
      for (int j = 0; j < n; ++j) next[j] += 0.5 * dt * gx2[j];
    }
    lam.swap(next);
  }
  for (double v : grad) {
    if (!std::isfinite(v)) {
      throw NonFiniteError("adjoint gradient: non-finite entry for field '" +
                           g.label() + "'");
    }
  }
  return value;
}

}  // namespace

DivergenceError::DivergenceError(double time)
    : std::runtime_error(time_message(time)), time_(time) {}

RunningCost quadratic_running_cost(double state_weight,
                                   double control_weight) {
  RunningCost c;
  c.eval = [=](std::span<const double> x, std::span<const double> u) {
    double xs = 0.0, us = 0.0;
    for (double v : x) xs += v * v;
    for (double v : u) us += v * v;
    return 0.5 * state_weight * xs + control_weight * us;
  };
  c.gradient = [=](std::span<const double> x, std::span<const double> u,
                   std::span<double> gx, std::span<double> gu) {
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] = state_weight * x[i];
    for (std::size_t i = 0; i < u.size(); ++i)
      gu[i] = 2.0 * control_weight * u[i];
  };
  return c;
}

TerminalCost linear_quadratic_terminal_cost(std::vector<double> linear,
                                            double quadratic_weight) {
  TerminalCost c;
  c.eval = [=](std::span<const double> x) {
    double lin = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i < linear.size()) lin += linear[i] * x[i];
      sq += x[i] * x[i];
    }
    return lin + 0.5 * quadratic_weight * sq;
  };
  c.gradient = [=](std::span<const double> x, std::span<double> gx) {
    for (std::size_t i = 0; i < x.size(); ++i)
      gx[i] = (i < linear.size() ? linear[i] : 0.0) + quadratic_weight * x[i];
  };
  return c;
}

double ControlSignal::time(int k) const {
  if (k == intervals) return t_end;
  return t_start + (t_end - t_start) * static_cast<double>(k) / intervals;
}

void ControlProblem::validate() const {
  if (state_dim <= 0 || control_dim <= 0) {
    throw DimensionError("problem dimensions must be positive");
  }
  if (!(t_start < t_end) || t_start < 0.0 || !std::isfinite(t_end)) {
    throw std::invalid_argument("horizon must satisfy 0 <= s < T");
  }
  if (control_lo.size() != static_cast<std::size_t>(control_dim) ||
      control_hi.size() != static_cast<std::size_t>(control_dim)) {
    throw DimensionError("control bounds must have control_dim entries");
  }
  if (!control_periodic.empty() &&
      control_periodic.size() != static_cast<std::size_t>(control_dim)) {
    throw DimensionError("periodic flags must have control_dim entries");
  }
  for (int j = 0; j < control_dim; ++j) {
    if (!std::isfinite(control_lo[j]) || !std::isfinite(control_hi[j]) ||
        !(control_lo[j] < control_hi[j])) {
      throw std::invalid_argument("control bounds must be finite with lo < hi");
    }
  }
  if (!running.eval || !terminal.eval) {
    throw std::invalid_argument("running and terminal costs are required");
  }
  if ((lipschitz_running && *lipschitz_running < 0.0) ||
      (lipschitz_terminal && *lipschitz_terminal < 0.0)) {
    throw std::invalid_argument("cost Lipschitz constants must be >= 0");
  }
  if (intervals <= 0 || substeps <= 0) {
    throw std::invalid_argument("intervals and substeps must be positive");
  }
  if (!(blowup_guard > 0.0)) {
    throw std::invalid_argument("blow-up guard must be positive");
  }
}

void ControlProblem::project(std::span<double> u) const {
  for (std::size_t i = 0; i < u.size(); ++i) {
    const int j = static_cast<int>(i % control_dim);
    const double lo = control_lo[j], hi = control_hi[j];
    if (periodic(j)) {
      const double period = hi - lo;
      double r = std::fmod(u[i] - lo, period);
      if (r < 0.0) r += period;
      u[i] = lo + r;
      if (u[i] >= hi) u[i] = lo;
    } else {
      u[i] = std::clamp(u[i], lo, hi);
    }
  }
}

ControlSignal ControlProblem::constant_control(
    std::span<const double> u) const {
  ControlSignal c{t_start, t_end, intervals, control_dim, {}};
  c.values.reserve(static_cast<std::size_t>(intervals) * control_dim);
  for (int k = 0; k < intervals; ++k)
    c.values.insert(c.values.end(), u.begin(), u.end());
  return c;
}

ControlSignal ControlProblem::midpoint_control() const {
  std::vector<double> mid(control_dim);
  for (int j = 0; j < control_dim; ++j)
    mid[j] = 0.5 * (control_lo[j] + control_hi[j]);
  return constant_control(mid);
}

Trajectory integrate(const VectorField& g, const ControlSignal& u,
                     std::span<const double> x0, int substeps,
                     double blowup_guard) {
  const int n = g.state_dim();
  if (u.dim != g.control_dim() || x0.size() != static_cast<std::size_t>(n)) {
    throw DimensionError("integrate: dimension mismatch for field '" +
                         g.label() + "'");
  }
  if (u.intervals <= 0 || substeps <= 0) {
    throw std::invalid_argument("integrate: intervals/substeps must be > 0");
  }
  for (double v : x0)
    if (!std::isfinite(v)) throw std::invalid_argument("integrate: x0 not finite");

  Trajectory tr;
  tr.dim = n;
  tr.times.resize(u.intervals + 1);
  tr.states.resize(static_cast<std::size_t>(u.intervals + 1) * n);
  std::copy(x0.begin(), x0.end(), tr.states.begin());
  tr.times[0] = u.time(0);

  std::vector<double> x(x0.begin(), x0.end());
  Rk4Work work(n);
  const double h = u.step() / substeps;
  for (int k = 0; k < u.intervals; ++k) {
    for (int s = 0; s < substeps; ++s) {
      rk4_step(g, x, u.at(k), h, work);
      if (diverged(x, blowup_guard)) {
        throw DivergenceError(u.time(k) + (s + 1) * h);
      }
    }
    tr.times[k + 1] = u.time(k + 1);
    std::copy(x.begin(), x.end(), tr.states.begin() + (k + 1) * n);
  }
  return tr;
}

double cost_single(const ControlProblem& p, const VectorField& g,
                   const ControlSignal& u, std::span<const double> x0) {
  check_compatible(p, g, u, x0);
  const Trajectory tr = integrate(g, u, x0, p.substeps, p.blowup_guard);
  return running_integral(p, tr, u) + p.terminal.eval(tr.state(u.intervals));
}

double cost_averaged(const ControlProblem& p, const Mixture& mix,
                     const ControlSignal& u, std::span<const double> x0) {
  double total = 0.0;
  for (std::size_t i = 0; i < mix.size(); ++i)
    total += mix.weights()[i] * cost_single(p, mix.atoms()[i], u, x0);
  return total;
}

CostGradient cost_and_gradient(const ControlProblem& p, const VectorField& g,
                               const ControlSignal& u,
                               std::span<const double> x0) {
  check_compatible(p, g, u, x0);
  CostGradient out;
  out.gradient.assign(u.values.size(), 0.0);
  out.value = atom_cost_gradient(p, g, u, x0, 1.0, out.gradient);
  return out;
}

CostGradient cost_and_gradient(const ControlProblem& p, const Mixture& mix,
                               const ControlSignal& u,
                               std::span<const double> x0) {
  CostGradient out;
  out.gradient.assign(u.values.size(), 0.0);
  for (std::size_t i = 0; i < mix.size(); ++i) {
    check_compatible(p, mix.atoms()[i], u, x0);
    out.value += mix.weights()[i] * atom_cost_gradient(p, mix.atoms()[i], u,
                                                       x0, mix.weights()[i],
                                                       out.gradient);
  }
  return out;
}

std::vector<double> adjoint_gradient(const ControlProblem& p,
                                     const Mixture& mix,
                                     const ControlSignal& u,
                                     std::span<const double> x0) {
  return cost_and_gradient(p, mix, u, x0).gradient;
}

std::vector<Trajectory> integrate_all(const ControlProblem& p,
                                      const Mixture& mix,
                                      const ControlSignal& u,
                                      std::span<const double> x0) {
  std::vector<Trajectory> out;
  out.reserve(mix.size());
  for (const auto& g : mix.atoms()) {
    check_compatible(p, g, u, x0);
    out.push_back(integrate(g, u, x0, p.substeps, p.blowup_guard));
  }
  return out;
}

void write_trajectory_csv(std::ostream& out,
                          const std::vector<Trajectory>& trajectories) {
  out << "time";
  for (std::size_t i = 0; i < trajectories.size(); ++i)
    for (int d = 0; d < trajectories[i].dim; ++d)
      out << ",atom" << i + 1 << "_x" << d + 1;
  out << '\n';
  if (trajectories.empty()) return;
  char buf[32];
  for (int k = 0; k < trajectories.front().knots(); ++k) {
    std::snprintf(buf, sizeof buf, "%.6g", trajectories.front().times[k]);
    out << buf;
    for (const auto& tr : trajectories) {
      for (double v : tr.state(k)) {
        std::snprintf(buf, sizeof buf, "%.6g", v);
        out << ',' << buf;
      }
    }
    out << '\n';
  }
}

void write_control_csv(std::ostream& out, const ControlSignal& u) {
  out << "time";
  for (int j = 0; j < u.dim; ++j) out << ",u" << j + 1;
  out << '\n';
  char buf[32];
  for (int k = 0; k < u.intervals; ++k) {
    std::snprintf(buf, sizeof buf, "%.6g", u.time(k));
    out << buf;
    for (double v : u.at(k)) {
      std::snprintf(buf, sizeof buf, "%.6g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

CostLipschitzEstimate estimate_cost_lipschitz(const ControlProblem& p,
                                              const DomainBox& box) {
  if (box.state_dim() != p.state_dim || box.control_dim() != p.control_dim) {
    throw DimensionError("estimate_cost_lipschitz: box dimension mismatch");
  }
  const int s = box.resolved_samples();
  std::vector<double> spacing(p.state_dim);
  for (int d = 0; d < p.state_dim; ++d)
    spacing[d] = (box.state_hi[d] - box.state_lo[d]) / (s - 1);

  CostLipschitzEstimate est;
  std::vector<double> y(p.state_dim);
  for_each_box_sample(box, [&](std::span<const double> x,
                               std::span<const double> u) {
    const double lx = p.running.eval(x, u);
    const double hx = p.terminal.eval(x);
    for (int d = 0; d < p.state_dim; ++d) {
      if (x[d] + spacing[d] > box.state_hi[d] * (1 + 1e-12) + 1e-12) continue;
      std::copy(x.begin(), x.end(), y.begin());
      y[d] = x[d] + spacing[d];
      est.running = std::max(
          est.running, std::abs(p.running.eval(y, u) - lx) / spacing[d]);
      est.terminal =
          std::max(est.terminal, std::abs(p.terminal.eval(y) - hx) / spacing[d]);
    }
  });
  return est;
}

}  // namespace avgctl
