#pragma once
// Independent reference computations used only by tests.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "avgctl/analysis.hpp"

namespace oracle {

// Minimum of the transportation LP by enumerating every basis of r + c - 1
// cells, solving the marginal equations on it and keeping feasible ones.
inline double transport_brute_force(const std::vector<double>& supply,
                                    const std::vector<double>& demand,
                                    const std::vector<double>& cost) {
  const int r = static_cast<int>(supply.size());
  const int c = static_cast<int>(demand.size());
  const int cells = r * c;
  const int basis = r + c - 1;
  // Equations: r row sums, then c - 1 column sums (the last is implied).
  Eigen::VectorXd rhs(basis);
  for (int i = 0; i < r; ++i) rhs(i) = supply[i];
  for (int j = 0; j + 1 < c; ++j) rhs(r + j) = demand[j];

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(basis);
  for (int k = 0; k < basis; ++k) pick[k] = k;
  for (;;) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(basis, basis);
    for (int k = 0; k < basis; ++k) {
      const int i = pick[k] / c, j = pick[k] % c;
      a(i, k) = 1.0;
      if (j + 1 < c) a(r + j, k) = 1.0;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.isInvertible()) {
      const Eigen::VectorXd x = lu.solve(rhs);
      if (x.minCoeff() >= -1e-12) {
        double total = 0.0;
        for (int k = 0; k < basis; ++k) total += x(k) * cost[pick[k]];
        best = std::min(best, total);
      }
    }
    int k = basis - 1;
    while (k >= 0 && pick[k] == cells - basis + k) --k;
    if (k < 0) break;
    ++pick[k];
    for (int q = k + 1; q < basis; ++q) pick[q] = pick[q - 1] + 1;
  }
  return best;
}

// Composite 5-point Gauss-Legendre rule.
inline double gauss_legendre(const std::function<double(double)>& f, double a,
                             double b, int panels = 400) {
  static const double nodes[5] = {0.0, -0.5384693101056831, 0.5384693101056831,
                                  -0.9061798459386640, 0.9061798459386640};
  static const double weights[5] = {0.5688888888888889, 0.4786286704993665,
                                    0.4786286704993665, 0.2369268850561891,
                                    0.2369268850561891};
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    double s = 0.0;
    for (int k = 0; k < 5; ++k) s += weights[k] * f(mid + 0.5 * h * nodes[k]);
    total += 0.5 * h * s;
  }
  return total;
}

// L_l * int_0^T t e^{L_f t} dt + L_h e^{L_f T}, integral done by quadrature.
inline double bound_constant_quadrature(double lf, double ll, double lh,
                                          double horizon) {
  const double integral = gauss_legendre(
      [&](double t) { return t * std::exp(lf * t); }, 0.0, horizon);
  return ll * integral + lh * std::exp(lf * horizon);
}

// Central differences of a scalar function of a vector.
inline std::vector<double> central_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> z, double step) {
  std::vector<double> g(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double keep = z[i];
    z[i] = keep + step;
    const double up = f(z);
    z[i] = keep - step;
    const double down = f(z);
    z[i] = keep;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

inline double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double relative_error(const std::vector<double>& got,
                             const std::vector<double>& want) {
  std::vector<double> d(got.size());
  for (std::size_t i = 0; i < got.size(); ++i) d[i] = got[i] - want[i];
  return norm(d) / std::max(norm(want), 1e-12);
}

inline std::vector<double> random_weights(std::mt19937_64& rng, int count) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> w(count);
  double s = 0.0;
  for (auto& x : w) s += (x = u(rng));
  for (auto& x : w) x /= s;
  return w;
}

// Random affine field with entries in [-scale, scale].
inline avgctl::VectorField random_affine(std::mt19937_64& rng, int n, int m,
                                         double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> a(n * n), b(n * m), c(n);
  for (auto& x : a) x = u(rng);
  for (auto& x : b) x = u(rng);
  for (auto& x : c) x = u(rng);
  return avgctl::affine_field("random", a, b, c);
}

}  // namespace oracle
