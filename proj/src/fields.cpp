#include "avgctl/fields.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>

namespace avgctl {

namespace {

// Uniform grid coordinate; the last index maps exactly onto hi.
double grid_point(double lo, double hi, int i, int count) {
  if (i == count - 1) return hi;
  return lo + (hi - lo) * static_cast<double>(i) / (count - 1);
}

void require_same_dims(const VectorField& g, const VectorField& f) {
  if (g.state_dim() != f.state_dim() || g.control_dim() != f.control_dim()) {
    throw DimensionError("fields '" + g.label() + "' and '" + f.label() +
                         "' have different dimensions");
  }
}

void require_box_dims(const VectorField& g, const DomainBox& box) {
  if (box.state_dim() != g.state_dim() ||
      box.control_dim() != g.control_dim()) {
    throw DimensionError("box dimensions do not match field '" + g.label() +
                         "'");
  }
}

}  // namespace

int default_samples_per_dim(int total_dims) {
  if (total_dims <= 2) return 201;
  if (total_dims == 3) return 41;
  return 21;
}

void DomainBox::validate() const {
  if (state_lo.size() != state_hi.size() ||
      control_lo.size() != control_hi.size()) {
    throw std::invalid_argument("domain box: lo/hi length mismatch");
  }
  if (state_lo.empty()) throw std::invalid_argument("domain box: empty state");
  for (std::size_t i = 0; i < state_lo.size(); ++i) {
    if (!(state_lo[i] < state_hi[i])) {
      throw std::invalid_argument("domain box: state_lo must be < state_hi");
    }
  }
  for (std::size_t i = 0; i < control_lo.size(); ++i) {
    if (!(control_lo[i] < control_hi[i])) {
      throw std::invalid_argument(
          "domain box: control_lo must be < control_hi");
    }
  }
  if (resolved_samples() < 2) {
    throw std::invalid_argument("domain box: samples_per_dim must be >= 2");
  }
}

int DomainBox::resolved_samples() const {
  if (samples_per_dim != 0) return samples_per_dim;
  return default_samples_per_dim(state_dim() + control_dim());
}

VectorField::VectorField(std::string label, int state_dim, int control_dim,
                         EvalFn eval, std::optional<double> lipschitz_x,
                         JacobianFn jacobian)
    : label_(std::move(label)),
      n_(state_dim),
      m_(control_dim),
      eval_(std::move(eval)),
      lipschitz_(lipschitz_x),
      jac_(std::move(jacobian)) {
  if (n_ <= 0 || m_ <= 0) {
    throw DimensionError("vector field '" + label_ +
                         "': dimensions must be positive");
  }
  if (!eval_) throw std::invalid_argument("vector field without evaluator");
  if (lipschitz_ && !(*lipschitz_ >= 0.0)) {
    throw std::invalid_argument("vector field '" + label_ +
                                "': lipschitz_x must be nonnegative");
  }
}

std::vector<double> VectorField::operator()(std::span<const double> x,
                                            std::span<const double> u) const {
  std::vector<double> out(n_);
  eval_(x, u, out);
  return out;
}

void VectorField::jacobian(std::span<const double> x,
                           std::span<const double> u, std::span<double> dx,
                           std::span<double> du) const {
  if (jac_) {
    jac_(x, u, dx, du);
    return;
  }
  // Central differences, one column at a time.
  std::vector<double> xp(x.begin(), x.end());
  std::vector<double> up(u.begin(), u.end());
  std::vector<double> fp(n_), fm(n_);
  for (int j = 0; j < n_; ++j) {
    const double h = 1e-6 * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + h;
    eval_(xp, u, fp);
    xp[j] = x[j] - h;
    eval_(xp, u, fm);
    xp[j] = x[j];
    const double inv = 1.0 / ((x[j] + h) - (x[j] - h));
    for (int i = 0; i < n_; ++i) dx[i * n_ + j] = (fp[i] - fm[i]) * inv;
  }
  for (int j = 0; j < m_; ++j) {
    const double h = 1e-6 * (1.0 + std::abs(u[j]));
    up[j] = u[j] + h;
    eval_(x, up, fp);
    up[j] = u[j] - h;
    eval_(x, up, fm);
    up[j] = u[j];
    const double inv = 1.0 / ((u[j] + h) - (u[j] - h));
    for (int i = 0; i < n_; ++i) du[i * m_ + j] = (fp[i] - fm[i]) * inv;
  }
}

VectorField VectorField::without_jacobian() const {
  return VectorField(label_, n_, m_, eval_, lipschitz_, nullptr);
}

double spectral_norm(std::span<const double> a, int n) {
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = a[i * n + j];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

VectorField affine_field(std::string label, std::vector<double> a,
                         std::vector<double> b, std::vector<double> c,
                         std::optional<double> lipschitz_x) {
  const int n = static_cast<int>(c.size());
  if (n == 0 || a.size() != static_cast<std::size_t>(n * n) ||
      b.empty() || b.size() % n != 0) {
    throw DimensionError("affine field '" + label +
                         "': need A n x n, B n x m, c of length n");
  }
  const int m = static_cast<int>(b.size()) / n;
  if (!lipschitz_x) lipschitz_x = spectral_norm(a, n);
  auto eval = [a, b, c, n, m](std::span<const double> x,
                              std::span<const double> u,
                              std::span<double> out) {
    for (int i = 0; i < n; ++i) {
      double acc = c[i];
      for (int j = 0; j < n; ++j) acc += a[i * n + j] * x[j];
      for (int j = 0; j < m; ++j) acc += b[i * m + j] * u[j];
      out[i] = acc;
    }
  };
  auto jac = [a, b](std::span<const double>, std::span<const double>,
                    std::span<double> dx, std::span<double> du) {
    std::copy(a.begin(), a.end(), dx.begin());
    std::copy(b.begin(), b.end(), du.begin());
  };
  return VectorField(std::move(label), n, m, std::move(eval), lipschitz_x,
                     std::move(jac));
}

VectorField affine_polar_field(std::string label, std::vector<double> a,
                               std::optional<double> lipschitz_x) {
  if (a.size() != 4) {
    throw DimensionError("polar affine field '" + label + "': A must be 2 x 2");
  }
  if (!lipschitz_x) lipschitz_x = spectral_norm(a, 2);
  auto eval = [a](std::span<const double> x, std::span<const double> u,
                  std::span<double> out) {
    out[0] = a[0] * x[0] + a[1] * x[1] + std::cos(u[0]);
    out[1] = a[2] * x[0] + a[3] * x[1] + std::sin(u[0]);
  };
  auto jac = [a](std::span<const double>, std::span<const double> u,
                 std::span<double> dx, std::span<double> du) {
    std::copy(a.begin(), a.end(), dx.begin());
    du[0] = -std::sin(u[0]);
    du[1] = std::cos(u[0]);
  };
  return VectorField(std::move(label), 2, 1, std::move(eval), lipschitz_x,
                     std::move(jac));
}

VectorField scalar_lambda_sin_field(double lambda) {
  auto eval = [lambda](std::span<const double> x, std::span<const double> u,
                       std::span<double> out) {
    out[0] = lambda * x[0] + std::sin(x[0]) + u[0];
  };
  auto jac = [lambda](std::span<const double> x, std::span<const double>,
                      std::span<double> dx, std::span<double> du) {
    dx[0] = lambda + std::cos(x[0]);
    du[0] = 1.0;
  };
  char buf[64];
  std::snprintf(buf, sizeof buf, "lambda=%g", lambda);
  return VectorField(buf, 1, 1, std::move(eval), std::abs(lambda) + 1.0,
                     std::move(jac));
}

void for_each_box_sample(
    const DomainBox& box,
    const std::function<void(std::span<const double>, std::span<const double>)>&
        fn) {
  box.validate();
  const int n = box.state_dim();
  const int m = box.control_dim();
  const int dims = n + m;
  const int s = box.resolved_samples();
  std::vector<int> idx(dims, 0);
  std::vector<double> x(n), u(m);
  for (;;) {
    for (int d = 0; d < n; ++d)
      x[d] = grid_point(box.state_lo[d], box.state_hi[d], idx[d], s);
    for (int d = 0; d < m; ++d)
      u[d] = grid_point(box.control_lo[d], box.control_hi[d], idx[n + d], s);
    fn(x, u);
    int d = 0;
    while (d < dims && ++idx[d] == s) idx[d++] = 0;
    if (d == dims) break;
  }
}

double sup_distance(const VectorField& g, const VectorField& f,
                    const DomainBox& box) {
  require_same_dims(g, f);
  require_box_dims(g, box);
  const int n = g.state_dim();
  std::vector<double> gv(n), fv(n);
  double best = 0.0;
  for_each_box_sample(box, [&](std::span<const double> x,
                               std::span<const double> u) {
    g.eval(x, u, gv);
    f.eval(x, u, fv);
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(gv[i]) || !std::isfinite(fv[i])) {
        throw NonFiniteError("sup_distance: non-finite field value");
      }
      const double d = gv[i] - fv[i];
      sq += d * d;
    }
    best = std::max(best, std::sqrt(sq));
  });
  return best;
}

double estimate_lipschitz(const VectorField& g, const DomainBox& box) {
  require_box_dims(g, box);
  box.validate();
  const int n = g.state_dim();
  const int m = g.control_dim();
  const int s = box.resolved_samples();

  // State grid enumerated once; values recomputed per control sample.
  std::size_t count = 1;
  for (int d = 0; d < n; ++d) count *= static_cast<std::size_t>(s);
  std::vector<double> states(count * n);
  {
    std::vector<int> idx(n, 0);
    for (std::size_t p = 0; p < count; ++p) {
      for (int d = 0; d < n; ++d)
        states[p * n + d] =
            grid_point(box.state_lo[d], box.state_hi[d], idx[d], s);
      int d = 0;
      while (d < n && ++idx[d] == s) idx[d++] = 0;
    }
  }
  std::vector<std::size_t> stride(n, 1);
  for (int d = 1; d < n; ++d) stride[d] = stride[d - 1] * s;

  std::vector<double> values(count * n);
  std::vector<double> u(m);
  std::vector<int> uidx(m, 0);
  double best = 0.0;
  for (;;) {
    for (int d = 0; d < m; ++d)
      u[d] = grid_point(box.control_lo[d], box.control_hi[d], uidx[d], s);
    for (std::size_t p = 0; p < count; ++p) {
      std::span<double> out(values.data() + p * n, n);
      g.eval(std::span<const double>(states.data() + p * n, n), u, out);
      for (double v : out)
        if (!std::isfinite(v))
          throw NonFiniteError("estimate_lipschitz: non-finite field value");
    }
    // Forward neighbours: offsets in {0,1}^n minus the zero offset.
    for (std::size_t p = 0; p < count; ++p) {
      for (unsigned mask = 1; mask < (1u << n); ++mask) {
        std::size_t q = p;
        bool inside = true;
        for (int d = 0; d < n && inside; ++d) {
          if (!(mask & (1u << d))) continue;
          const std::size_t coord = (p / stride[d]) % s;
          if (coord + 1 >= static_cast<std::size_t>(s)) inside = false;
          q += stride[d];
        }
        if (!inside) continue;
        double num = 0.0, den = 0.0;
        for (int d = 0; d < n; ++d) {
          const double dv = values[q * n + d] - values[p * n + d];
          const double dx = states[q * n + d] - states[p * n + d];
          num += dv * dv;
          den += dx * dx;
        }
        best = std::max(best, std::sqrt(num / den));
      }
    }
    int d = 0;
    while (d < m && ++uidx[d] == s) uidx[d++] = 0;
    if (d == m) break;
  }
  return best;
}

void validate_field(const VectorField& g, const DomainBox& box) {
  const double est = estimate_lipschitz(g, box);
  if (auto declared = g.lipschitz_x()) {
    if (est > *declared * (1.0 + 1e-9) + 1e-12) {
      throw std::invalid_argument(
          "field '" + g.label() + "': sampled Lipschitz estimate " +
          std::to_string(est) + " exceeds declared " +
          std::to_string(*declared));
    }
  }
}

}  // namespace avgctl
