#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace avgctl {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a field (or cost) returns NaN/inf at a point where it must be
/// finite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Compact state x control box on which sup norms and Lipschitz estimates are
 * sampled. Every sample grid is uniform per coordinate and contains the box
 * corners.
 */
struct DomainBox {
  std::vector<double> state_lo;
  std::vector<double> state_hi;
  std::vector<double> control_lo;
  std::vector<double> control_hi;
  int samples_per_dim = 0;  // 0 selects default_samples_per_dim()

  int state_dim() const { return static_cast<int>(state_lo.size()); }
  int control_dim() const { return static_cast<int>(control_lo.size()); }

  /// Throws std::invalid_argument unless lo < hi everywhere and the sample
  /// count (after defaulting) is at least 2.
  void validate() const;

  /// Sample count actually used: samples_per_dim, or the dimension-based
  /// default when it is 0.
  int resolved_samples() const;
};

/// 201 for up to two sampled dimensions, 41 for three, 21 for four or more.
int default_samples_per_dim(int total_dims);

/**
 * Dynamics g(x, u) -> R^n. Evaluation is pure; copies share nothing mutable.
 *
 * An analytic Jacobian may be attached. When absent, jacobian() falls back to
 * central differences with step 1e-6 * (1 + |z_j|).
 */
class VectorField {
 public:
  using EvalFn = std::function<void(std::span<const double> x,
                                    std::span<const double> u,
                                    std::span<double> out)>;
  /// Writes d/dx (n x n) and d/du (n x m), both row-major.
  using JacobianFn = std::function<void(
      std::span<const double> x, std::span<const double> u,
      std::span<double> dx, std::span<double> du)>;

  VectorField(std::string label, int state_dim, int control_dim, EvalFn eval,
              std::optional<double> lipschitz_x = std::nullopt,
              JacobianFn jacobian = nullptr);

  int state_dim() const { return n_; }
  int control_dim() const { return m_; }
  const std::string& label() const { return label_; }
  std::optional<double> lipschitz_x() const { return lipschitz_; }
  bool has_analytic_jacobian() const { return static_cast<bool>(jac_); }

  void eval(std::span<const double> x, std::span<const double> u,
            std::span<double> out) const {
    eval_(x, u, out);
  }
  std::vector<double> operator()(std::span<const double> x,
                                 std::span<const double> u) const;

  void jacobian(std::span<const double> x, std::span<const double> u,
                std::span<double> dx, std::span<double> du) const;

  /// Same field with the analytic Jacobian dropped (forces finite differences).
  VectorField without_jacobian() const;

 private:
  std::string label_;
  int n_;
  int m_;
  EvalFn eval_;
  std::optional<double> lipschitz_;
  JacobianFn jac_;
};

/// x -> A x + B u + c. A is n x n, B is n x m, both row-major.
VectorField affine_field(std::string label, std::vector<double> a,
                         std::vector<double> b, std::vector<double> c,
                         std::optional<double> lipschitz_x = std::nullopt);

/// x -> A x + (cos u, sin u); n = 2, m = 1.
VectorField affine_polar_field(std::string label, std::vector<double> a,
                               std::optional<double> lipschitz_x = std::nullopt);

/// Scalar x -> lambda x + sin(x) + u, with declared Lipschitz constant
/// |lambda| + 1.
VectorField scalar_lambda_sin_field(double lambda);

/// Spectral norm of a small row-major square matrix (largest singular value).
double spectral_norm(std::span<const double> a, int n);

/// Iterates the uniform sample grid of the full (state, control) box.
/// The callback receives the state and control coordinates of each point.
void for_each_box_sample(
    const DomainBox& box,
    const std::function<void(std::span<const double>, std::span<const double>)>&
        fn);

/// max over the box sample grid of |g(x,u) - f(x,u)|_2.
double sup_distance(const VectorField& g, const VectorField& f,
                    const DomainBox& box);

/// Largest sampled difference quotient |g(x,u)-g(y,u)| / |x-y| over
/// neighbouring grid points (axis and diagonal neighbours). A lower bound on
/// the Lipschitz constant in x on the box.
double estimate_lipschitz(const VectorField& g, const DomainBox& box);

/// Checks finiteness on the box grid and, when declared, that the estimated
/// Lipschitz constant stays within 1e-9 relative slack of the declaration.
void validate_field(const VectorField& g, const DomainBox& box);

}  // namespace avgctl
