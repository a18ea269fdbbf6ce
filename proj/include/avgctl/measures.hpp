#pragma once

#include <vector>

#include "avgctl/fields.hpp"

namespace avgctl {

/**
 * Finite-support probability measure sum_i w_i delta_{f_i} over vector fields.
 * A single-atom mixture is a Dirac measure.
 */
class Mixture {
 public:
  const std::vector<VectorField>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return atoms_.size(); }
  bool is_dirac() const { return atoms_.size() == 1; }
  int state_dim() const { return atoms_.front().state_dim(); }
  int control_dim() const { return atoms_.front().control_dim(); }

 private:
  friend Mixture make_mixture(std::vector<VectorField>,
                              std::vector<double>);
  Mixture() = default;
  std::vector<VectorField> atoms_;
  std::vector<double> weights_;
};

/// Prunes atoms with weight < 1e-12 and renormalizes. Throws on an empty
/// atom list, length mismatch, negative or non-finite weights, a weight sum
/// further than 1e-6 from one, or atoms of differing dimensions.
Mixture make_mixture(std::vector<VectorField> atoms,
                     std::vector<double> weights);

inline Mixture dirac(VectorField f) { return make_mixture({std::move(f)}, {1.0}); }

/// Row-major rows x cols coupling matrix.
struct TransportPlan {
  int rows = 0;
  int cols = 0;
  std::vector<double> mass;

  double at(int i, int j) const { return mass[i * cols + j]; }
};

struct TransportResult {
  double cost = 0.0;
  TransportPlan plan;
  int pivots = 0;
};

/**
 * Exact minimum-cost transportation between supplies and demands (equal
 * totals) with a dense row-major cost matrix, by the transportation simplex
 * (north-west corner start, MODI potentials). The entering cell is the first
 * negative reduced cost in row-major order; leaving ties go to the lowest
 * index.
 */
TransportResult solve_transport(const std::vector<double>& supply,
                                const std::vector<double>& demand,
                                const std::vector<double>& cost);

/// Pairwise sup_distance between the atoms of p (rows) and q (columns).
std::vector<double> ground_cost(const Mixture& p, const Mixture& q,
                                const DomainBox& box);

struct WassersteinResult {
  double distance = 0.0;
  TransportPlan plan;
};

WassersteinResult wasserstein1(const Mixture& p, const Mixture& q,
                               const DomainBox& box);

/// sum_i w_i sup_distance(atom_i, f); equal to W1(p, delta_f).
double dirac_target_w1(const Mixture& p, const VectorField& f,
                       const DomainBox& box);

}  // namespace avgctl
