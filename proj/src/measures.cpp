#include "avgctl/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace avgctl {

Mixture make_mixture(std::vector<VectorField> atoms,
                     std::vector<double> weights) {
  if (atoms.empty()) throw std::invalid_argument("mixture: empty atom list");
  if (atoms.size() != weights.size()) {
    throw std::invalid_argument("mixture: atoms and weights differ in length");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw std::invalid_argument("mixture: non-finite weight");
    if (w < 0.0) throw std::invalid_argument("mixture: negative weight");
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-6) {
    throw std::invalid_argument("mixture: weights must sum to 1 (got " +
                                std::to_string(total) + ")");
  }
  for (const auto& a : atoms) {
    if (a.state_dim() != atoms.front().state_dim() ||
        a.control_dim() != atoms.front().control_dim()) {
      throw DimensionError("mixture: atoms have differing dimensions");
    }
  }

  Mixture mix;
  double kept = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (weights[i] < 1e-12) continue;
    mix.atoms_.push_back(std::move(atoms[i]));
    mix.weights_.push_back(weights[i]);
    kept += weights[i];
  }
  if (kept != 1.0) {
    for (double& w : mix.weights_) w /= kept;
  }
  return mix;
}

namespace {

constexpr int kNoParent = -1;

// Basis-tree path from row node `from_row` to column node `to_col`. Nodes are
// rows [0, rows) then columns [rows, rows + cols). Returns the basic cells
// along the path in order.
std::vector<std::pair<int, int>> tree_path(const std::vector<char>& basic,
                                           int rows, int cols, int from_row,
                                           int to_col) {
  const int nodes = rows + cols;
  std::vector<int> parent(nodes, kNoParent);
  std::vector<char> seen(nodes, 0);
  std::vector<int> queue{from_row};
  seen[from_row] = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int v = queue[head];
    if (v < rows) {
      for (int j = 0; j < cols; ++j) {
        if (basic[v * cols + j] && !seen[rows + j]) {
          seen[rows + j] = 1;
          parent[rows + j] = v;
          queue.push_back(rows + j);
        }
      }
    } else {
      const int j = v - rows;
      for (int i = 0; i < rows; ++i) {
        if (basic[i * cols + j] && !seen[i]) {
          seen[i] = 1;
          parent[i] = v;
          queue.push_back(i);
        }
      }
    }
  }
  const int target = rows + to_col;
  if (!seen[target]) throw std::logic_error("transport: basis is not a tree");
  std::vector<std::pair<int, int>> path;
  for (int v = target; v != from_row; v = parent[v]) {
    const int p = parent[v];
    if (v >= rows) {
      path.emplace_back(p, v - rows);
    } else {
      path.emplace_back(v, p - rows);
    }
  }
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

TransportResult solve_transport(const std::vector<double>& supply,
                                const std::vector<double>& demand,
                                const std::vector<double>& cost) {
  const int rows = static_cast<int>(supply.size());
  const int cols = static_cast<int>(demand.size());
  if (rows == 0 || cols == 0) throw std::invalid_argument("transport: empty side");
  if (cost.size() != static_cast<std::size_t>(rows) * cols) {
    throw DimensionError("transport: cost matrix has wrong size");
  }
  for (double v : supply)
    if (!(v >= 0.0)) throw std::invalid_argument("transport: negative supply");
  for (double v : demand)
    if (!(v >= 0.0)) throw std::invalid_argument("transport: negative demand");
  const double total_s = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double total_d = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (std::abs(total_s - total_d) > 1e-9 * std::max(1.0, total_s)) {
    throw std::invalid_argument("transport: unbalanced marginals");
  }

  std::vector<double> flow(static_cast<std::size_t>(rows) * cols, 0.0);
  std::vector<char> basic(flow.size(), 0);

  // North-west corner: exactly rows + cols - 1 basic cells, some possibly 0.
  {
    std::vector<double> rs(supply), rd(demand);
    int i = 0, j = 0;
    for (;;) {
      const double x = std::min(rs[i], rd[j]);
      flow[i * cols + j] = x;
      basic[i * cols + j] = 1;
      rs[i] -= x;
      rd[j] -= x;
      if (i == rows - 1 && j == cols - 1) break;
      if (j == cols - 1 || (i < rows - 1 && rs[i] <= rd[j])) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  double cmax = 0.0;
  for (double c : cost) cmax = std::max(cmax, std::abs(c));
  const double tol = 1e-12 * (1.0 + cmax);
  const int max_pivots = 1000 * (rows + cols) * (rows + cols);

  std::vector<double> pu(rows), pv(cols);
  std::vector<char> known_u(rows), known_v(cols);
  int pivots = 0;
  for (;; ++pivots) {
    if (pivots > max_pivots) {
      throw std::runtime_error("transport: pivot limit exceeded");
    }
    // Potentials u_i + v_j = c_ij on basic cells.
    std::fill(known_u.begin(), known_u.end(), 0);
    std::fill(known_v.begin(), known_v.end(), 0);
    pu[0] = 0.0;
    known_u[0] = 1;
    bool progress = true;
    while (progress) {
      progress = false;
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
          if (!basic[i * cols + j]) continue;
          if (known_u[i] && !known_v[j]) {
            pv[j] = cost[i * cols + j] - pu[i];
            known_v[j] = 1;
            progress = true;
          } else if (!known_u[i] && known_v[j]) {
            pu[i] = cost[i * cols + j] - pv[j];
            known_u[i] = 1;
            progress = true;
          }
        }
      }
    }

    int enter_i = -1, enter_j = -1;
    for (int i = 0; i < rows && enter_i < 0; ++i) {
      for (int j = 0; j < cols; ++j) {
        if (basic[i * cols + j]) continue;
        if (cost[i * cols + j] - pu[i] - pv[j] < -tol) {
          enter_i = i;
          enter_j = j;
          break;
        }
      }
    }
    if (enter_i < 0) break;

    // Cycle: entering cell gets +theta, path cells alternate -, +, ..., -.
    const auto path = tree_path(basic, rows, cols, enter_i, enter_j);
    double theta = std::numeric_limits<double>::infinity();
    int leave = -1;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const int cell = path[k].first * cols + path[k].second;
      if (flow[cell] < theta || (flow[cell] == theta && cell < leave)) {
        theta = flow[cell];
        leave = cell;
      }
    }
    if (leave < 0) throw std::logic_error("transport: basis tree has no cycle");
    for (std::size_t k = 0; k < path.size(); ++k) {
      const int cell = path[k].first * cols + path[k].second;
      flow[cell] += (k % 2 == 0) ? -theta : theta;
    }
    flow[leave] = 0.0;
    basic[leave] = 0;
    const int entering = enter_i * cols + enter_j;
    flow[entering] = theta;
    basic[entering] = 1;
  }

  TransportResult result;
  result.plan.rows = rows;
  result.plan.cols = cols;
  result.plan.mass.resize(flow.size());
  for (std::size_t c = 0; c < flow.size(); ++c) {
    result.plan.mass[c] = std::max(0.0, flow[c]);
    result.cost += result.plan.mass[c] * cost[c];
  }
  result.pivots = pivots;
  return result;
}

std::vector<double> ground_cost(const Mixture& p, const Mixture& q,
                                const DomainBox& box) {
  if (p.state_dim() != q.state_dim() || p.control_dim() != q.control_dim()) {
    throw DimensionError("ground_cost: mixtures have different dimensions");
  }
  const std::size_t rows = p.size(), cols = q.size();
  std::vector<double> cost(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      cost[i * cols + j] = sup_distance(p.atoms()[i], q.atoms()[j], box);
  return cost;
}

WassersteinResult wasserstein1(const Mixture& p, const Mixture& q,
                               const DomainBox& box) {
  const auto cost = ground_cost(p, q, box);
  auto t = solve_transport(p.weights(), q.weights(), cost);
  return {t.cost, std::move(t.plan)};
}

double dirac_target_w1(const Mixture& p, const VectorField& f,
                       const DomainBox& box) {
  if (p.state_dim() != f.state_dim() || p.control_dim() != f.control_dim()) {
    throw DimensionError("dirac_target_w1: dimension mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    total += p.weights()[i] * sup_distance(p.atoms()[i], f, box);
  return total;
}

}  // namespace avgctl
