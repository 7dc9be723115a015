#pragma once

// Discrete transport LP solved by the transportation simplex: north-west
// corner start, MODI potentials, Bland's rule for entering and leaving cells.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "qwot/errors.hpp"

namespace qwot {

inline constexpr std::size_t kMaxClassicalAtoms = 64;

struct DiscreteDistribution {
  std::vector<std::vector<double>> atoms;  // one point of R^K per atom
  std::vector<double> weights;
};

struct ClassicalTransportProblem {
  DiscreteDistribution mu;
  DiscreteDistribution nu;
  std::vector<std::vector<double>> cost_matrix;  // cost_matrix[i][j] = c(x_i, y_j)
};

struct ClassicalTransportResult {
  double value = 0.0;
  std::vector<std::vector<double>> plan;  // same shape as cost_matrix
  int pivots = 0;
};

namespace detail {

inline void validate_distribution(const DiscreteDistribution& d, const char* name) {
  if (d.weights.empty()) throw InvalidProblem(std::string("solve_classical_lp: ") + name + " is empty");
  if (d.weights.size() > kMaxClassicalAtoms) {
    throw InvalidProblem(std::string("solve_classical_lp: ") + name + " has more than 64 atoms");
  }
  if (!d.atoms.empty() && d.atoms.size() != d.weights.size()) {
    throw InvalidProblem(std::string("solve_classical_lp: ") + name + " atoms/weights size mismatch");
  }
  double s = 0.0;
  for (double w : d.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidProblem(std::string("solve_classical_lp: negative weight in ") + name);
    }
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-9) {
    throw InvalidProblem(std::string("solve_classical_lp: ") + name + " weights sum to " +
                         std::to_string(s));
  }
}

class TransportSimplex {
 public:
  TransportSimplex(std::vector<double> supply, std::vector<double> demand,
                   std::vector<std::vector<double>> cost)
      : m_(supply.size()), n_(demand.size()), cost_(std::move(cost)),
        x_(m_, std::vector<double>(n_, 0.0)), basic_(m_, std::vector<char>(n_, 0)) {
    north_west(std::move(supply), std::move(demand));
  }

  int solve(int max_pivots) {
    double scale = 1.0;
    for (const auto& row : cost_) for (double c : row) scale = std::max(scale, std::abs(c));
    const double eps = 1e-12 * scale;
    for (int pivot = 0; pivot < max_pivots; ++pivot) {
      potentials();
      bool entered = false;
      for (std::size_t i = 0; i < m_ && !entered; ++i)
        for (std::size_t j = 0; j < n_ && !entered; ++j)
          if (!basic_[i][j] && cost_[i][j] - u_[i] - v_[j] < -eps) {
            enter(i, j);
            entered = true;
          }
      if (!entered) return pivot;
    }
    throw NumericalFailure("solve_classical_lp: pivot limit reached");
  }

  const std::vector<std::vector<double>>& plan() const { return x_; }

 private:
  // Ties advance the row only, so a degenerate zero cell keeps the basis at
  // m + n - 1 cells.
  void north_west(std::vector<double> s, std::vector<double> d) {
    std::size_t i = 0;
    std::size_t j = 0;
    while (true) {
      const double q = std::min(s[i], d[j]);
      x_[i][j] = q;
      basic_[i][j] = 1;
      s[i] -= q;
      d[j] -= q;
      if (i + 1 == m_ && j + 1 == n_) break;
      if ((s[i] <= d[j] && i + 1 < m_) || j + 1 == n_) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  void potentials() {
    u_.assign(m_, std::numeric_limits<double>::quiet_NaN());
    v_.assign(n_, std::numeric_limits<double>::quiet_NaN());
    u_[0] = 0.0;
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i = 0; i < m_; ++i)
        for (std::size_t j = 0; j < n_; ++j) {
          if (!basic_[i][j]) continue;
          if (!std::isnan(u_[i]) && std::isnan(v_[j])) {
            v_[j] = cost_[i][j] - u_[i];
            changed = true;
          } else if (std::isnan(u_[i]) && !std::isnan(v_[j])) {
            u_[i] = cost_[i][j] - v_[j];
            changed = true;
          }
        }
    }
  }

  // Path in the basis tree from row node i to column node j; nodes 0..m-1 are
  // rows, m..m+n-1 columns.
  std::vector<std::pair<std::size_t, std::size_t>> cycle(std::size_t ei, std::size_t ej) const {
    const std::size_t nodes = m_ + n_;
    std::vector<std::size_t> parent(nodes, nodes);
    std::vector<std::size_t> queue{ei};
    parent[ei] = ei;
    for (std::size_t h = 0; h < queue.size(); ++h) {
      const std::size_t a = queue[h];
      if (a < m_) {
        for (std::size_t j = 0; j < n_; ++j)
          if (basic_[a][j] && parent[m_ + j] == nodes) {
            parent[m_ + j] = a;
            queue.push_back(m_ + j);
          }
      } else {
        const std::size_t j = a - m_;
        for (std::size_t i = 0; i < m_; ++i)
          if (basic_[i][j] && parent[i] == nodes) {
            parent[i] = a;
            queue.push_back(i);
          }
      }
    }
    std::vector<std::pair<std::size_t, std::size_t>> cells{{ei, ej}};
    std::size_t node = m_ + ej;
    while (node != ei) {
      const std::size_t p = parent[node];
      if (node >= m_) {
        cells.emplace_back(p, node - m_);
      } else {
        cells.emplace_back(node, p - m_);
      }
      node = p;
    }
    return cells;
  }

  void enter(std::size_t ei, std::size_t ej) {
    const auto cells = cycle(ei, ej);
    // Odd positions lose mass.
    double theta = std::numeric_limits<double>::infinity();
    std::pair<std::size_t, std::size_t> leave{m_, n_};
    for (std::size_t k = 1; k < cells.size(); k += 2) {
      const auto [i, j] = cells[k];
      if (x_[i][j] < theta || (x_[i][j] == theta && std::make_pair(i, j) < leave)) {
        theta = x_[i][j];
        leave = {i, j};
      }
    }
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const auto [i, j] = cells[k];
      x_[i][j] += (k % 2 == 0) ? theta : -theta;
    }
    basic_[ei][ej] = 1;
    basic_[leave.first][leave.second] = 0;
    x_[leave.first][leave.second] = 0.0;
  }

  std::size_t m_;
  std::size_t n_;
  std::vector<std::vector<double>> cost_;
  std::vector<std::vector<double>> x_;
  std::vector<std::vector<char>> basic_;
  std::vector<double> u_;
  std::vector<double> v_;
};

}  // namespace detail

inline ClassicalTransportResult solve_classical_lp(const ClassicalTransportProblem& prob) {
  detail::validate_distribution(prob.mu, "mu");
  detail::validate_distribution(prob.nu, "nu");
  const std::size_t m = prob.mu.weights.size();
  const std::size_t n = prob.nu.weights.size();
  if (prob.cost_matrix.size() != m) throw InvalidProblem("solve_classical_lp: cost rows != |mu|");
  for (const auto& row : prob.cost_matrix) {
    if (row.size() != n) throw InvalidProblem("solve_classical_lp: cost cols != |nu|");
    for (double c : row)
      if (!(c >= 0.0) || !std::isfinite(c)) {
        throw InvalidProblem("solve_classical_lp: cost must be finite and nonnegative");
      }
  }

  std::vector<std::size_t> rows;
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < m; ++i) if (prob.mu.weights[i] > 0.0) rows.push_back(i);
  for (std::size_t j = 0; j < n; ++j) if (prob.nu.weights[j] > 0.0) cols.push_back(j);
  if (rows.empty() || cols.empty()) throw InvalidProblem("solve_classical_lp: empty support");

  std::vector<double> supply;
  std::vector<double> demand;
  for (std::size_t i : rows) supply.push_back(prob.mu.weights[i]);
  for (std::size_t j : cols) demand.push_back(prob.nu.weights[j]);
  // Balance the rounding difference of the two totals on the last demand.
  double ds = 0.0;
  for (double s : supply) ds += s;
  for (double d : demand) ds -= d;
  demand.back() = std::max(0.0, demand.back() + ds);

  std::vector<std::vector<double>> cost(rows.size(), std::vector<double>(cols.size()));
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) cost[a][b] = prob.cost_matrix[rows[a]][cols[b]];

  detail::TransportSimplex simplex(std::move(supply), std::move(demand), cost);
  ClassicalTransportResult res;
  res.pivots = simplex.solve(100000);
  res.plan.assign(m, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) {
      const double x = std::max(0.0, simplex.plan()[a][b]);
      res.plan[rows[a]][cols[b]] = x;
      res.value += x * cost[a][b];
    }
  return res;
}

// c(x_i, y_j) over the atoms of two distributions.
template <class Cost>
std::vector<std::vector<double>> cost_matrix(const DiscreteDistribution& mu,
                                             const DiscreteDistribution& nu, Cost&& c) {
  std::vector<std::vector<double>> out(mu.atoms.size(), std::vector<double>(nu.atoms.size()));
  for (std::size_t i = 0; i < mu.atoms.size(); ++i)
    for (std::size_t j = 0; j < nu.atoms.size(); ++j) out[i][j] = c(mu.atoms[i], nu.atoms[j]);
  return out;
}

}  // namespace qwot
