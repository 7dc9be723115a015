#pragma once

// Wasserstein distances D_{A,p}, divergences d_{A,p}, and the quadratic
// closed forms.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qwot/cones.hpp"
#include "qwot/cost.hpp"
#include "qwot/errors.hpp"
#include "qwot/linalg.hpp"
#include "qwot/quantum.hpp"
#include "qwot/solver.hpp"

namespace qwot {

struct SolveOptions {
  double tol = kDefaultSolverTol;
  int max_iters = kDefaultMaxIters;
  SolverMethod method = SolverMethod::InteriorPoint;
};

inline constexpr double kSelfHealthTol = 1e-5;

namespace detail {

inline void require_p(double p, const char* what) {
  if (!(p > 0.0) || !std::isfinite(p)) {
    throw DomainError(std::string(what) + ": p must be finite and > 0, got " + std::to_string(p));
  }
}

}  // namespace detail

inline TransportResult optimal_transport(const State& rho, const State& omega,
                                         const ObservableCollection& a, double p,
                                         const SolveOptions& opts = {}) {
  detail::require_p(p, "optimal_transport");
  return solve_transport(rho, omega, cost_operator(a, p), opts.tol, opts.max_iters, opts.method);
}

// Optimal value raised to min(1, 1/p).
inline double distance(const State& rho, const State& omega, const ObservableCollection& a,
                       double p, const SolveOptions& opts = {}) {
  const auto res = optimal_transport(rho, omega, a, p, opts);
  return std::pow(std::max(0.0, res.value), std::min(1.0, 1.0 / p));
}

// D_{A,2}(rho, rho)^2 = 2 sum_k tr[rho A_k^2 - (rho^{1/2} A_k)^2].
inline double quadratic_self_distance_sq(const State& rho, const ObservableCollection& a) {
  if (rho.dim() != a.dim()) throw ShapeError("quadratic_self_distance_sq: dimension mismatch");
  double s = 0.0;
  for (const auto& obs : a) {
    const auto sq = obs.matrix() * obs.matrix();
    s += trace_of_product(rho.matrix(), sq).real() - sqrt_product_trace(rho, obs);
  }
  return std::max(0.0, 2.0 * s);
}

// Exact self-transport cost where one is available: the quadratic formula at
// p = 2, and on qubits any p after mapping each observable to a two-level
// observable with the same cost at exponent 2.
inline std::optional<double> self_cost_closed_form(const State& rho, const ObservableCollection& a,
                                                   double p) {
  detail::require_p(p, "self_cost_closed_form");
  if (p == 2.0) return quadratic_self_distance_sq(rho, a);
  if (a.dim() != 2) return std::nullopt;
  std::vector<HermitianOperator> moved;
  for (const auto& obs : a) moved.push_back(two_level_transport(obs, p, 2.0));
  return quadratic_self_distance_sq(rho, ObservableCollection(std::move(moved)));
}

struct SelfCost {
  double value = 0.0;                  // value used in the divergence
  TransportResult solver;
  std::optional<double> closed_form;
  double discrepancy = 0.0;            // |closed form - solver|
  bool health_ok = true;
};

struct DivergenceReport {
  double p = 2.0;
  double tol = kDefaultSolverTol;
  double distance_pow = 0.0;    // D^{max(p,1)}(rho, omega), the optimal value
  double self_rho_pow = 0.0;
  double self_omega_pow = 0.0;
  double divergence_pow = 0.0;  // raw bracket
  std::optional<double> divergence;  // empty when the bracket is below -10 tol
  bool clamped = false;
  TransportResult cross;
  SelfCost self_rho;
  SelfCost self_omega;

  bool defined() const { return divergence.has_value(); }
  bool converged() const {
    return cross.converged && self_rho.solver.converged && self_omega.solver.converged;
  }
  bool health_ok() const { return self_rho.health_ok && self_omega.health_ok; }
};

inline SelfCost self_cost(const State& rho, const ObservableCollection& a, double p,
                          const CostOperator& cost, const SolveOptions& opts = {}) {
  SelfCost out;
  out.solver = solve_transport(rho, rho, cost, opts.tol, opts.max_iters, opts.method);
  out.value = out.solver.value;
  out.closed_form = self_cost_closed_form(rho, a, p);
  if (out.closed_form) {
    out.discrepancy = std::abs(*out.closed_form - out.solver.value);
    out.health_ok = out.discrepancy <= kSelfHealthTol;
    out.value = *out.closed_form;
  }
  return out;
}

// Bracket D^{max(p,1)}(rho, omega) - (D^{max(p,1)}(rho, rho) + D^{max(p,1)}(omega, omega)) / 2
// and its min(1/p, 1) power.
inline DivergenceReport assemble_divergence(double p, double tol, TransportResult cross,
                                            SelfCost self_rho, SelfCost self_omega) {
  DivergenceReport rep;
  rep.p = p;
  rep.tol = tol;
  rep.distance_pow = std::max(0.0, cross.value);
  rep.self_rho_pow = self_rho.value;
  rep.self_omega_pow = self_omega.value;
  rep.divergence_pow = cross.value - 0.5 * (self_rho.value + self_omega.value);
  const double expo = std::min(1.0 / p, 1.0);
  if (rep.divergence_pow >= 0.0) {
    rep.divergence = std::pow(rep.divergence_pow, expo);
  } else if (rep.divergence_pow > -10.0 * tol) {
    rep.clamped = true;
    rep.divergence = 0.0;
  }
  rep.cross = std::move(cross);
  rep.self_rho = std::move(self_rho);
  rep.self_omega = std::move(self_omega);
  return rep;
}

inline DivergenceReport divergence(const State& rho, const State& omega,
                                   const ObservableCollection& a, double p,
                                   const SolveOptions& opts = {}) {
  detail::require_p(p, "divergence");
  const auto cost = cost_operator(a, p);
  auto sr = self_cost(rho, a, p, cost, opts);
  if (rho.dim() == omega.dim() && max_abs_diff(rho.matrix(), omega.matrix()) == 0.0) {
    // The cross problem is the self problem; reuse it so the bracket is exactly 0.
    auto cross = sr.solver;
    cross.value = sr.value;
    auto so = sr;
    return assemble_divergence(p, opts.tol, std::move(cross), std::move(sr), std::move(so));
  }
  auto cross = solve_transport(rho, omega, cost, opts.tol, opts.max_iters, opts.method);
  auto so = self_cost(omega, a, p, cost, opts);
  return assemble_divergence(p, opts.tol, std::move(cross), std::move(sr), std::move(so));
}

// Euclidean distance of the generalized Bloch vectors (tr[rho A_k])_k.
inline double pure_divergence_quadratic(const State& rho, const State& omega,
                                        const ObservableCollection& a) {
  if (!is_pure(rho) || !is_pure(omega)) {
    throw DomainError("pure_divergence_quadratic: both states must be pure");
  }
  return bloch_vector(rho, a).distance(bloch_vector(omega, a));
}

// sum_k tr[(rho^{1/2} A_k)^2 + (omega^{1/2} A_k)^2 - 2 rho^{1/2} A_k rho^{1/2} Phi^dagger(A_k)]
// for a channel with Phi(rho) = omega.
inline double quadratic_divergence_channel_form(const State& rho, const State& omega,
                                                const ObservableCollection& a, const Channel& phi) {
  if (rho.dim() != a.dim() || omega.dim() != a.dim()) {
    throw ShapeError("quadratic_divergence_channel_form: dimension mismatch");
  }
  if (phi.dim_in() != rho.dim() || phi.dim_out() != omega.dim()) {
    throw InvalidChannel("quadratic_divergence_channel_form: channel dimensions do not match");
  }
  const double err = max_abs_diff(phi.apply(rho.matrix()), omega.matrix());
  if (err > 1e-8) {
    throw InvalidChannel("quadratic_divergence_channel_form: Phi(rho) != omega (error " +
                         std::to_string(err) + ")");
  }
  const auto sr = rho.sqrt().matrix();
  double s = 0.0;
  for (const auto& obs : a) {
    const auto& m = obs.matrix();
    s += sqrt_product_trace(rho, obs) + sqrt_product_trace(omega, obs) -
         2.0 * trace_of_product(sr * m * sr, phi.adjoint_apply(m)).real();
  }
  return s;
}

struct TriangleCheck {
  DivergenceReport rho_omega;
  DivergenceReport rho_tau;
  DivergenceReport tau_omega;

  bool defined() const { return rho_omega.defined() && rho_tau.defined() && tau_omega.defined(); }
  // d(rho, omega) - d(rho, tau) - d(tau, omega); only meaningful when defined().
  double violation() const {
    if (!defined()) return 0.0;
    return *rho_omega.divergence - *rho_tau.divergence - *tau_omega.divergence;
  }
};

// Six solves: three cross couplings and one self coupling per state.
inline TriangleCheck triangle_check(const State& rho, const State& tau, const State& omega,
                                    const ObservableCollection& a, double p,
                                    const SolveOptions& opts = {}) {
  detail::require_p(p, "triangle_check");
  const auto cost = cost_operator(a, p);
  auto solve = [&](const State& x, const State& y) {
    return solve_transport(x, y, cost, opts.tol, opts.max_iters, opts.method);
  };
  const auto s_rho = self_cost(rho, a, p, cost, opts);
  const auto s_tau = self_cost(tau, a, p, cost, opts);
  const auto s_omega = self_cost(omega, a, p, cost, opts);
  TriangleCheck out;
  out.rho_omega = assemble_divergence(p, opts.tol, solve(rho, omega), s_rho, s_omega);
  out.rho_tau = assemble_divergence(p, opts.tol, solve(rho, tau), s_rho, s_tau);
  out.tau_omega = assemble_divergence(p, opts.tol, solve(tau, omega), s_tau, s_omega);
  return out;
}

}  // namespace qwot
