#pragma once

// Cost operators on H (x) H*:
//   C_{A,p} = sum_k |A_k (x) I - I (x) A_k^T|^p
// built from the eigenbases of the A_k, plus the general cost C_c for a
// classical cost c and the tensor-power (p,q) objective.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "qwot/errors.hpp"
#include "qwot/linalg.hpp"
#include "qwot/quantum.hpp"

namespace qwot {

struct CostOperator {
  std::size_t dim = 0;  // d^2
  HermitianOperator matrix;
  double p = 0.0;
  ObservableCollection source;

  std::size_t base_dim() const { return source.dim(); }
};

// c(x, y) for x, y real vectors of length K.
struct ClassicalCostFunction {
  std::function<double(const std::vector<double>&, const std::vector<double>&)> evaluator;

  double operator()(const std::vector<double>& x, const std::vector<double>& y) const {
    const double v = evaluator(x, y);
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw DomainError("ClassicalCostFunction: cost must be finite and nonnegative");
    }
    return v;
  }

  // sum_k |x_k - y_k|^p
  static ClassicalCostFunction power(double p) {
    return {[p](const std::vector<double>& x, const std::vector<double>& y) {
      double s = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) s += abs_pow(x[k] - y[k], p);
      return s;
    }};
  }
};

namespace detail {

// V (x) conj(V): eigenvectors v_r (x) conj(v_s) of A (x) I - I (x) A^T, index r*d + s.
inline ComplexMatrix product_basis(const ComplexMatrix& v) {
  return kron(v, v.conjugate());
}

// W diag(values) W^dagger.
inline ComplexMatrix diag_in_basis(const ComplexMatrix& w, const std::vector<double>& values) {
  return reconstruct(w, values);
}

// Single-observable term |A (x) I - I (x) A^T|^p on the clustered spectrum.
inline ComplexMatrix single_cost_term(const HermitianOperator& a, double p) {
  const auto eig = eigh(a);
  const auto lam = eig.clustered_eigenvalues();
  const std::size_t d = a.dim();
  std::vector<double> vals(d * d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t s = 0; s < d; ++s) vals[r * d + s] = abs_pow(lam[r] - lam[s], p);
  return diag_in_basis(product_basis(eig.eigenvectors), vals);
}

}  // namespace detail

inline CostOperator cost_operator(const ObservableCollection& a, double p) {
  if (!(p > 0.0) || !std::isfinite(p)) {
    throw DomainError("cost_operator: p must be finite and > 0, got " + std::to_string(p));
  }
  const std::size_t d = a.dim();
  ComplexMatrix c(d * d, d * d);
  for (const auto& obs : a) c += detail::single_cost_term(obs, p);
  return CostOperator{d * d, HermitianOperator::hermitian_part(c), p, a};
}

inline double commutator_norm(const HermitianOperator& a, const HermitianOperator& b) {
  return commutator(a.matrix(), b.matrix()).max_abs();
}

struct JointEigenbasis {
  ComplexMatrix vectors;                  // columns u_i
  std::vector<std::vector<double>> values;  // values[i][k] = <u_i|A_k|u_i>
};

// Common eigenbasis of a commuting collection.
inline JointEigenbasis joint_eigenbasis(const ObservableCollection& a, double tol = 1e-9) {
  double scale = 1.0;
  for (const auto& obs : a) scale = std::max(scale, obs.matrix().max_abs());
  for (std::size_t j = 0; j < a.size(); ++j)
    for (std::size_t k = j + 1; k < a.size(); ++k)
      if (commutator_norm(a[j], a[k]) > tol * scale * scale) {
        throw UnsupportedStructure("joint_eigenbasis: observables do not commute");
      }
  // A generic real combination separates every joint eigenspace.
  const std::size_t d = a.dim();
  ComplexMatrix mix(d, d);
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double w = 1.0 / (std::sqrt(2.0) + 0.7390851332 * static_cast<double>(k) +
                            0.1 * static_cast<double>(k * k));
    mix += w * a[k].matrix();
  }
  const auto eig = eigh(HermitianOperator::hermitian_part(mix));
  JointEigenbasis out{eig.eigenvectors, {}};
  out.values.assign(d, std::vector<double>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto t = eig.eigenvectors.adjoint() * a[k].matrix() * eig.eigenvectors;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        if (i != j && std::abs(t(i, j)) > 1e-7 * scale) {
          throw UnsupportedStructure("joint_eigenbasis: failed to diagonalize jointly");
        }
      }
      out.values[i][k] = t(i, i).real();
    }
  }
  return out;
}

// C_c = sum over the joint spectral grid of c(x, y) E(x) (x) E(y)^T. For K > 1
// the collection must commute; the non-commuting tensor-power construction is
// only available through evaluate_pq_objective.
inline CostOperator general_cost_operator(const ClassicalCostFunction& c,
                                          const ObservableCollection& a) {
  const std::size_t d = a.dim();
  ComplexMatrix basis;
  std::vector<std::vector<double>> pts(d);
  if (a.size() == 1) {
    const auto eig = eigh(a[0]);
    const auto lam = eig.clustered_eigenvalues();
    basis = eig.eigenvectors;
    for (std::size_t i = 0; i < d; ++i) pts[i] = {lam[i]};
  } else {
    const auto jb = joint_eigenbasis(a);
    basis = jb.vectors;
    pts = jb.values;
  }
  std::vector<double> vals(d * d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t s = 0; s < d; ++s) vals[r * d + s] = c(pts[r], pts[s]);
  const auto m = detail::diag_in_basis(detail::product_basis(basis), vals);
  return CostOperator{d * d, HermitianOperator::hermitian_part(m), 0.0, a};
}

// tr[Pi C] for a coupling.
inline double transport_cost(const Coupling& pi, const CostOperator& c) {
  return trace_of_product(pi.matrix(), c.matrix.matrix()).real();
}

// tr over (H (x) H*)^{(x)K} of Pi^{(x)K} C_{p,q}. For q == p this is
// sum_k tr[Pi |A_k (x) I - I (x) A_k^T|^p]. Otherwise every summand of
// C_{p,q} acts on its own tensor factor, so all are diagonal in the product
// basis (x)_k (v_r (x) conj(v_s)) and the trace is an enumeration over that
// grid weighted by the diagonal of Pi in each factor's basis.
inline double evaluate_pq_objective(const Coupling& pi, const ObservableCollection& a, double p,
                                    double q, std::size_t max_total_dim = kDefaultMaxTotalDim) {
  if (!(p > 0.0)) throw DomainError("evaluate_pq_objective: p must be > 0");
  if (!(q >= 1.0)) throw DomainError("evaluate_pq_objective: q must be >= 1");
  if (pi.dim() != a.dim()) throw ShapeError("evaluate_pq_objective: dimension mismatch");
  const std::size_t d = a.dim();
  const std::size_t n = d * d;
  const std::size_t kk = a.size();
  if (q == p || kk == 1) {
    double s = 0.0;
    for (const auto& obs : a) s += trace_of_product(pi.matrix(), detail::single_cost_term(obs, p)).real();
    return s;
  }
  double total = 1.0;
  for (std::size_t k = 0; k < kk; ++k) {
    total *= static_cast<double>(n);
    if (total > static_cast<double>(max_total_dim)) {
      throw SizeError("evaluate_pq_objective: tensor-power dimension (d^2)^K = " +
                      std::to_string(std::pow(static_cast<double>(n), static_cast<double>(kk))) +
                      " exceeds guard " + std::to_string(max_total_dim));
    }
  }
  std::vector<std::vector<double>> weight(kk, std::vector<double>(n));
  std::vector<std::vector<double>> delta(kk, std::vector<double>(n));
  for (std::size_t k = 0; k < kk; ++k) {
    const auto eig = eigh(a[k]);
    const auto lam = eig.clustered_eigenvalues();
    const auto w = detail::product_basis(eig.eigenvectors);
    const auto diag = w.adjoint() * pi.matrix() * w;
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t s = 0; s < d; ++s) {
        weight[k][r * d + s] = diag(r * d + s, r * d + s).real();
        delta[k][r * d + s] = std::abs(lam[r] - lam[s]);
      }
  }
  std::vector<std::size_t> idx(kk, 0);
  double result = 0.0;
  while (true) {
    double w = 1.0;
    double inner = 0.0;
    for (std::size_t k = 0; k < kk; ++k) {
      w *= weight[k][idx[k]];
      inner += abs_pow(delta[k][idx[k]], q);
    }
    result += w * abs_pow(inner, p / q);
    std::size_t k = 0;
    while (k < kk && ++idx[k] == n) idx[k++] = 0;
    if (k == kk) break;
  }
  return result;
}

// Joint law of (X_k, Y_k): X_k is A_k measured in rho (the H* factor), Y_k is
// A_k measured in omega (the H factor).
struct MeasurementTable {
  std::vector<double> x_values;
  std::vector<double> y_values;
  std::vector<std::vector<double>> prob;  // prob[ix][iy]

  double total() const {
    double s = 0.0;
    for (const auto& row : prob) for (double v : row) s += v;
    return s;
  }
};

inline std::vector<MeasurementTable> measurement_law(const Coupling& pi,
                                                     const ObservableCollection& a) {
  if (pi.dim() != a.dim()) throw ShapeError("measurement_law: dimension mismatch");
  std::vector<MeasurementTable> out;
  for (const auto& obs : a) {
    const auto eig = eigh(obs);
    const auto vals = eig.distinct_eigenvalues();
    const std::size_t g = vals.size();
    std::vector<ComplexMatrix> proj;
    for (std::size_t i = 0; i < g; ++i) proj.push_back(eig.group_projector(i));
    MeasurementTable t{vals, vals, std::vector<std::vector<double>>(g, std::vector<double>(g))};
    for (std::size_t ix = 0; ix < g; ++ix) {
      const auto ex_t = transpose_op(proj[ix]);
      for (std::size_t iy = 0; iy < g; ++iy) {
        t.prob[ix][iy] = trace_of_product(pi.matrix(), kron(proj[iy], ex_t)).real();
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace qwot
