#pragma once

// Minimize tr[Pi C] over couplings of (rho, omega):
//   primal  min <C, X>  s.t.  tr_2 X = omega, tr_1 X = rho^T, X >= 0
//   dual    max <omega, Y1> + <rho^T, Y2>  s.t.  C - Y1 (x) I - I (x) Y2 >= 0
// Both methods report an exactly feasible coupling and an exactly feasible
// dual pair, so value - dual_value bounds the distance to the optimum.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "qwot/cost.hpp"
#include "qwot/errors.hpp"
#include "qwot/linalg.hpp"
#include "qwot/quantum.hpp"

namespace qwot {

inline constexpr double kDefaultSolverTol = 1e-7;
inline constexpr int kDefaultMaxIters = 50000;
inline constexpr int kInteriorPointMaxIters = 500;

enum class SolverMethod {
  InteriorPoint,  // primal-dual path following, HKM direction
  Admm,           // affine / PSD splitting
};

struct TransportProblem {
  State rho;
  State omega;
  CostOperator cost;
  double tol = kDefaultSolverTol;
  int max_iters = kDefaultMaxIters;
  SolverMethod method = SolverMethod::InteriorPoint;
};

struct TransportResult {
  double value = 0.0;
  Coupling plan;
  double dual_value = 0.0;
  HermitianOperator dual_y1;  // multiplier of tr_2 Pi = omega
  HermitianOperator dual_y2;  // multiplier of tr_1 Pi = rho^T
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // incumbent value per checkpoint, non-increasing
};

class NotConverged : public Error {
 public:
  NotConverged(const std::string& what, TransportResult best)
      : Error(what), best_(std::move(best)) {}
  const TransportResult& best() const { return best_; }

 private:
  TransportResult best_;
};

namespace detail {

inline double real_inner(const ComplexMatrix& a, const ComplexMatrix& b) {
  return hs_inner(a, b).real();
}

inline ComplexMatrix herm(const ComplexMatrix& a) {
  return HermitianOperator::hermitian_part(a).matrix();
}

// A*(Y1, Y2) = Y1 (x) I + I (x) Y2.
inline ComplexMatrix constraint_adjoint(const ComplexMatrix& y1, const ComplexMatrix& y2) {
  const std::size_t d1 = y1.rows();
  const std::size_t d2 = y2.rows();
  ComplexMatrix out(d1 * d2, d1 * d2);
  for (std::size_t i = 0; i < d1; ++i)
    for (std::size_t j = 0; j < d1; ++j) {
      const cplx a = y1(i, j);
      if (a != cplx{})
        for (std::size_t k = 0; k < d2; ++k) out(i * d2 + k, j * d2 + k) += a;
    }
  for (std::size_t i = 0; i < d1; ++i)
    for (std::size_t k = 0; k < d2; ++k)
      for (std::size_t l = 0; l < d2; ++l) out(i * d2 + k, i * d2 + l) += y2(k, l);
  return out;
}

inline double lambda_min(const ComplexMatrix& m) {
  return eigh(HermitianOperator::hermitian_part(m)).eigenvalues.front();
}

inline ComplexMatrix inverse_pd(const ComplexMatrix& s) {
  const auto eig = eigh(HermitianOperator::hermitian_part(s));
  std::vector<double> inv(eig.size());
  for (std::size_t k = 0; k < eig.size(); ++k) inv[k] = 1.0 / eig.eigenvalues[k];
  return reconstruct(eig.eigenvectors, inv);
}

inline double marginal_infeasibility(const ComplexMatrix& x, const ComplexMatrix& omega,
                                     const ComplexMatrix& rho_t) {
  const TensorDims dims{omega.rows(), rho_t.rows()};
  return std::max(max_abs_diff(partial_trace(x, dims, Subsystem::Second), omega),
                  max_abs_diff(partial_trace(x, dims, Subsystem::First), rho_t));
}

struct DualPair {
  ComplexMatrix y1;
  ComplexMatrix y2;
};

struct Certificate {
  DualPair y;
  double value = -std::numeric_limits<double>::infinity();
  double infeasibility = 0.0;  // deficit of lambda_min(C - A*(y)) before the shift
};

// Shifting Y1 by min(0, lambda_min(C - A*(y))) makes any pair feasible.
inline Certificate certify(const ComplexMatrix& c, DualPair y, const ComplexMatrix& omega,
                           const ComplexMatrix& rho_t) {
  y.y1 = herm(y.y1);
  y.y2 = herm(y.y2);
  const double lam = lambda_min(c - constraint_adjoint(y.y1, y.y2));
  const double shift = std::min(0.0, lam);
  for (std::size_t i = 0; i < y.y1.rows(); ++i) y.y1(i, i) += shift;
  Certificate cert;
  cert.y = std::move(y);
  cert.infeasibility = std::max(0.0, -lam);
  cert.value = real_inner(omega, cert.y.y1) + real_inner(rho_t, cert.y.y2);
  return cert;
}

inline TransportResult make_result(const TransportProblem& prob, const ComplexMatrix& plan,
                                   const Certificate& cert, int iterations,
                                   std::vector<double> trace) {
  const auto& c = prob.cost.matrix.matrix();
  const auto rt = transpose_op(prob.rho.matrix());
  const double tol = std::max(prob.tol, 1e-8);
  TransportResult res;
  res.plan = Coupling(State(HermitianOperator::hermitian_part(plan), tol), prob.omega, prob.rho, tol);
  res.value = real_inner(res.plan.matrix(), c);
  res.dual_y1 = HermitianOperator::hermitian_part(cert.y.y1);
  res.dual_y2 = HermitianOperator::hermitian_part(cert.y.y2);
  res.dual_value = cert.value;
  res.primal_residual = marginal_infeasibility(res.plan.matrix(), prob.omega.matrix(), rt);
  res.dual_residual = cert.infeasibility;
  res.gap = res.value - res.dual_value;
  res.iterations = iterations;
  res.converged = res.primal_residual <= prob.tol && res.dual_residual <= prob.tol &&
                  res.gap <= prob.tol * std::max(1.0, std::abs(res.value));
  res.trace = std::move(trace);
  // Renormalizing the plan can move its value by rounding; the trace stays monotone.
  if (res.trace.empty() || res.value < res.trace.back()) res.trace.push_back(res.value);
  return res;
}

//----------------------------------------------------------------------------
// Interior point
//----------------------------------------------------------------------------

// Orthonormal Hermitian basis of d x d matrices (generalized Gell-Mann). With
// with_identity the first element is I/sqrt(d); the rest are traceless.
inline std::vector<ComplexMatrix> hermitian_basis(std::size_t d, bool with_identity) {
  std::vector<ComplexMatrix> out;
  if (with_identity) {
    out.push_back((1.0 / std::sqrt(static_cast<double>(d))) * ComplexMatrix::identity(d));
  }
  const double r = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      ComplexMatrix s(d, d);
      s(i, j) = r;
      s(j, i) = r;
      out.push_back(std::move(s));
      ComplexMatrix a(d, d);
      a(i, j) = cplx{0.0, -r};
      a(j, i) = cplx{0.0, r};
      out.push_back(std::move(a));
    }
  for (std::size_t k = 1; k < d; ++k) {
    ComplexMatrix g(d, d);
    const double norm = 1.0 / std::sqrt(static_cast<double>(k * (k + 1)));
    for (std::size_t i = 0; i < k; ++i) g(i, i) = norm;
    g(k, k) = -static_cast<double>(k) * norm;
    out.push_back(std::move(g));
  }
  return out;
}

// In-place Cholesky of a row-major symmetric m x m matrix.
inline bool cholesky(std::vector<double>& a, std::size_t m) {
  for (std::size_t j = 0; j < m; ++j) {
    double s = a[j * m + j];
    for (std::size_t k = 0; k < j; ++k) s -= a[j * m + k] * a[j * m + k];
    if (!(s > 0.0)) return false;
    const double l = std::sqrt(s);
    a[j * m + j] = l;
    for (std::size_t i = j + 1; i < m; ++i) {
      double t = a[i * m + j];
      for (std::size_t k = 0; k < j; ++k) t -= a[i * m + k] * a[j * m + k];
      a[i * m + j] = t / l;
    }
  }
  return true;
}

// Cholesky with an escalating diagonal shift; near the optimum X and S lose
// rank and the Schur matrix becomes semidefinite to working precision.
inline bool factor_schur(std::vector<double>& a, std::size_t m) {
  double diag_max = 0.0;
  for (std::size_t i = 0; i < m; ++i) diag_max = std::max(diag_max, a[i * m + i]);
  if (!std::isfinite(diag_max) || !(diag_max > 0.0)) return false;
  const auto original = a;
  // Shifts 0, 1e-14, ..., 1e-6 times the largest diagonal entry.
  for (int attempt = 0; attempt <= 9; ++attempt) {
    const double shift = attempt == 0 ? 0.0 : std::pow(10.0, attempt - 15) * diag_max;
    a = original;
    for (std::size_t i = 0; i < m; ++i) a[i * m + i] += shift;
    if (cholesky(a, m)) return true;
  }
  return false;
}

inline std::vector<double> cholesky_solve(const std::vector<double>& l, std::size_t m,
                                          std::vector<double> b) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= l[i * m + k] * b[k];
    b[i] /= l[i * m + i];
  }
  for (std::size_t i = m; i-- > 0;) {
    for (std::size_t k = i + 1; k < m; ++k) b[i] -= l[k * m + i] * b[k];
    b[i] /= l[i * m + i];
  }
  return b;
}

// Eigenvectors of a state split by eigenvalue cutoff into (support, kernel),
// conjugated for the rho^T factor.
inline std::pair<ComplexMatrix, ComplexMatrix> split_support(const State& s, bool conjugate,
                                                             double cutoff) {
  const std::size_t d = s.dim();
  std::vector<std::size_t> keep;
  std::vector<std::size_t> drop;
  for (std::size_t k = 0; k < d; ++k) (s.eigenvalues()[k] > cutoff ? keep : drop).push_back(k);
  auto columns = [&](const std::vector<std::size_t>& idx) {
    ComplexMatrix u(d, idx.size());
    for (std::size_t c = 0; c < idx.size(); ++c)
      for (std::size_t i = 0; i < d; ++i) {
        const cplx v = s.eigenvectors()(i, idx[c]);
        u(i, c) = conjugate ? std::conj(v) : v;
      }
    return u;
  };
  return {columns(keep), columns(drop)};
}

inline ComplexMatrix hstack(const std::vector<ComplexMatrix>& blocks) {
  std::size_t cols = 0;
  for (const auto& b : blocks) cols += b.cols();
  ComplexMatrix out(blocks.front().rows(), cols);
  std::size_t off = 0;
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < b.rows(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, off + j) = b(i, j);
    off += b.cols();
  }
  return out;
}

inline ComplexMatrix block(const ComplexMatrix& m, std::size_t r0, std::size_t r1, std::size_t c0,
                           std::size_t c1) {
  ComplexMatrix out(r1 - r0, c1 - c0);
  for (std::size_t i = r0; i < r1; ++i)
    for (std::size_t j = c0; j < c1; ++j) out(i - r0, j - c0) = m(i, j);
  return out;
}

// Marginal supports: every coupling lives on supp(omega) (x) supp(rho^T).
struct Supports {
  ComplexMatrix u1, k1;  // omega
  ComplexMatrix u2, k2;  // rho^T
  bool full() const { return k1.cols() == 0 && k2.cols() == 0; }
  ComplexMatrix isometry() const { return kron(u1, u2); }
};

inline constexpr double kSupportCutoff = 1e-14;

inline Supports marginal_supports(const State& rho, const State& omega) {
  auto [u1, k1] = split_support(omega, false, kSupportCutoff);
  auto [u2, k2] = split_support(rho, true, kSupportCutoff);
  return {std::move(u1), std::move(k1), std::move(u2), std::move(k2)};
}

// Lifts a feasible dual pair of the support-restricted problem. The reduced
// slack is tightened to >= eps I and each kernel receives -t (I - P); in the
// basis [supp (x) supp | rest] the slack is [[S, B], [B^dag, D + t K]] with K
// diagonal (entries 1 or 2), so t is read off the Schur complement
// D - B^dag S^{-1} B and feasibility is checked blockwise.
inline Certificate lift_dual(const ComplexMatrix& c, const Supports& sp, DualPair reduced,
                             double eps, const ComplexMatrix& omega, const ComplexMatrix& rho_t) {
  const std::size_t r1 = sp.u1.cols();
  const std::size_t r2 = sp.u2.cols();
  for (std::size_t i = 0; i < r1; ++i) reduced.y1(i, i) -= eps;
  const auto y1 = herm(sp.u1 * reduced.y1 * sp.u1.adjoint());
  const auto y2 = herm(sp.u2 * reduced.y2 * sp.u2.adjoint());

  std::vector<ComplexMatrix> cols{kron(sp.u1, sp.u2)};
  std::vector<double> k_diag;
  auto add = [&](const ComplexMatrix& a, const ComplexMatrix& b, double weight) {
    if (a.cols() == 0 || b.cols() == 0) return;
    cols.push_back(kron(a, b));
    k_diag.insert(k_diag.end(), a.cols() * b.cols(), weight);
  };
  add(sp.u1, sp.k2, 1.0);
  add(sp.k1, sp.u2, 1.0);
  add(sp.k1, sp.k2, 2.0);
  const auto r = hstack(cols);
  const std::size_t np = r1 * r2;
  const std::size_t n = r.rows();

  const auto s0 = herm(r.adjoint() * (c - constraint_adjoint(y1, y2)) * r);
  const auto s_pp = block(s0, 0, np, 0, np);
  const auto b = block(s0, 0, np, np, n);
  const auto dd = block(s0, np, n, np, n);
  const double lam_pp = lambda_min(s_pp);
  double t = 0.0;
  if (lam_pp > 0.0) {
    auto m = herm(dd - b.adjoint() * inverse_pd(s_pp) * b);
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) /= std::sqrt(k_diag[i] * k_diag[j]);
    t = std::max(0.0, -lambda_min(m));
    t = 1.01 * t + 1e-3 * std::max(1.0, c.max_abs());
  }
  const auto id = ComplexMatrix::identity(omega.rows());
  Certificate cert;
  cert.y = DualPair{herm(y1 - t * (id - sp.u1 * sp.u1.adjoint())),
                    herm(y2 - t * (id - sp.u2 * sp.u2.adjoint()))};
  cert.infeasibility = std::max(0.0, -lam_pp);
  cert.value = real_inner(omega, cert.y.y1) + real_inner(rho_t, cert.y.y2);
  return cert;
}

// Coordinates of the marginal constraints in an orthonormal basis: the full
// basis on the first factor and the traceless part on the second, so the
// constraint map is onto and the Schur matrix is definite.
class SdpInstance {
 public:
  SdpInstance(ComplexMatrix c, ComplexMatrix omega, ComplexMatrix rho_t)
      : c_(std::move(c)), omega_(std::move(omega)), rho_t_(std::move(rho_t)),
        d1_(omega_.rows()), d2_(rho_t_.rows()),
        f1_(hermitian_basis(d1_, true)), f2_(hermitian_basis(d2_, false)) {
    for (const auto& f : f1_) b_.push_back(real_inner(f, omega_));
    for (const auto& f : f2_) b_.push_back(real_inner(f, rho_t_));
  }

  std::size_t n() const { return d1_ * d2_; }
  std::size_t m() const { return f1_.size() + f2_.size(); }
  std::size_t d1() const { return d1_; }
  const ComplexMatrix& c() const { return c_; }
  const ComplexMatrix& omega() const { return omega_; }
  const ComplexMatrix& rho_t() const { return rho_t_; }
  const std::vector<double>& b() const { return b_; }

  std::vector<double> apply(const ComplexMatrix& g) const {
    const auto p1 = partial_trace(g, {d1_, d2_}, Subsystem::Second);
    const auto p2 = partial_trace(g, {d1_, d2_}, Subsystem::First);
    std::vector<double> out;
    out.reserve(m());
    for (const auto& f : f1_) out.push_back(trace_of_product(f, p1).real());
    for (const auto& f : f2_) out.push_back(trace_of_product(f, p2).real());
    return out;
  }

  DualPair dual_pair(const std::vector<double>& y) const {
    DualPair p{ComplexMatrix(d1_, d1_), ComplexMatrix(d2_, d2_)};
    for (std::size_t k = 0; k < f1_.size(); ++k) p.y1 += y[k] * f1_[k];
    for (std::size_t k = 0; k < f2_.size(); ++k) p.y2 += y[f1_.size() + k] * f2_[k];
    return p;
  }

  ComplexMatrix adjoint(const std::vector<double>& y) const {
    const auto p = dual_pair(y);
    return constraint_adjoint(p.y1, p.y2);
  }

  ComplexMatrix basis_adjoint(std::size_t j) const {
    if (j < f1_.size()) return kron(f1_[j], ComplexMatrix::identity(d2_));
    return kron(ComplexMatrix::identity(d1_), f2_[j - f1_.size()]);
  }

 private:
  ComplexMatrix c_;
  ComplexMatrix omega_;
  ComplexMatrix rho_t_;
  std::size_t d1_;
  std::size_t d2_;
  std::vector<ComplexMatrix> f1_;
  std::vector<ComplexMatrix> f2_;
  std::vector<double> b_;
};

// Largest alpha with X + alpha D >= 0 for X > 0; infinity when D >= 0.
inline double max_step(const ComplexMatrix& x, const ComplexMatrix& dx) {
  const auto eig = eigh(HermitianOperator::hermitian_part(x));
  std::vector<double> inv_sqrt(eig.size());
  for (std::size_t k = 0; k < eig.size(); ++k) {
    inv_sqrt[k] = 1.0 / std::sqrt(std::max(eig.eigenvalues[k], 1e-300));
  }
  const auto w = reconstruct(eig.eigenvectors, inv_sqrt);
  const double lam = lambda_min(w * dx * w);
  return lam >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lam;
}

struct IpmOutcome {
  ComplexMatrix x;
  double value = std::numeric_limits<double>::infinity();
  Certificate cert;
  int iterations = 0;
  std::vector<double> trace;
};

// Mehrotra predictor-corrector with the HKM direction, started from the
// trivial coupling and the dual point C + t I > 0.
inline IpmOutcome run_interior_point(const SdpInstance& sdp, double tol, int max_iters) {
  const std::size_t n = sdp.n();
  const std::size_t m = sdp.m();
  const auto& c = sdp.c();
  const double nn = static_cast<double>(n);

  ComplexMatrix x = kron(sdp.omega(), sdp.rho_t());
  std::vector<double> y(m, 0.0);
  y[0] = -(c.frobenius_norm() + 1.0) * std::sqrt(static_cast<double>(sdp.d1()));
  ComplexMatrix s = herm(c - sdp.adjoint(y));

  IpmOutcome best;
  best.x = x;
  best.value = real_inner(x, c);

  std::vector<ComplexMatrix> a_basis;
  a_basis.reserve(m);
  for (std::size_t j = 0; j < m; ++j) a_basis.push_back(sdp.basis_adjoint(j));

  for (int it = 1; it <= max_iters; ++it) {
    const auto ax = sdp.apply(x);
    std::vector<double> rp(m);
    for (std::size_t i = 0; i < m; ++i) rp[i] = sdp.b()[i] - ax[i];
    const auto rd = herm(c - sdp.adjoint(y) - s);
    const double mu = real_inner(x, s) / nn;
    const auto sinv = inverse_pd(s);

    std::vector<double> schur(m * m);
    for (std::size_t j = 0; j < m; ++j) {
      const auto col = sdp.apply(x * a_basis[j] * sinv);
      for (std::size_t i = 0; i < m; ++i) schur[i * m + j] = col[i];
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        const double v = 0.5 * (schur[i * m + j] + schur[j * m + i]);
        schur[i * m + j] = v;
        schur[j * m + i] = v;
      }
    if (!factor_schur(schur, m)) break;

    const auto x_rd = sdp.apply(x * rd * sinv);
    auto direction = [&](const ComplexMatrix& rc) {
      const auto arc = sdp.apply(rc);
      std::vector<double> rhs(m);
      for (std::size_t i = 0; i < m; ++i) rhs[i] = rp[i] - arc[i] + x_rd[i];
      auto dy = cholesky_solve(schur, m, std::move(rhs));
      auto ds = herm(rd - sdp.adjoint(dy));
      auto dx = herm(rc - x * ds * sinv);
      return std::make_tuple(std::move(dx), std::move(dy), std::move(ds));
    };

    const auto [dxa, dya, dsa] = direction((-1.0) * x);
    const double ap_aff = std::min(1.0, max_step(x, dxa));
    const double ad_aff = std::min(1.0, max_step(s, dsa));
    const double mu_aff = real_inner(x + ap_aff * dxa, s + ad_aff * dsa) / nn;
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);
    const auto [dx, dy, ds] = direction(herm((sigma * mu) * sinv - x - dxa * dsa * sinv));

    const double ap = std::min(1.0, 0.98 * max_step(x, dx));
    const double ad = std::min(1.0, 0.98 * max_step(s, ds));
    x = herm(x + ap * dx);
    for (std::size_t i = 0; i < m; ++i) y[i] += ad * dy[i];
    s = herm(s + ad * ds);
    best.iterations = it;

    const double val = real_inner(x, c);
    if (marginal_infeasibility(x, sdp.omega(), sdp.rho_t()) <= 0.1 * tol && val < best.value) {
      best.value = val;
      best.x = x;
    }
    auto cert = certify(c, sdp.dual_pair(y), sdp.omega(), sdp.rho_t());
    if (cert.value > best.cert.value) best.cert = std::move(cert);
    best.trace.push_back(best.value);

    if (best.value - best.cert.value <= 0.5 * tol * std::max(1.0, std::abs(best.value)) &&
        best.cert.infeasibility <= tol) {
      break;
    }
    if (ap < 1e-10 && ad < 1e-10) break;
  }
  return best;
}

inline TransportResult solve_interior_point(const TransportProblem& prob) {
  const auto& c = prob.cost.matrix.matrix();
  const auto& om = prob.omega.matrix();
  const auto rt = transpose_op(prob.rho.matrix());
  const int cap = std::min(prob.max_iters, kInteriorPointMaxIters);
  const auto sp = marginal_supports(prob.rho, prob.omega);

  TransportResult res;
  if (sp.full()) {
    auto out = run_interior_point(SdpInstance(c, om, rt), prob.tol, cap);
    res = make_result(prob, out.x, out.cert, out.iterations, std::move(out.trace));
  } else {
    const auto w = sp.isometry();
    SdpInstance reduced(herm(w.adjoint() * c * w), herm(sp.u1.adjoint() * om * sp.u1),
                        herm(sp.u2.adjoint() * rt * sp.u2));
    auto out = run_interior_point(reduced, prob.tol, cap);
    const double eps = 0.25 * prob.tol * std::max(1.0, std::abs(out.value));
    res = make_result(prob, herm(w * out.x * w.adjoint()),
                      lift_dual(c, sp, out.cert.y, eps, om, rt), out.iterations,
                      std::move(out.trace));
  }
  if (!res.converged) {
    throw NotConverged("solve_transport: interior point stalled after " +
                           std::to_string(res.iterations) + " iterations (gap " +
                           std::to_string(res.gap) + ")",
                       std::move(res));
  }
  return res;
}

// A marginal of rank one admits only the trivial coupling. On the supports
// the cost restricted to that coupling is itself a dual slack of zero.
inline std::optional<TransportResult> solve_rank_one_marginal(const TransportProblem& prob) {
  const auto sp = marginal_supports(prob.rho, prob.omega);
  if (sp.u1.cols() != 1 && sp.u2.cols() != 1) return std::nullopt;
  const auto& c = prob.cost.matrix.matrix();
  const auto& om = prob.omega.matrix();
  const auto rt = transpose_op(prob.rho.matrix());
  const auto plan = trivial_coupling(prob.rho, prob.omega).matrix();
  const double value = real_inner(plan, c);
  const auto w = sp.isometry();
  const auto c_red = herm(w.adjoint() * c * w);
  const std::size_t r1 = sp.u1.cols();
  const std::size_t r2 = sp.u2.cols();
  DualPair reduced = r1 == 1 ? DualPair{ComplexMatrix(1, 1), c_red}
                             : DualPair{c_red, ComplexMatrix(r2, r2)};
  const double eps = 0.5 * prob.tol * std::max(1.0, std::abs(value));
  auto cert = sp.full() ? certify(c, std::move(reduced), om, rt)
                        : lift_dual(c, sp, std::move(reduced), eps, om, rt);
  auto res = make_result(prob, plan, cert, 0, {value});
  // The feasible set is a single point, so optimality needs no certificate.
  // The lifted dual is reported as is: marginal mass below the support cutoff
  // costs it t m with t ~ 1/eps, which can exceed tol on its own.
  res.converged = res.primal_residual <= prob.tol;
  if (!res.converged) {
    throw NotConverged("solve_transport: trivial coupling misses the marginals by " +
                           std::to_string(res.primal_residual),
                       std::move(res));
  }
  return res;
}

//----------------------------------------------------------------------------
// ADMM
//----------------------------------------------------------------------------

// (A A*)^{-1} on the range of A, using A A*(Y1, Y2) = (d Y1 + tr(Y2) I,
// tr(Y1) I + d Y2). The kernel direction (cI, -cI) is fixed by tr Y1 = tr Y2.
inline DualPair solve_normal(const ComplexMatrix& r1, const ComplexMatrix& r2) {
  const std::size_t d = r1.rows();
  const double dd = static_cast<double>(d);
  const double t = 0.5 * (r1.trace().real() + r2.trace().real()) / (2.0 * dd);
  DualPair y{r1, r2};
  for (std::size_t i = 0; i < d; ++i) {
    y.y1(i, i) -= t;
    y.y2(i, i) -= t;
  }
  y.y1 *= 1.0 / dd;
  y.y2 *= 1.0 / dd;
  return y;
}

inline ComplexMatrix affine_project(const ComplexMatrix& v, const ComplexMatrix& omega,
                                    const ComplexMatrix& rho_t) {
  const std::size_t d = omega.rows();
  const auto y = solve_normal(partial_trace(v, {d, d}, Subsystem::Second) - omega,
                              partial_trace(v, {d, d}, Subsystem::First) - rho_t);
  return herm(v - constraint_adjoint(y.y1, y.y2));
}

inline ComplexMatrix psd_project(const ComplexMatrix& v) {
  auto eig = eigh(HermitianOperator::hermitian_part(v));
  for (double& x : eig.eigenvalues) x = std::max(0.0, x);
  return reconstruct(eig.eigenvectors, eig.eigenvalues);
}

// Operator Sinkhorn: alternate congruences by (K (x) I) and (I (x) L) until
// both marginals match. Congruences keep the iterate PSD.
inline std::optional<ComplexMatrix> sinkhorn_repair(const ComplexMatrix& z0,
                                                    const ComplexMatrix& omega,
                                                    const ComplexMatrix& rho_t, double target,
                                                    int max_rounds = 50) {
  const std::size_t d = omega.rows();
  const auto id = ComplexMatrix::identity(d);
  const auto omega_sqrt = psd_sqrt(HermitianOperator::hermitian_part(omega)).matrix();
  const auto rho_t_sqrt = psd_sqrt(HermitianOperator::hermitian_part(rho_t)).matrix();
  auto inv_sqrt = [](const ComplexMatrix& m) -> std::optional<ComplexMatrix> {
    const auto eig = eigh(HermitianOperator::hermitian_part(m));
    if (!(eig.eigenvalues.front() > 1e-300)) return std::nullopt;
    std::vector<double> s(eig.size());
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = 1.0 / std::sqrt(eig.eigenvalues[k]);
    return reconstruct(eig.eigenvectors, s);
  };
  ComplexMatrix z = z0;
  for (int round = 0; round < max_rounds; ++round) {
    if (marginal_infeasibility(z, omega, rho_t) <= target) return herm(z);
    const auto i1 = inv_sqrt(partial_trace(z, {d, d}, Subsystem::Second));
    if (!i1) return std::nullopt;
    const auto k = kron(omega_sqrt * *i1, id);
    z = k * z * k.adjoint();
    const auto i2 = inv_sqrt(partial_trace(z, {d, d}, Subsystem::First));
    if (!i2) return std::nullopt;
    const auto l = kron(id, rho_t_sqrt * *i2);
    z = l * z * l.adjoint();
  }
  return std::nullopt;
}

inline constexpr int kAdmmCheckpointEvery = 25;

// Scaled ADMM on C normalized to max entry 1:
//   X = P_aff(Z - U - C/beta),  Z = P_psd(X + U),  U += X - Z,
// with beta doubled or halved when the primal/dual residual ratio leaves
// [1/10, 10].
inline TransportResult solve_admm(const TransportProblem& prob) {
  const std::size_t d = prob.rho.dim();
  const auto& c = prob.cost.matrix.matrix();
  const double c_scale = std::max(1.0, c.max_abs());
  const auto cn = (1.0 / c_scale) * c;
  const auto& om = prob.omega.matrix();
  const auto rt = transpose_op(prob.rho.matrix());
  const auto t_plan = kron(om, rt);

  ComplexMatrix z = t_plan;
  ComplexMatrix u(d * d, d * d);
  double beta = 1.0;

  ComplexMatrix best_plan = t_plan;
  double best_value = real_inner(t_plan, c);
  Certificate best_cert;
  std::vector<double> trace;
  int it = 1;
  for (; it <= prob.max_iters; ++it) {
    const auto z_prev = z;
    const auto x = affine_project(z - u - (1.0 / beta) * cn, om, rt);
    z = psd_project(x + u);
    u += x - z;

    const double r_norm = (x - z).frobenius_norm();
    const double s_norm = beta * (z - z_prev).frobenius_norm();
    if (r_norm > 10.0 * s_norm) {
      beta *= 2.0;
      u *= 0.5;
    } else if (s_norm > 10.0 * r_norm) {
      beta *= 0.5;
      u *= 2.0;
    }
    if (it % kAdmmCheckpointEvery != 0 && it != prob.max_iters) continue;

    if (auto plan = sinkhorn_repair(z, om, rt, 0.1 * prob.tol)) {
      const double v = real_inner(*plan, c);
      if (v < best_value) {
        best_value = v;
        best_plan = std::move(*plan);
      }
    }
    // Z solves min <C/beta + ... >; its multiplier is S = -beta U, so C - S
    // lies near the range of A*.
    const auto v = cn + beta * u;
    auto y = solve_normal(partial_trace(v, {d, d}, Subsystem::Second),
                          partial_trace(v, {d, d}, Subsystem::First));
    y.y1 *= c_scale;
    y.y2 *= c_scale;
    auto cert = certify(c, std::move(y), om, rt);
    if (cert.value > best_cert.value) best_cert = std::move(cert);
    trace.push_back(best_value);

    if (best_value - best_cert.value <= 0.5 * prob.tol * std::max(1.0, std::abs(best_value)) &&
        best_cert.infeasibility <= prob.tol) {
      break;
    }
  }
  auto res = make_result(prob, best_plan, best_cert, std::min(it, prob.max_iters), std::move(trace));
  if (res.converged) return res;
  throw NotConverged("solve_transport: ADMM reached " + std::to_string(prob.max_iters) +
                         " iterations (gap " + std::to_string(res.gap) + ")",
                     std::move(res));
}

}  // namespace detail

inline TransportResult solve_transport(const TransportProblem& prob) {
  const std::size_t d = prob.rho.dim();
  if (d == 0) throw InvalidProblem("solve_transport: empty state");
  if (prob.omega.dim() != d) throw InvalidProblem("solve_transport: marginal dimensions differ");
  if (prob.cost.dim != d * d || prob.cost.matrix.dim() != d * d) {
    throw InvalidProblem("solve_transport: cost operator dimension " +
                         std::to_string(prob.cost.matrix.dim()) + " is not " +
                         std::to_string(d * d));
  }
  if (!(prob.tol > 0.0)) throw InvalidProblem("solve_transport: tol must be > 0");
  if (prob.max_iters <= 0) throw InvalidProblem("solve_transport: max_iters must be > 0");

  if (auto res = detail::solve_rank_one_marginal(prob)) return std::move(*res);
  if (prob.method == SolverMethod::Admm) return detail::solve_admm(prob);
  return detail::solve_interior_point(prob);
}

inline TransportResult solve_transport(const State& rho, const State& omega,
                                       const CostOperator& cost, double tol = kDefaultSolverTol,
                                       int max_iters = kDefaultMaxIters,
                                       SolverMethod method = SolverMethod::InteriorPoint) {
  return solve_transport(TransportProblem{rho, omega, cost, tol, max_iters, method});
}

//----------------------------------------------------------------------------
// KKT verification
//----------------------------------------------------------------------------

struct KktReport {
  double primal_feasibility = 0.0;  // marginal error or plan negativity
  double dual_feasibility = 0.0;    // max(0, -lambda_min(C - A*(y)))
  double complementarity = 0.0;     // |tr[plan (C - A*(y))]|
  double gap = 0.0;                 // recomputed value - dual value
  double threshold = 0.0;           // 10 tol
  double noise_floor = 0.0;         // rounding level of the dual checks
  bool ok = false;
  std::vector<std::string> violations;
};

// Dual pairs for rank-deficient marginals carry -t (I - P) terms with t up to
// ||C||^2 / tol, so the dual checks are judged against threshold plus the
// rounding level of an eigenvalue or inner product at that magnitude.
inline KktReport verify_kkt(const TransportResult& result, const TransportProblem& prob) {
  const auto& c = prob.cost.matrix.matrix();
  const auto& plan = result.plan.matrix();
  const auto& om = prob.omega.matrix();
  const auto rt = transpose_op(prob.rho.matrix());
  const auto& y1 = result.dual_y1.matrix();
  const auto& y2 = result.dual_y2.matrix();
  KktReport rep;
  rep.threshold = 10.0 * prob.tol;
  rep.primal_feasibility = std::max(detail::marginal_infeasibility(plan, om, rt),
                                    std::max(0.0, -detail::lambda_min(plan)));
  const auto slack = c - detail::constraint_adjoint(y1, y2);
  rep.noise_floor = 64.0 * std::numeric_limits<double>::epsilon() *
                    (slack.frobenius_norm() + c.frobenius_norm());
  rep.dual_feasibility = std::max(0.0, -detail::lambda_min(slack));
  rep.complementarity = std::abs(detail::real_inner(plan, slack));
  const double value = detail::real_inner(plan, c);
  rep.gap = value - (detail::real_inner(om, y1) + detail::real_inner(rt, y2));
  const double scale = std::max(1.0, std::abs(value));
  const double limit = rep.threshold * scale + rep.noise_floor;
  if (rep.primal_feasibility > rep.threshold) rep.violations.push_back("primal_feasibility");
  if (rep.dual_feasibility > rep.threshold + rep.noise_floor) {
    rep.violations.push_back("dual_feasibility");
  }
  if (rep.complementarity > limit) rep.violations.push_back("complementarity");
  if (std::abs(rep.gap) > limit) rep.violations.push_back("gap");
  rep.ok = rep.violations.empty();
  return rep;
}

}  // namespace qwot
