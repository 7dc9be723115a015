#pragma once

// States, observable collections, couplings on H (x) H*, channels, the
// coupling <-> channel correspondence and Bloch vectors.

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qwot/errors.hpp"
#include "qwot/linalg.hpp"

namespace qwot {

//----------------------------------------------------------------------------
// State
//----------------------------------------------------------------------------

inline constexpr double kSqrtCutoff = 64.0 * std::numeric_limits<double>::epsilon();

class State {
 public:
  State() = default;

  // Accepts eigenvalues >= -tol and |tr - 1| <= tol; negative eigenvalues are
  // clipped and the result renormalized to trace exactly 1.
  explicit State(const HermitianOperator& rho, double tol = 1e-10) {
    auto eig = eigh(rho);
    if (eig.eigenvalues.front() < -tol) {
      throw DomainError("State: negative eigenvalue " + std::to_string(eig.eigenvalues.front()));
    }
    double tr = 0.0;
    for (double x : eig.eigenvalues) tr += x;
    if (std::abs(tr - 1.0) > tol) {
      throw DomainError("State: trace " + std::to_string(tr) + " differs from 1");
    }
    bool clipped = false;
    for (double& x : eig.eigenvalues) {
      if (x < 0.0) {
        x = 0.0;
        clipped = true;
      }
    }
    double clipped_tr = 0.0;
    for (double x : eig.eigenvalues) clipped_tr += x;
    if (clipped || clipped_tr != 1.0) {
      for (double& x : eig.eigenvalues) x /= clipped_tr;
      rho_ = HermitianOperator::hermitian_part(reconstruct(eig.eigenvectors, eig.eigenvalues));
    } else {
      rho_ = rho;
    }
    eigenvalues_ = std::move(eig.eigenvalues);
    eigenvectors_ = std::move(eig.eigenvectors);
  }

  explicit State(const ComplexMatrix& m, double tol = 1e-10) : State(HermitianOperator(m), tol) {}

  // Hermitianizes first; for data rounded to a few decimals.
  static State from_rounded(const ComplexMatrix& m, double tol = 1e-10) {
    const auto h = HermitianOperator::hermitian_part(m);
    const double tr = h.matrix().trace().real();
    if (!(tr > 0.0)) throw DomainError("State::from_rounded: non-positive trace");
    return State(HermitianOperator::hermitian_part((1.0 / tr) * h.matrix()), tol);
  }

  std::size_t dim() const { return rho_.dim(); }
  const HermitianOperator& op() const { return rho_; }
  const ComplexMatrix& matrix() const { return rho_.matrix(); }
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  const ComplexMatrix& eigenvectors() const { return eigenvectors_; }

  HermitianOperator sqrt() const {
    std::vector<double> s(eigenvalues_.size());
    // Eigenvalues at rounding level are zero; their square roots would not be.
    for (std::size_t k = 0; k < s.size(); ++k) {
      s[k] = eigenvalues_[k] > kSqrtCutoff ? std::sqrt(eigenvalues_[k]) : 0.0;
    }
    return HermitianOperator::hermitian_part(reconstruct(eigenvectors_, s));
  }

  double purity() const { return trace_of_product(matrix(), matrix()).real(); }

  State transpose() const {
    return State(HermitianOperator::hermitian_part(transpose_op(matrix())), 1e-8);
  }

 private:
  HermitianOperator rho_;
  std::vector<double> eigenvalues_;
  ComplexMatrix eigenvectors_;
};

inline bool is_pure(const State& rho, double tol = 1e-9) { return rho.purity() >= 1.0 - tol; }

// tr[(X^{1/2} Y)^2] for a state X and Hermitian Y.
inline double sqrt_product_trace(const State& x, const HermitianOperator& y) {
  const auto s = x.sqrt().matrix() * y.matrix();
  return trace_of_product(s, s).real();
}

//----------------------------------------------------------------------------
// ObservableCollection
//----------------------------------------------------------------------------

class ObservableCollection {
 public:
  ObservableCollection() = default;

  explicit ObservableCollection(std::vector<HermitianOperator> obs) : obs_(std::move(obs)) {
    if (obs_.empty()) throw InvalidProblem("ObservableCollection: needs at least one observable");
    for (const auto& a : obs_) {
      if (a.dim() != obs_.front().dim()) {
        throw ShapeError("ObservableCollection: observables have different dimensions");
      }
    }
  }

  std::size_t dim() const { return obs_.front().dim(); }
  std::size_t size() const { return obs_.size(); }
  const HermitianOperator& operator[](std::size_t k) const { return obs_.at(k); }
  const std::vector<HermitianOperator>& observables() const { return obs_; }
  auto begin() const { return obs_.begin(); }
  auto end() const { return obs_.end(); }

 private:
  std::vector<HermitianOperator> obs_;
};

//----------------------------------------------------------------------------
// Coupling
//----------------------------------------------------------------------------

// State on H (x) H* with tr_{H*} pi = omega and tr_H pi = rho^T.
class Coupling {
 public:
  Coupling() = default;

  Coupling(State pi, State omega, State rho, double tol = 1e-8)
      : pi_(std::move(pi)), omega_(std::move(omega)), rho_(std::move(rho)) {
    const std::size_t d = rho_.dim();
    if (omega_.dim() != d) throw ShapeError("Coupling: marginal dimensions differ");
    if (pi_.dim() != d * d) {
      throw InvalidCoupling("Coupling: plan dimension " + std::to_string(pi_.dim()) +
                            " is not " + std::to_string(d * d));
    }
    const double e_omega = marginal_error_omega();
    const double e_rho = marginal_error_rho();
    if (e_omega > tol || e_rho > tol) {
      throw InvalidCoupling("Coupling: marginal mismatch (omega " + std::to_string(e_omega) +
                            ", rho^T " + std::to_string(e_rho) + ")");
    }
  }

  std::size_t dim() const { return rho_.dim(); }
  const State& pi() const { return pi_; }
  const ComplexMatrix& matrix() const { return pi_.matrix(); }
  const State& marginal_omega() const { return omega_; }
  const State& marginal_rho() const { return rho_; }

  double marginal_error_omega() const {
    const std::size_t d = dim();
    return max_abs_diff(partial_trace(pi_.matrix(), {d, d}, Subsystem::Second), omega_.matrix());
  }
  double marginal_error_rho() const {
    const std::size_t d = dim();
    return max_abs_diff(partial_trace(pi_.matrix(), {d, d}, Subsystem::First),
                        transpose_op(rho_.matrix()));
  }

 private:
  State pi_;
  State omega_;
  State rho_;
};

// omega (x) rho^T.
inline Coupling trivial_coupling(const State& rho, const State& omega) {
  if (rho.dim() != omega.dim()) throw ShapeError("trivial_coupling: dimension mismatch");
  const auto pi = kron(omega.matrix(), transpose_op(rho.matrix()));
  return Coupling(State(HermitianOperator::hermitian_part(pi), 1e-9), omega, rho);
}

//----------------------------------------------------------------------------
// Channel
//----------------------------------------------------------------------------

class Channel {
 public:
  Channel() = default;

  Channel(std::size_t dim_in, std::size_t dim_out, std::vector<ComplexMatrix> kraus,
          double tol = 1e-10)
      : dim_in_(dim_in), dim_out_(dim_out), kraus_(std::move(kraus)) {
    if (kraus_.empty()) throw InvalidChannel("Channel: no Kraus operators");
    for (const auto& k : kraus_) {
      if (k.rows() != dim_out_ || k.cols() != dim_in_) {
        throw InvalidChannel("Channel: Kraus operator has shape " + std::to_string(k.rows()) +
                             "x" + std::to_string(k.cols()));
      }
    }
    const double err = max_abs_diff(kraus_sum(), ComplexMatrix::identity(dim_in_));
    if (err > tol) {
      throw InvalidChannel("Channel: not trace preserving (error " + std::to_string(err) + ")");
    }
  }

  static Channel identity(std::size_t d) { return Channel(d, d, {ComplexMatrix::identity(d)}); }

  // X -> omega tr[X].
  static Channel replacement(std::size_t dim_in, const State& omega) {
    std::vector<ComplexMatrix> ks;
    const auto& w = omega.eigenvalues();
    const auto& v = omega.eigenvectors();
    const std::size_t d_out = omega.dim();
    for (std::size_t a = 0; a < w.size(); ++a) {
      if (w[a] <= 0.0) continue;
      for (std::size_t b = 0; b < dim_in; ++b) {
        ComplexMatrix k(d_out, dim_in);
        for (std::size_t i = 0; i < d_out; ++i) k(i, b) = std::sqrt(w[a]) * v(i, a);
        ks.push_back(std::move(k));
      }
    }
    return Channel(dim_in, d_out, std::move(ks));
  }

  std::size_t dim_in() const { return dim_in_; }
  std::size_t dim_out() const { return dim_out_; }
  const std::vector<ComplexMatrix>& kraus() const { return kraus_; }

  ComplexMatrix apply(const ComplexMatrix& x) const {
    ComplexMatrix out(dim_out_, dim_out_);
    for (const auto& k : kraus_) out += k * x * k.adjoint();
    return out;
  }

  ComplexMatrix adjoint_apply(const ComplexMatrix& a) const {
    ComplexMatrix out(dim_in_, dim_in_);
    for (const auto& k : kraus_) out += k.adjoint() * a * k;
    return out;
  }

  // J = sum_ij Phi(|i><j|) (x) |i><j|.
  ComplexMatrix choi() const {
    const std::size_t n = dim_out_ * dim_in_;
    ComplexMatrix j(n, n);
    for (const auto& k : kraus_) j += outer(vectorize(k));
    return j;
  }

 private:
  ComplexMatrix kraus_sum() const {
    ComplexMatrix s(dim_in_, dim_in_);
    for (const auto& k : kraus_) s += k.adjoint() * k;
    return s;
  }

  std::size_t dim_in_ = 0;
  std::size_t dim_out_ = 0;
  std::vector<ComplexMatrix> kraus_;
};

inline HermitianOperator channel_adjoint_apply(const Channel& phi, const HermitianOperator& a) {
  if (a.dim() != phi.dim_out()) throw ShapeError("channel_adjoint_apply: dimension mismatch");
  return HermitianOperator::hermitian_part(phi.adjoint_apply(a.matrix()));
}

inline HermitianOperator channel_apply(const Channel& phi, const HermitianOperator& x) {
  if (x.dim() != phi.dim_in()) throw ShapeError("channel_apply: dimension mismatch");
  return HermitianOperator::hermitian_part(phi.apply(x.matrix()));
}

// Pi = (Phi (x) id) |Omega><Omega| with |Omega> = vec(rho^{1/2}) (row-major).
// Since (K (x) I) vec(M) = vec(K M), Pi = sum_a vec(K_a M) vec(K_a M)^dagger.
inline Coupling channel_to_coupling(const Channel& phi, const State& rho, double tol = 1e-8) {
  if (phi.dim_in() != rho.dim() || phi.dim_out() != rho.dim()) {
    throw InvalidChannel("channel_to_coupling: channel dimensions do not match the state");
  }
  const auto m = rho.sqrt().matrix();
  const std::size_t d = rho.dim();
  ComplexMatrix pi(d * d, d * d);
  for (const auto& k : phi.kraus()) pi += outer(vectorize(k * m));
  const auto omega = State(HermitianOperator::hermitian_part(phi.apply(rho.matrix())), 1e-8);
  return Coupling(State(HermitianOperator::hermitian_part(pi), 1e-8), omega, rho, tol);
}

namespace detail {

// M^+ for M = rho^{1/2}, singular values of M below cutoff treated as zero.
// Also returns an orthonormal basis of the kernel (columns).
inline std::pair<ComplexMatrix, std::vector<ComplexMatrix>> sqrt_pinv_and_kernel(
    const State& rho, double cutoff) {
  const auto& w = rho.eigenvalues();
  const auto& v = rho.eigenvectors();
  const std::size_t d = rho.dim();
  std::vector<double> inv(d, 0.0);
  std::vector<ComplexMatrix> kernel;
  for (std::size_t k = 0; k < d; ++k) {
    const double s = std::sqrt(std::max(0.0, w[k]));
    if (s > cutoff) {
      inv[k] = 1.0 / s;
    } else {
      ComplexMatrix col(d, 1);
      for (std::size_t i = 0; i < d; ++i) col(i, 0) = v(i, k);
      kernel.push_back(std::move(col));
    }
  }
  return {reconstruct(v, inv), std::move(kernel)};
}

}  // namespace detail

// Inverse of channel_to_coupling. On the support of rho the Choi matrix is
// J = (I (x) conj(M^+)) Pi (I (x) conj(M^+)); on ker(rho) the channel is
// completed by X -> omega tr[Q X] with Q the kernel projector.
inline Channel coupling_to_channel(const Coupling& c, double sv_cutoff = 1e-10) {
  const std::size_t d = c.dim();
  if (c.marginal_error_omega() > 1e-8 || c.marginal_error_rho() > 1e-8) {
    throw InvalidCoupling("coupling_to_channel: coupling marginals violated");
  }
  const auto& rho = c.marginal_rho();
  const auto& omega = c.marginal_omega();
  auto [mp, kernel] = detail::sqrt_pinv_and_kernel(rho, sv_cutoff);
  const auto side = kron(ComplexMatrix::identity(d), mp.conjugate());
  const auto j = side * c.matrix() * side;
  const auto eig = eigh(HermitianOperator::hermitian_part(j));
  const double jmax = std::max(1.0, eig.operator_norm());

  std::vector<ComplexMatrix> ks;
  for (std::size_t a = 0; a < eig.size(); ++a) {
    const double lam = eig.eigenvalues[a];
    if (lam <= 1e-13 * jmax) continue;
    ComplexMatrix col(d * d, 1);
    for (std::size_t i = 0; i < d * d; ++i) col(i, 0) = std::sqrt(lam) * eig.eigenvectors(i, a);
    ks.push_back(unvectorize(col, d, d));
  }
  const auto& w = omega.eigenvalues();
  const auto& wv = omega.eigenvectors();
  for (const auto& q : kernel) {
    for (std::size_t a = 0; a < d; ++a) {
      if (w[a] <= 0.0) continue;
      ComplexMatrix k(d, d);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t l = 0; l < d; ++l) k(i, l) = std::sqrt(w[a]) * wv(i, a) * std::conj(q(l, 0));
      ks.push_back(std::move(k));
    }
  }
  if (ks.empty()) throw InvalidCoupling("coupling_to_channel: empty Choi matrix");

  // Remove round-off in sum K^dagger K by the polar correction K <- K S^{-1/2}.
  ComplexMatrix s(d, d);
  for (const auto& k : ks) s += k.adjoint() * k;
  const double tp_err = max_abs_diff(s, ComplexMatrix::identity(d));
  if (tp_err > 1e-6) {
    throw InvalidCoupling("coupling_to_channel: recovered map is not trace preserving (error " +
                          std::to_string(tp_err) + ")");
  }
  const auto s_inv_sqrt = apply_scalar_function(HermitianOperator::hermitian_part(s),
                                                [](double x) { return 1.0 / std::sqrt(x); });
  for (auto& k : ks) k = k * s_inv_sqrt.matrix();
  return Channel(d, d, std::move(ks));
}

//----------------------------------------------------------------------------
// Bloch vectors
//----------------------------------------------------------------------------

struct BlochVector {
  std::vector<double> coords;

  double distance(const BlochVector& o) const {
    double s = 0.0;
    for (std::size_t k = 0; k < coords.size(); ++k) s += std::pow(coords[k] - o.coords.at(k), 2);
    return std::sqrt(s);
  }
  double norm() const {
    double s = 0.0;
    for (double x : coords) s += x * x;
    return std::sqrt(s);
  }
};

inline BlochVector bloch_vector(const State& rho, const ObservableCollection& a) {
  if (rho.dim() != a.dim()) throw ShapeError("bloch_vector: dimension mismatch");
  BlochVector b;
  for (const auto& obs : a) b.coords.push_back(trace_of_product(rho.matrix(), obs.matrix()).real());
  return b;
}

//----------------------------------------------------------------------------
// Pauli matrices and seeded samplers
//----------------------------------------------------------------------------

inline HermitianOperator pauli_x() { return HermitianOperator(ComplexMatrix{{0, 1}, {1, 0}}); }
inline HermitianOperator pauli_y() {
  return HermitianOperator(ComplexMatrix{{0, cplx{0, -1}}, {cplx{0, 1}, 0}});
}
inline HermitianOperator pauli_z() { return HermitianOperator(ComplexMatrix{{1, 0}, {0, -1}}); }
inline ObservableCollection pauli_collection() {
  return ObservableCollection({pauli_x(), pauli_y(), pauli_z()});
}

// Qubit state (I + b.sigma)/2.
inline State qubit_state(double bx, double by, double bz) {
  const auto m = 0.5 * (ComplexMatrix::identity(2) + bx * pauli_x().matrix() +
                        by * pauli_y().matrix() + bz * pauli_z().matrix());
  return State(HermitianOperator::hermitian_part(m));
}

inline State basis_state(std::size_t dim, std::size_t index) {
  ComplexMatrix m(dim, dim);
  m(index, index) = 1.0;
  return State(m);
}

inline State maximally_mixed(std::size_t dim) {
  return State((1.0 / static_cast<double>(dim)) * ComplexMatrix::identity(dim));
}

namespace detail {

inline ComplexMatrix gaussian_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  ComplexMatrix g(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double re = n01(rng);
      const double im = n01(rng);
      g(i, j) = cplx{re, im};
    }
  return g;
}

}  // namespace detail

// G G^dagger / tr with G a dim x rank complex Ginibre matrix.
inline State random_state(std::size_t dim, std::size_t rank, std::uint64_t seed) {
  if (dim == 0 || rank < 1 || rank > dim) {
    throw DomainError("random_state: rank " + std::to_string(rank) + " outside [1, " +
                      std::to_string(dim) + "]");
  }
  std::mt19937_64 rng(seed);
  const auto g = detail::gaussian_matrix(dim, rank, rng);
  const auto m = g * g.adjoint();
  return State(HermitianOperator::hermitian_part((1.0 / m.trace().real()) * m));
}

inline State random_pure_state(std::size_t dim, std::uint64_t seed) {
  return random_state(dim, 1, seed);
}

inline HermitianOperator random_observable(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return HermitianOperator::hermitian_part(detail::gaussian_matrix(dim, dim, rng));
}

// Haar-distributed unitary from Gram-Schmidt on a Ginibre matrix.
inline ComplexMatrix random_unitary(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto g = detail::gaussian_matrix(dim, dim, rng);
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      cplx dot{};
      for (std::size_t i = 0; i < dim; ++i) dot += std::conj(g(i, k)) * g(i, j);
      for (std::size_t i = 0; i < dim; ++i) g(i, j) -= dot * g(i, k);
    }
    double nrm = 0.0;
    for (std::size_t i = 0; i < dim; ++i) nrm += std::norm(g(i, j));
    nrm = std::sqrt(nrm);
    for (std::size_t i = 0; i < dim; ++i) g(i, j) /= nrm;
  }
  return g;
}

// Random CPTP map with n_kraus Kraus operators, normalized by K <- K S^{-1/2}.
inline Channel random_channel(std::size_t dim_in, std::size_t dim_out, std::size_t n_kraus,
                              std::uint64_t seed) {
  if (n_kraus == 0) throw DomainError("random_channel: need at least one Kraus operator");
  std::mt19937_64 rng(seed);
  std::vector<ComplexMatrix> ks;
  ComplexMatrix s(dim_in, dim_in);
  for (std::size_t a = 0; a < n_kraus; ++a) {
    ks.push_back(detail::gaussian_matrix(dim_out, dim_in, rng));
    s += ks.back().adjoint() * ks.back();
  }
  const auto s_inv_sqrt = apply_scalar_function(HermitianOperator::hermitian_part(s),
                                                [](double x) { return 1.0 / std::sqrt(x); });
  for (auto& k : ks) k = k * s_inv_sqrt.matrix();
  return Channel(dim_in, dim_out, std::move(ks));
}

}  // namespace qwot
