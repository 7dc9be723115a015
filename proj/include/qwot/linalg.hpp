#pragma once

// Dense complex linear algebra: matrices, Hermitian eigendecomposition by
// cyclic Jacobi, real functional calculus, Kronecker products and partial
// traces.
//
// Dual-space convention: the computational basis of H is identified with its
// dual basis, so the transpose A^T of an operator is the entrywise matrix
// transpose (no conjugation). Operators on H (x) H* are stored with the H
// index as the slow (row-block) index.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qwot/errors.hpp"

namespace qwot {

using cplx = std::complex<double>;

inline constexpr std::size_t kDefaultMaxTotalDim = 4096;

//----------------------------------------------------------------------------
// ComplexMatrix
//----------------------------------------------------------------------------

class ComplexMatrix {
 public:
  ComplexMatrix() = default;

  ComplexMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, cplx{0.0, 0.0}) {}

  ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
      : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("ComplexMatrix: entry count " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
    for (const auto& z : data_) {
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
        throw DomainError("ComplexMatrix: non-finite entry");
      }
    }
  }

  // Row-wise literal, e.g. {{1, 0}, {0, -1}}.
  ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("ComplexMatrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static ComplexMatrix identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static ComplexMatrix diagonal(std::span<const double> d) {
    ComplexMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool is_square() const { return rows_ == cols_; }

  cplx& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

  ComplexMatrix& operator+=(const ComplexMatrix& o) {
    require_same_shape(o, "+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  ComplexMatrix& operator-=(const ComplexMatrix& o) {
    require_same_shape(o, "-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  ComplexMatrix& operator*=(cplx s) {
    for (auto& z : data_) z *= s;
    return *this;
  }

  friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
  friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
  friend ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }
  friend ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }
  friend ComplexMatrix operator*(ComplexMatrix a, double s) { return a *= cplx{s, 0.0}; }
  friend ComplexMatrix operator*(double s, ComplexMatrix a) { return a *= cplx{s, 0.0}; }

  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols_ != b.rows_) {
      throw ShapeError("ComplexMatrix product: inner dimensions " + std::to_string(a.cols_) +
                       " and " + std::to_string(b.rows_) + " differ");
    }
    ComplexMatrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      cplx* crow = &c.data_[i * c.cols_];
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const cplx aik = a.data_[i * a.cols_ + k];
        if (aik == cplx{}) continue;
        const cplx* brow = &b.data_[k * b.cols_];
        for (std::size_t j = 0; j < b.cols_; ++j) crow[j] += aik * brow[j];
      }
    }
    return c;
  }

  ComplexMatrix adjoint() const {
    ComplexMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = std::conj((*this)(i, j));
    return t;
  }

  ComplexMatrix conjugate() const {
    ComplexMatrix t = *this;
    for (auto& z : t.data_) z = std::conj(z);
    return t;
  }

  cplx trace() const {
    cplx s{};
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) s += (*this)(i, i);
    return s;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& z : data_) m = std::max(m, std::abs(z));
    return m;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (const auto& z : data_) s += std::norm(z);
    return std::sqrt(s);
  }

 private:
  void require_same_shape(const ComplexMatrix& o, const char* op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) {
      throw ShapeError(std::string("ComplexMatrix ") + op + ": shape mismatch");
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  return (a - b).max_abs();
}

// Frobenius inner product <A, B> = tr[A^dagger B].
inline cplx hs_inner(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("hs_inner: shape mismatch");
  cplx s{};
  auto da = a.data();
  auto db = b.data();
  for (std::size_t k = 0; k < da.size(); ++k) s += std::conj(da[k]) * db[k];
  return s;
}

// tr[A B] without forming the product.
inline cplx trace_of_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows() || a.rows() != b.cols()) throw ShapeError("trace_of_product: shape mismatch");
  cplx s{};
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, i);
  return s;
}

//----------------------------------------------------------------------------
// HermitianOperator
//----------------------------------------------------------------------------

class HermitianOperator {
 public:
  HermitianOperator() = default;

  // Validates ||M - M^dagger||_max <= tol * max(1, ||M||_max), then stores (M + M^dagger)/2.
  explicit HermitianOperator(const ComplexMatrix& m, double tol = 1e-12) {
    if (!m.is_square()) throw ShapeError("HermitianOperator: matrix is not square");
    if (m.rows() == 0) throw ShapeError("HermitianOperator: empty matrix");
    const double asym = max_abs_diff(m, m.adjoint());
    if (asym > tol * std::max(1.0, m.max_abs())) {
      throw DomainError("HermitianOperator: matrix is not Hermitian (asymmetry " +
                        std::to_string(asym) + ")");
    }
    matrix_ = symmetrize(m);
  }

  // Hermitian part (M + M^dagger)/2 of an arbitrary square matrix, no check.
  static HermitianOperator hermitian_part(const ComplexMatrix& m) {
    if (!m.is_square()) throw ShapeError("hermitian_part: matrix is not square");
    HermitianOperator h;
    h.matrix_ = symmetrize(m);
    return h;
  }

  static HermitianOperator identity(std::size_t n) {
    return hermitian_part(ComplexMatrix::identity(n));
  }

  static HermitianOperator diagonal(std::span<const double> d) {
    return hermitian_part(ComplexMatrix::diagonal(d));
  }

  std::size_t dim() const { return matrix_.rows(); }
  const ComplexMatrix& matrix() const { return matrix_; }
  operator const ComplexMatrix&() const { return matrix_; }  // NOLINT

  friend HermitianOperator operator+(const HermitianOperator& a, const HermitianOperator& b) {
    return hermitian_part(a.matrix_ + b.matrix_);
  }
  friend HermitianOperator operator-(const HermitianOperator& a, const HermitianOperator& b) {
    return hermitian_part(a.matrix_ - b.matrix_);
  }
  friend HermitianOperator operator*(double s, const HermitianOperator& a) {
    return hermitian_part(s * a.matrix_);
  }

 private:
  static ComplexMatrix symmetrize(const ComplexMatrix& m) {
    ComplexMatrix h(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      h(i, i) = cplx{m(i, i).real(), 0.0};
      for (std::size_t j = i + 1; j < m.cols(); ++j) {
        const cplx v = 0.5 * (m(i, j) + std::conj(m(j, i)));
        h(i, j) = v;
        h(j, i) = std::conj(v);
      }
    }
    return h;
  }

  ComplexMatrix matrix_;
};

//----------------------------------------------------------------------------
// Eigendecomposition (cyclic complex Jacobi)
//----------------------------------------------------------------------------

struct EigenDecomposition {
  std::vector<double> eigenvalues;                     // ascending
  ComplexMatrix eigenvectors;                          // columns orthonormal
  std::vector<std::vector<std::size_t>> multiplicity_groups;

  std::size_t size() const { return eigenvalues.size(); }

  // Eigenvalues with every multiplicity group replaced by its mean.
  std::vector<double> clustered_eigenvalues() const {
    std::vector<double> out(eigenvalues.size());
    for (const auto& g : multiplicity_groups) {
      double mean = 0.0;
      for (auto i : g) mean += eigenvalues[i];
      mean /= static_cast<double>(g.size());
      for (auto i : g) out[i] = mean;
    }
    return out;
  }

  // Distinct (clustered) eigenvalues, ascending.
  std::vector<double> distinct_eigenvalues() const {
    std::vector<double> out;
    const auto c = clustered_eigenvalues();
    for (const auto& g : multiplicity_groups) out.push_back(c[g.front()]);
    return out;
  }

  // Spectral projection onto the g-th multiplicity group.
  ComplexMatrix group_projector(std::size_t g) const {
    const std::size_t n = eigenvectors.rows();
    ComplexMatrix p(n, n);
    for (auto k : multiplicity_groups.at(g))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          p(i, j) += eigenvectors(i, k) * std::conj(eigenvectors(j, k));
    return p;
  }

  double operator_norm() const {
    if (eigenvalues.empty()) return 0.0;
    return std::max(std::abs(eigenvalues.front()), std::abs(eigenvalues.back()));
  }
};

inline constexpr int kJacobiMaxSweeps = 100;

inline double default_cluster_tol(double op_norm) { return 1e-8 * std::max(1.0, op_norm); }

namespace detail {

// Partition sorted eigenvalues into runs whose adjacent gaps are <= tol.
inline std::vector<std::vector<std::size_t>> cluster_sorted(const std::vector<double>& ev,
                                                            double tol) {
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (groups.empty() || ev[i] - ev[groups.back().back()] > tol) {
      groups.push_back({i});
    } else {
      groups.back().push_back(i);
    }
  }
  // Single-linkage can chain; enforce the group width bound by splitting.
  std::vector<std::vector<std::size_t>> out;
  for (auto& g : groups) {
    std::vector<std::size_t> cur;
    for (auto i : g) {
      if (!cur.empty() && ev[i] - ev[cur.front()] > tol) {
        out.push_back(std::move(cur));
        cur.clear();
      }
      cur.push_back(i);
    }
    out.push_back(std::move(cur));
  }
  return out;
}

}  // namespace detail

// Eigendecomposition of a Hermitian operator. cluster_tol defaults to
// 1e-8 * max(1, ||A||_op).
inline EigenDecomposition eigh(const HermitianOperator& op,
                               std::optional<double> cluster_tol = std::nullopt) {
  const std::size_t n = op.dim();
  if (cluster_tol && !(*cluster_tol > 0.0)) throw DomainError("eigh: cluster_tol must be > 0");

  ComplexMatrix a = op.matrix();
  ComplexMatrix v = ComplexMatrix::identity(n);
  const double fro = a.frobenius_norm();
  const double threshold = 1e-13 * fro;

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += std::norm(a(i, j));
    return std::sqrt(s);
  };

  int sweep = 0;
  while (off_norm() > threshold) {
    if (++sweep > kJacobiMaxSweeps) {
      throw NumericalFailure("eigh: Jacobi iteration did not converge in " +
                             std::to_string(kJacobiMaxSweeps) + " sweeps");
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const cplx apq = a(p, q);
        const double g = std::abs(apq);
        if (g == 0.0 || g < 1e-300) continue;
        const cplx e = apq / g;
        const double tau = (a(q, q).real() - a(p, p).real()) / (2.0 * g);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const cplx se = s * e;               // R(p,q)
        const cplx mse_c = -s * std::conj(e);  // R(q,p)
        // A <- A R
        for (std::size_t k = 0; k < n; ++k) {
          const cplx akp = a(k, p);
          const cplx akq = a(k, q);
          a(k, p) = akp * c + akq * mse_c;
          a(k, q) = akp * se + akq * c;
        }
        // A <- R^dagger A
        for (std::size_t k = 0; k < n; ++k) {
          const cplx apk = a(p, k);
          const cplx aqk = a(q, k);
          a(p, k) = c * apk + std::conj(mse_c) * aqk;
          a(q, k) = std::conj(se) * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        // V <- V R
        for (std::size_t k = 0; k < n; ++k) {
          const cplx vkp = v(k, p);
          const cplx vkq = v(k, q);
          v(k, p) = vkp * c + vkq * mse_c;
          v(k, q) = vkp * se + vkq * c;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x).real() < a(y, y).real(); });

  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = ComplexMatrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues[k] = a(order[k], order[k]).real();
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = v(i, order[k]);
  }
  const double tol = cluster_tol.value_or(default_cluster_tol(out.operator_norm()));
  out.multiplicity_groups = detail::cluster_sorted(out.eigenvalues, tol);
  return out;
}

// V diag(values) V^dagger.
inline ComplexMatrix reconstruct(const ComplexMatrix& vecs, std::span<const double> values) {
  const std::size_t n = vecs.rows();
  const std::size_t m = values.size();
  ComplexMatrix out(n, n);
  for (std::size_t k = 0; k < m; ++k) {
    if (values[k] == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const cplx vik = vecs(i, k) * values[k];
      for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * std::conj(vecs(j, k));
    }
  }
  return out;
}

inline double operator_norm(const HermitianOperator& a) { return eigh(a).operator_norm(); }

inline double min_eigenvalue(const HermitianOperator& a) { return eigh(a).eigenvalues.front(); }

//----------------------------------------------------------------------------
// Functional calculus
//----------------------------------------------------------------------------

// f(A) = V diag(f(lambda)) V^dagger. With snap_clusters the eigenvalues of each
// multiplicity group are replaced by their mean before f is applied, which
// keeps f exact on numerically split degenerate eigenvalues (needed for
// non-smooth f such as |x|^p with p < 1).
inline HermitianOperator apply_scalar_function(const HermitianOperator& a,
                                               const std::function<double(double)>& f,
                                               bool snap_clusters = false) {
  const auto eig = eigh(a);
  const auto lambdas = snap_clusters ? eig.clustered_eigenvalues() : eig.eigenvalues;
  std::vector<double> fl(lambdas.size());
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    fl[k] = f(lambdas[k]);
    if (!std::isfinite(fl[k])) {
      throw DomainError("apply_scalar_function: f is not finite at eigenvalue " +
                        std::to_string(lambdas[k]));
    }
  }
  return HermitianOperator::hermitian_part(reconstruct(eig.eigenvectors, fl));
}

// |x|^p with the continuous extension 0^p = 0.
inline double abs_pow(double x, double p) {
  const double ax = std::abs(x);
  return ax == 0.0 ? 0.0 : std::pow(ax, p);
}

// Square root of a positive semidefinite operator (negative eigenvalues clipped).
inline HermitianOperator psd_sqrt(const HermitianOperator& a) {
  return apply_scalar_function(a, [](double x) { return x > 0.0 ? std::sqrt(x) : 0.0; });
}

//----------------------------------------------------------------------------
// Tensor structure
//----------------------------------------------------------------------------

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b,
                          std::size_t max_total_dim = kDefaultMaxTotalDim) {
  const std::size_t r = a.rows() * b.rows();
  const std::size_t c = a.cols() * b.cols();
  if (r > max_total_dim || c > max_total_dim) {
    throw SizeError("kron: result " + std::to_string(r) + "x" + std::to_string(c) +
                    " exceeds dimension guard " + std::to_string(max_total_dim));
  }
  ComplexMatrix out(r, c);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const cplx aij = a(i, j);
      if (aij == cplx{}) continue;
      for (std::size_t k = 0; k < b.rows(); ++k)
        for (std::size_t l = 0; l < b.cols(); ++l)
          out(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
    }
  return out;
}

// Entrywise transpose (no conjugation).
inline ComplexMatrix transpose_op(const ComplexMatrix& a) {
  if (!a.is_square()) throw ShapeError("transpose_op: matrix is not square");
  ComplexMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline HermitianOperator transpose_op(const HermitianOperator& a) {
  return HermitianOperator::hermitian_part(transpose_op(a.matrix()));
}

struct TensorDims {
  std::size_t first;
  std::size_t second;
};

// Which tensor factor is traced out.
enum class Subsystem { First, Second };

// side == Second: tr over the second factor (result is first x first).
// side == First: tr over the first factor (result is second x second).
inline ComplexMatrix partial_trace(const ComplexMatrix& m, TensorDims dims, Subsystem side) {
  const std::size_t n = dims.first * dims.second;
  if (m.rows() != n || m.cols() != n) {
    throw ShapeError("partial_trace: matrix is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected " + std::to_string(n) + "x" +
                     std::to_string(n));
  }
  const std::size_t da = dims.first;
  const std::size_t db = dims.second;
  if (side == Subsystem::Second) {
    ComplexMatrix out(da, da);
    for (std::size_t i = 0; i < da; ++i)
      for (std::size_t j = 0; j < da; ++j) {
        cplx s{};
        for (std::size_t k = 0; k < db; ++k) s += m(i * db + k, j * db + k);
        out(i, j) = s;
      }
    return out;
  }
  ComplexMatrix out(db, db);
  for (std::size_t k = 0; k < db; ++k)
    for (std::size_t l = 0; l < db; ++l) {
      cplx s{};
      for (std::size_t i = 0; i < da; ++i) s += m(i * db + k, i * db + l);
      out(k, l) = s;
    }
  return out;
}

// Row-major vectorization: vec(M)[i*cols + j] = M(i, j). Returned as a column.
inline ComplexMatrix vectorize(const ComplexMatrix& m) {
  ComplexMatrix v(m.rows() * m.cols(), 1);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) v(i * m.cols() + j, 0) = m(i, j);
  return v;
}

inline ComplexMatrix unvectorize(const ComplexMatrix& v, std::size_t rows, std::size_t cols) {
  if (v.rows() * v.cols() != rows * cols) throw ShapeError("unvectorize: size mismatch");
  ComplexMatrix m(rows, cols);
  auto d = v.data();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = d[i * cols + j];
  return m;
}

// |v><v| for a column vector v.
inline ComplexMatrix outer(const ComplexMatrix& v) { return v * v.adjoint(); }

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
  return a * b - b * a;
}

}  // namespace qwot
