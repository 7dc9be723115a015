#pragma once

// Explicit relations between single-observable cost operators at different
// exponents: |A (x) I - I (x) A^T|^p = sum_k |B_k (x) I - I (x) B_k^T|^{p'}
// with every B_k a function of A.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qwot/cost.hpp"
#include "qwot/errors.hpp"
#include "qwot/linalg.hpp"
#include "qwot/quantum.hpp"

namespace qwot {

struct Witness {
  HermitianOperator b;
  double p_source = 1.0;
};

struct ConeDecomposition {
  HermitianOperator observable;
  CostOperator target;  // C_{{A}, p_target}
  double p_target = 1.0;
  std::vector<Witness> witnesses;
  std::vector<double> parameters;  // method-specific scalars (cut weights, mu values)
  double residual = 0.0;           // max-norm reconstruction error
  double commutator = 0.0;         // max_k ||[A, B_k]||_max

  double tolerance() const { return 1e-9 * std::max(1.0, target.matrix.matrix().max_abs()); }
  bool ok() const { return residual <= tolerance() && commutator <= 1e-9; }
};

namespace detail {

struct Spectrum {
  std::vector<double> values;             // distinct, ascending
  std::vector<ComplexMatrix> projectors;  // P_r
};

inline Spectrum spectrum_of(const HermitianOperator& a) {
  const auto eig = eigh(a);
  Spectrum s;
  s.values = eig.distinct_eigenvalues();
  for (std::size_t g = 0; g < s.values.size(); ++g) s.projectors.push_back(eig.group_projector(g));
  return s;
}

inline HermitianOperator spectral_sum(const Spectrum& s, const std::vector<double>& coeffs) {
  ComplexMatrix m(s.projectors.front().rows(), s.projectors.front().cols());
  for (std::size_t r = 0; r < coeffs.size(); ++r)
    if (coeffs[r] != 0.0) m += coeffs[r] * s.projectors[r];
  return HermitianOperator::hermitian_part(m);
}

inline ComplexMatrix single_cost(const HermitianOperator& b, double p) {
  return cost_operator(ObservableCollection({b}), p).matrix.matrix();
}

inline void finalize(ConeDecomposition& dec) {
  const std::size_t n = dec.target.dim;
  ComplexMatrix sum(n, n);
  dec.commutator = 0.0;
  for (const auto& w : dec.witnesses) {
    sum += single_cost(w.b, w.p_source);
    dec.commutator = std::max(dec.commutator, commutator(dec.observable, w.b).max_abs());
  }
  dec.residual = max_abs_diff(dec.target.matrix.matrix(), sum);
}

inline ConeDecomposition start(const HermitianOperator& a, double p_target) {
  ConeDecomposition dec;
  dec.observable = a;
  dec.p_target = p_target;
  dec.target = cost_operator(ObservableCollection({a}), p_target);
  return dec;
}

inline void require_exponent(double p, const char* what) {
  if (!(p > 0.0) || !std::isfinite(p)) {
    throw DomainError(std::string(what) + " must be finite and > 0");
  }
}

}  // namespace detail

// C_{{A},1} as a sum of p-costs of cut observables B_t = beta_t^{1/p} (P_1 + ... + P_t),
// beta_t = lambda_{t+1} - lambda_t (line metric = sum of its gap cuts).
inline ConeDecomposition cut_cone_decompose(const HermitianOperator& a, double p) {
  detail::require_exponent(p, "cut_cone_decompose: p");
  auto dec = detail::start(a, 1.0);
  const auto s = detail::spectrum_of(a);
  const std::size_t n = s.values.size();
  for (std::size_t t = 0; t + 1 < n; ++t) {
    const double beta = s.values[t + 1] - s.values[t];
    const double alpha = std::pow(beta, 1.0 / p);
    std::vector<double> coeffs(n, 0.0);
    for (std::size_t r = 0; r <= t; ++r) coeffs[r] = alpha;
    dec.witnesses.push_back({detail::spectral_sum(s, coeffs), p});
    dec.parameters.push_back(beta);
  }
  detail::finalize(dec);
  return dec;
}

// A with at most two eigenvalues lambda < lambda': returns mu Q, Q the
// projection onto the lambda' eigenspace and mu = |lambda - lambda'|^{p/p'},
// so that the p'-cost of the result is the p-cost of A.
inline HermitianOperator two_level_transport(const HermitianOperator& a, double p,
                                             double p_target) {
  detail::require_exponent(p, "two_level_transport: p");
  detail::require_exponent(p_target, "two_level_transport: p_target");
  const auto s = detail::spectrum_of(a);
  if (s.values.size() > 2) {
    throw DomainError("two_level_transport: observable has " + std::to_string(s.values.size()) +
                      " distinct eigenvalues");
  }
  if (s.values.size() < 2) return HermitianOperator(ComplexMatrix(a.dim(), a.dim()));
  const double mu = std::pow(s.values[1] - s.values[0], p / p_target);
  return detail::spectral_sum(s, {0.0, mu});
}

// Three witnesses, each supported on one spectral projection:
//   B_1 = mu_3 P_3,  B_2 = mu_1 P_1,  B_3 = mu_2 P_2,  mu = (radicand / 2)^{1/p'}.
// Requires p <= 1 so that |x - y|^p is a metric and the radicands are >= 0.
inline ConeDecomposition three_level_decompose(const HermitianOperator& a, double p,
                                               double p_target) {
  detail::require_exponent(p, "three_level_decompose: p");
  detail::require_exponent(p_target, "three_level_decompose: p_target");
  if (p > 1.0) throw DomainError("three_level_decompose: p must be <= 1");
  auto dec = detail::start(a, p);
  const auto s = detail::spectrum_of(a);
  const std::size_t n = s.values.size();
  if (n > 3) {
    throw DomainError("three_level_decompose: observable has " + std::to_string(n) +
                      " distinct eigenvalues");
  }
  if (n == 2) {
    dec.witnesses.push_back({two_level_transport(a, p, p_target), p_target});
  } else if (n == 3) {
    const auto& l = s.values;
    const double d12 = abs_pow(l[0] - l[1], p);
    const double d23 = abs_pow(l[1] - l[2], p);
    const double d31 = abs_pow(l[2] - l[0], p);
    const double scale = std::max({1.0, d12, d23, d31});
    auto root = [&](double radicand) {
      if (radicand < -1e-12 * scale) {
        throw NumericalFailure("three_level_decompose: negative radicand " +
                               std::to_string(radicand));
      }
      return std::pow(std::max(0.0, 0.5 * radicand), 1.0 / p_target);
    };
    const double mu3 = root(d23 + d31 - d12);
    const double mu1 = root(d31 + d12 - d23);
    const double mu2 = root(d12 + d23 - d31);
    dec.witnesses.push_back({detail::spectral_sum(s, {0.0, 0.0, mu3}), p_target});
    dec.witnesses.push_back({detail::spectral_sum(s, {mu1, 0.0, 0.0}), p_target});
    dec.witnesses.push_back({detail::spectral_sum(s, {0.0, mu2, 0.0}), p_target});
    dec.parameters = {mu3, mu1, mu2};
  }
  detail::finalize(dec);
  return dec;
}

inline constexpr double kBisectionTol = 1e-12;
inline constexpr int kBisectionMaxIters = 200;

struct SpectrumReduction {
  HermitianOperator b;        // sum mu_i P_i
  HermitianOperator a_prime;  // sum lambda'_i P_i
  std::vector<double> lambda;        // distinct eigenvalues shifted so lambda_1 = 0
  std::vector<double> mu;
  std::vector<double> lambda_prime;
  double p = 1.0;
  double p_target = 1.0;
  double covered_residual = 0.0;  // blocks with i or j in {1, 2} or i = j
  std::vector<std::pair<std::size_t, std::size_t>> uncovered_blocks;
  double uncovered_residual = 0.0;  // informational; no identity is claimed there
};

// One step of the spectrum reduction: |A|^p - |B|^{p'} = |A'|^p on the
// covered blocks P_i (x) P_j^T, with #spec(A') < #spec(A).
inline SpectrumReduction spectrum_reduce(const HermitianOperator& a, double p, double p_target) {
  detail::require_exponent(p, "spectrum_reduce: p");
  detail::require_exponent(p_target, "spectrum_reduce: p_target");
  if (p > p_target) throw DomainError("spectrum_reduce: requires p <= p_target");
  const auto s = detail::spectrum_of(a);
  const std::size_t n = s.values.size();
  if (n < 2) throw DomainError("spectrum_reduce: observable is a multiple of the identity");

  SpectrumReduction out;
  out.p = p;
  out.p_target = p_target;
  for (double v : s.values) out.lambda.push_back(v - s.values.front());
  const auto& l = out.lambda;
  const double r = p / p_target;
  const double m2 = std::pow(l[1], r);
  out.mu.assign(n, 0.0);
  out.lambda_prime.assign(n, 0.0);
  out.mu[1] = m2;
  auto f = [&](double mu) { return abs_pow(mu, p_target) - abs_pow(m2 - mu, p_target); };
  for (std::size_t j = 2; j < n; ++j) {
    const double target = std::pow(l[j], p) - abs_pow(l[1] - l[j], p);
    const double edge = std::pow(l[j], r);
    double lo = -edge;
    double hi = edge;
    double g_lo = f(lo) - target;
    const double g_hi = f(hi) - target;
    const double slack = 1e-12 * std::max(1.0, std::abs(target));
    double mu = 0.0;
    if (std::abs(g_lo) <= slack) {
      mu = lo;
    } else if (std::abs(g_hi) <= slack) {
      mu = hi;
    } else {
      if ((g_lo > 0.0) == (g_hi > 0.0)) {
        throw NumericalFailure("spectrum_reduce: no sign change on the bisection bracket for j = " +
                               std::to_string(j + 1));
      }
      for (int it = 0; it < kBisectionMaxIters && hi - lo > kBisectionTol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double g_mid = f(mid) - target;
        if ((g_mid > 0.0) == (g_lo > 0.0)) {
          lo = mid;
          g_lo = g_mid;
        } else {
          hi = mid;
        }
      }
      mu = 0.5 * (lo + hi);
    }
    out.mu[j] = mu;
    out.lambda_prime[j] = std::pow(std::max(0.0, std::pow(l[j], p) - abs_pow(mu, p_target)), 1.0 / p);
  }
  out.b = detail::spectral_sum(s, out.mu);
  out.a_prime = detail::spectral_sum(s, out.lambda_prime);

  const auto diff = detail::single_cost(a, p) - detail::single_cost(out.b, p_target) -
                    detail::single_cost(out.a_prime, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double e = (diff * kron(s.projectors[i], transpose_op(s.projectors[j]))).max_abs();
      if (i < 2 || j < 2 || i == j) {
        out.covered_residual = std::max(out.covered_residual, e);
      } else {
        out.uncovered_blocks.emplace_back(i, j);
        out.uncovered_residual = std::max(out.uncovered_residual, e);
      }
    }
  return out;
}

// Full decomposition of a p-cost into p'-costs for observables with at most
// three eigenvalues (p <= p'): one reduction step, then the two-level map.
inline ConeDecomposition reduce_decompose(const HermitianOperator& a, double p, double p_target) {
  auto dec = detail::start(a, p);
  const auto s = detail::spectrum_of(a);
  if (s.values.size() > 3) {
    throw DomainError("reduce_decompose: the full identity needs at most three eigenvalues");
  }
  if (s.values.size() == 2) {
    dec.witnesses.push_back({two_level_transport(a, p, p_target), p_target});
  } else if (s.values.size() == 3) {
    const auto red = spectrum_reduce(a, p, p_target);
    dec.witnesses.push_back({red.b, p_target});
    dec.witnesses.push_back({two_level_transport(red.a_prime, p, p_target), p_target});
    dec.parameters = red.mu;
  }
  detail::finalize(dec);
  return dec;
}

struct InfinityApprox {
  HermitianOperator a_p;          // lambda^{1/p}/2 (Q2 - Q1)
  double approx_error = 0.0;      // ||C_{{A(p)},p} - lambda (Q1 (x) Q2^T + Q2 (x) Q1^T)||_op
  double predicted_error = 0.0;   // lambda / 2^p * ||spurious block||_op
  double spurious_norm = 0.0;
};

inline InfinityApprox infinity_cost_approx(const HermitianOperator& q1, const HermitianOperator& q2,
                                           double lambda, double p) {
  detail::require_exponent(p, "infinity_cost_approx: p");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw DomainError("infinity_cost_approx: lambda must be finite and >= 0");
  }
  const std::size_t d = q1.dim();
  if (q2.dim() != d) throw ShapeError("infinity_cost_approx: projector dimensions differ");
  const auto& m1 = q1.matrix();
  const auto& m2 = q2.matrix();
  if (max_abs_diff(m1 * m1, m1) > 1e-10 || max_abs_diff(m2 * m2, m2) > 1e-10) {
    throw DomainError("infinity_cost_approx: Q1 and Q2 must be projections");
  }
  if ((m1 * m2).max_abs() > 1e-10) throw DomainError("infinity_cost_approx: Q1 Q2 != 0");
  const auto rest = ComplexMatrix::identity(d) - m1 - m2;
  if (min_eigenvalue(HermitianOperator::hermitian_part(rest)) < -1e-10) {
    throw DomainError("infinity_cost_approx: Q1 + Q2 is not <= I");
  }
  InfinityApprox out;
  const double half = 0.5 * std::pow(lambda, 1.0 / p);
  out.a_p = HermitianOperator::hermitian_part(half * (m2 - m1));
  const auto target = lambda * (kron(m1, transpose_op(m2)) + kron(m2, transpose_op(m1)));
  out.approx_error = operator_norm(HermitianOperator::hermitian_part(detail::single_cost(out.a_p, p) - target));
  const auto rt = transpose_op(rest);
  const auto spurious = kron(m1, rt) + kron(rest, transpose_op(m1)) + kron(m2, rt) +
                        kron(rest, transpose_op(m2));
  out.spurious_norm = operator_norm(HermitianOperator::hermitian_part(spurious));
  out.predicted_error = lambda / std::pow(2.0, p) * out.spurious_norm;
  return out;
}

namespace detail {

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
};

// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, double step, int max_iters,
                                    const std::function<void(double, const std::vector<double>&)>& observe) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> simplex(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += step;
  std::vector<double> fv(n + 1);
  auto eval = [&](const std::vector<double>& x) {
    const double v = f(x);
    observe(v, x);
    return v;
  };
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);
  std::vector<std::size_t> order(n + 1);
  for (int it = 0; it < max_iters; ++it) {
    for (std::size_t i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n - 1];
    if (std::abs(fv[worst] - fv[best]) <= 1e-15 * (1.0 + std::abs(fv[best]))) break;
    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i)
      if (i != worst)
        for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / static_cast<double>(n);
    auto along = [&](double t) {
      std::vector<double> x(n);
      for (std::size_t k = 0; k < n; ++k) x[k] = centroid[k] + t * (simplex[worst][k] - centroid[k]);
      return x;
    };
    auto xr = along(-1.0);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      auto xe = along(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = std::move(xe);
        fv[worst] = fe;
      } else {
        simplex[worst] = std::move(xr);
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      simplex[worst] = std::move(xr);
      fv[worst] = fr;
    } else {
      auto xc = fr < fv[worst] ? along(-0.5) : along(0.5);
      const double fc = eval(xc);
      if (fc < std::min(fr, fv[worst])) {
        simplex[worst] = std::move(xc);
        fv[worst] = fc;
      } else {
        for (std::size_t i = 0; i <= n; ++i) {
          if (i == best) continue;
          for (std::size_t k = 0; k < n; ++k)
            simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
          fv[i] = eval(simplex[i]);
        }
      }
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  return {simplex[best], fv[best]};
}

// Squared defect of |lambda_r - lambda_s|^{p_target} = sum_k |mu_r^k - mu_s^k|^p
// over all pairs, with mu_1^k = 0 and x holding (mu_2^k, ..., mu_n^k) per k.
inline double pair_defect(const std::vector<double>& lambda, const std::vector<double>& x,
                          std::size_t witnesses, double p, double p_target) {
  const std::size_t n = lambda.size();
  auto mu = [&](std::size_t k, std::size_t r) { return r == 0 ? 0.0 : x[k * (n - 1) + r - 1]; };
  double s = 0.0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t t = r + 1; t < n; ++t) {
      double sum = 0.0;
      for (std::size_t k = 0; k < witnesses; ++k) sum += abs_pow(mu(k, r) - mu(k, t), p);
      const double e = abs_pow(lambda[r] - lambda[t], p_target) - sum;
      s += e * e;
    }
  return s;
}

}  // namespace detail

inline constexpr int kGapSearchStarts = 20;
inline constexpr double kGapDefectThreshold = 1e-6;

struct StrictGapReport {
  double p = 0.0;
  double p_target = 0.0;
  double p_tilde = 0.0;
  double lhs = 0.0;             // 2 (1 - 2^{p' - p~}) for lambda = (-1, 0, 1)
  double min_rhs = 0.0;         // smallest right-hand side met during the search
  double rhs_at_best = 0.0;
  double best_defect = 0.0;
  std::uint64_t best_seed = 0;
  int starts = 0;
  bool certified = false;       // lhs < 0, no decomposition found, rhs >= 0 throughout
};

// Numerical side of the strict-inclusion argument for A = diag(-1, 0, 1): a
// decomposition of the p'-cost into p-costs would force the weighted
// combination below to agree on both sides, but the left side is negative
// and the right side is not.
inline StrictGapReport strict_gap_witness(double p, double p_target,
                                          std::optional<double> p_tilde = std::nullopt,
                                          std::uint64_t seed = 1, std::size_t witnesses = 3) {
  detail::require_exponent(p, "strict_gap_witness: p");
  detail::require_exponent(p_target, "strict_gap_witness: p_target");
  if (!(p < p_target) || !(p_target > 1.0)) {
    throw DomainError("strict_gap_witness: requires p < p_target and p_target > 1");
  }
  StrictGapReport rep;
  rep.p = p;
  rep.p_target = p_target;
  rep.p_tilde = p_tilde.value_or(std::max(p, 1.0));
  if (rep.p_tilde < std::max(p, 1.0) || rep.p_tilde >= p_target) {
    throw DomainError("strict_gap_witness: p_tilde must lie in [max(p, 1), p_target)");
  }
  const std::vector<double> lambda{-1.0, 0.0, 1.0};
  const double w = std::pow(2.0, 1.0 - rep.p_tilde);
  rep.lhs = 1.0 + 1.0 - w * std::pow(2.0, p_target);

  auto rhs = [&](const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t k = 0; k < witnesses; ++k) {
      const double m2 = x[2 * k];
      const double m3 = x[2 * k + 1];
      s += abs_pow(m2, p) + abs_pow(m2 - m3, p) - w * abs_pow(m3, p);
    }
    return s;
  };
  auto defect = [&](const std::vector<double>& x) {
    return detail::pair_defect(lambda, x, witnesses, p, p_target);
  };

  rep.min_rhs = std::numeric_limits<double>::infinity();
  rep.best_defect = std::numeric_limits<double>::infinity();
  for (int s = 0; s < kGapSearchStarts; ++s) {
    const std::uint64_t start_seed = seed + static_cast<std::uint64_t>(s);
    std::mt19937_64 rng(start_seed);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    std::vector<double> x0(2 * witnesses);
    for (double& v : x0) v = unif(rng);
    auto res = detail::nelder_mead(defect, x0, 0.5, 4000, [&](double, const std::vector<double>& x) {
      rep.min_rhs = std::min(rep.min_rhs, rhs(x));
    });
    if (res.value < rep.best_defect) {
      rep.best_defect = res.value;
      rep.best_seed = start_seed;
      rep.rhs_at_best = rhs(res.x);
    }
  }
  rep.starts = kGapSearchStarts;
  rep.certified = rep.lhs < 0.0 && rep.best_defect > kGapDefectThreshold && rep.min_rhs >= -1e-12;
  return rep;
}

struct OrderingSample {
  std::vector<double> lambda;
  double best_defect = 0.0;
};

struct OrderingSearchReport {
  double p = 0.0;
  double p_target = 0.0;
  std::size_t levels = 0;
  std::vector<OrderingSample> samples;
  double max_defect = 0.0;
};

// Search harness for decompositions |A|^p = sum_k |B_k|^{p'} with commuting
// B_k (simultaneously diagonal, n(n-1)/2 witnesses) for random spectra with
// n levels. Reports the smallest defect found per spectrum; a small defect
// is evidence, not proof, and a large one proves nothing either.
inline OrderingSearchReport well_ordering_search(double p, double p_target, std::size_t levels,
                                                 std::size_t samples, std::uint64_t seed,
                                                 int starts = 4) {
  detail::require_exponent(p, "well_ordering_search: p");
  detail::require_exponent(p_target, "well_ordering_search: p_target");
  if (levels < 2 || levels > 6) throw DomainError("well_ordering_search: levels must be in [2, 6]");
  OrderingSearchReport rep;
  rep.p = p;
  rep.p_target = p_target;
  rep.levels = levels;
  const std::size_t witnesses = levels * (levels - 1) / 2;
  for (std::size_t i = 0; i < samples; ++i) {
    std::mt19937_64 rng(seed ^ static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    OrderingSample smp;
    smp.lambda.push_back(0.0);
    for (std::size_t r = 1; r < levels; ++r) smp.lambda.push_back(smp.lambda.back() + 0.1 + unif(rng));
    auto defect = [&](const std::vector<double>& x) {
      return detail::pair_defect(smp.lambda, x, witnesses, p_target, p);
    };
    smp.best_defect = std::numeric_limits<double>::infinity();
    for (int s = 0; s < starts; ++s) {
      std::vector<double> x0(witnesses * (levels - 1));
      for (double& v : x0) v = 2.0 * unif(rng) - 1.0;
      auto res = detail::nelder_mead(defect, x0, 0.5, 4000, [](double, const std::vector<double>&) {});
      smp.best_defect = std::min(smp.best_defect, res.value);
    }
    rep.max_defect = std::max(rep.max_defect, smp.best_defect);
    rep.samples.push_back(std::move(smp));
  }
  return rep;
}

}  // namespace qwot
