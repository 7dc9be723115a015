#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "qwot/cost.hpp"

using namespace qwot;

namespace {

HermitianOperator diag(std::vector<double> v) { return HermitianOperator::diagonal(v); }

// sum_{r,s} <omega P_r> <rho P_s> |l_r - l_s|^p for a diagonal observable.
double product_cost(const State& rho, const State& omega, const std::vector<double>& lam, double p) {
  double s = 0.0;
  for (std::size_t r = 0; r < lam.size(); ++r)
    for (std::size_t t = 0; t < lam.size(); ++t)
      s += omega.matrix()(r, r).real() * rho.matrix()(t, t).real() * std::pow(std::abs(lam[r] - lam[t]), p);
  return s;
}

}  // namespace

TEST(CostOperator, DiagonalObservable) {
  const std::vector<double> lam{0.0, 1.0, 3.0};
  for (double p : {0.5, 1.0, 2.0, 3.7}) {
    const auto c = cost_operator(ObservableCollection({diag(lam)}), p);
    EXPECT_EQ(c.dim, 9u);
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t s = 0; s < 3; ++s) {
        EXPECT_NEAR(c.matrix.matrix()(r * 3 + s, r * 3 + s).real(), std::pow(std::abs(lam[r] - lam[s]), p), 1e-12);
      }
    EXPECT_NEAR(c.matrix.matrix().max_abs(), std::pow(3.0, p), 1e-12);
  }
}

TEST(CostOperator, QuadraticMatchesSquaredDifference) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = random_observable(3, seed);
    const auto i = ComplexMatrix::identity(3);
    const auto x = kron(a.matrix(), i) - kron(i, transpose_op(a.matrix()));
    const auto c = cost_operator(ObservableCollection({a}), 2.0);
    EXPECT_LE(max_abs_diff(c.matrix.matrix(), x * x), 1e-10);
  }
}

TEST(CostOperator, PositiveAndAdditive) {
  const auto a = random_observable(2, 1);
  const auto b = random_observable(2, 2);
  const auto c = cost_operator(ObservableCollection({a, b}), 1.3);
  EXPECT_GE(min_eigenvalue(c.matrix), -1e-12);
  const auto ca = cost_operator(ObservableCollection({a}), 1.3);
  const auto cb = cost_operator(ObservableCollection({b}), 1.3);
  EXPECT_LE(max_abs_diff(c.matrix.matrix(), ca.matrix.matrix() + cb.matrix.matrix()), 1e-12);
}

TEST(CostOperator, IdentityHasZeroCost) {
  const auto c = cost_operator(ObservableCollection({HermitianOperator::identity(3)}), 2.0);
  EXPECT_LE(c.matrix.matrix().max_abs(), 1e-12);
}

TEST(CostOperator, PauliZAtPowerOne) {
  const auto c = cost_operator(ObservableCollection({pauli_z()}), 1.0);
  EXPECT_LE(max_abs_diff(c.matrix.matrix(), ComplexMatrix::diagonal(std::vector<double>{0, 2, 2, 0})), 1e-12);
}

TEST(TransportCost, TrivialCouplingIsProductExpectation) {
  const std::vector<double> lam{-1.0, 0.5, 2.0};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rho = random_state(3, 3, seed);
    const auto omega = random_state(3, 3, seed + 100);
    for (double p : {1.0, 2.0, 2.5}) {
      const auto c = cost_operator(ObservableCollection({diag(lam)}), p);
      EXPECT_NEAR(transport_cost(trivial_coupling(rho, omega), c), product_cost(rho, omega, lam, p), 1e-12);
    }
  }
}

TEST(GeneralCost, PowerMatchesCostOperator) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ObservableCollection a({random_observable(3, seed)});
    for (double p : {0.7, 2.0}) {
      const auto g = general_cost_operator(ClassicalCostFunction::power(p), a);
      EXPECT_LE(max_abs_diff(g.matrix.matrix(), cost_operator(a, p).matrix.matrix()), 1e-10);
    }
  }
  const ObservableCollection both({diag({0, 1, 2}), diag({1, 1, 0})});
  const auto g = general_cost_operator(ClassicalCostFunction::power(1.5), both);
  EXPECT_LE(max_abs_diff(g.matrix.matrix(), cost_operator(both, 1.5).matrix.matrix()), 1e-10);
}

TEST(GeneralCost, RejectsNegativeCost) {
  const ClassicalCostFunction bad{[](const std::vector<double>& x, const std::vector<double>& y) { return x[0] - y[0]; }};
  EXPECT_THROW(general_cost_operator(bad, ObservableCollection({diag({0, 1})})), DomainError);
}

TEST(JointEigenbasis, CommutingAndNot) {
  const auto u = random_unitary(3, 4);
  const auto rot = [&](std::vector<double> v) {
    return HermitianOperator::hermitian_part(u * ComplexMatrix::diagonal(v) * u.adjoint());
  };
  const auto jb = joint_eigenbasis(ObservableCollection({rot({1, 1, 2}), rot({0, 3, 3})}));
  std::vector<std::pair<double, double>> seen;
  for (const auto& v : jb.values) seen.emplace_back(std::round(v[0] * 1e9) / 1e9, std::round(v[1] * 1e9) / 1e9);
  std::sort(seen.begin(), seen.end());
  const std::vector<std::pair<double, double>> want{{1, 0}, {1, 3}, {2, 3}};
  EXPECT_EQ(seen, want);
  EXPECT_THROW(joint_eigenbasis(ObservableCollection({pauli_x(), pauli_z()})), UnsupportedStructure);
}

TEST(PqObjective, EqualExponentsMatchTransportCost) {
  const auto rho = random_state(2, 2, 1);
  const auto omega = random_state(2, 2, 2);
  const auto pi = trivial_coupling(rho, omega);
  const auto a = pauli_collection();
  EXPECT_NEAR(evaluate_pq_objective(pi, a, 1.5, 1.5), transport_cost(pi, cost_operator(a, 1.5)), 1e-12);
}

TEST(PqObjective, TwoCommutingObservablesByEnumeration) {
  const std::vector<double> l1{0.0, 1.0};
  const std::vector<double> l2{2.0, -1.0};
  const ObservableCollection a({diag(l1), diag(l2)});
  const State rho(ComplexMatrix::diagonal(std::vector<double>{0.3, 0.7}));
  const State omega(ComplexMatrix::diagonal(std::vector<double>{0.6, 0.4}));
  const double p = 1.0;
  const double q = 2.0;
  const std::vector<double> w{0.6, 0.4};
  const std::vector<double> v{0.3, 0.7};
  double expect = 0.0;
  for (int r1 = 0; r1 < 2; ++r1)
    for (int s1 = 0; s1 < 2; ++s1)
      for (int r2 = 0; r2 < 2; ++r2)
        for (int s2 = 0; s2 < 2; ++s2) {
          const double weight = w[r1] * v[s1] * w[r2] * v[s2];
          const double inner = std::pow(l1[r1] - l1[s1], 2) + std::pow(l2[r2] - l2[s2], 2);
          expect += weight * std::pow(inner, p / q);
        }
  EXPECT_NEAR(evaluate_pq_objective(trivial_coupling(rho, omega), a, p, q), expect, 1e-12);
}

TEST(PqObjective, Guards) {
  const auto pi = trivial_coupling(maximally_mixed(2), maximally_mixed(2));
  const auto a = pauli_collection();
  EXPECT_THROW(evaluate_pq_objective(pi, a, 1.0, 0.5), DomainError);
  EXPECT_THROW(evaluate_pq_objective(pi, a, 1.0, 2.0, 10), SizeError);
}

TEST(MeasurementLaw, TrivialCouplingIsProduct) {
  const auto rho = random_state(3, 3, 7);
  const auto omega = random_state(3, 3, 8);
  const std::vector<double> lam{0.0, 1.0, 1.0};
  const auto laws = measurement_law(trivial_coupling(rho, omega), ObservableCollection({diag(lam)}));
  ASSERT_EQ(laws.size(), 1u);
  const auto& t = laws[0];
  ASSERT_EQ(t.x_values.size(), 2u);
  EXPECT_NEAR(t.total(), 1.0, 1e-12);
  const double r0 = rho.matrix()(0, 0).real();
  const double o0 = omega.matrix()(0, 0).real();
  EXPECT_NEAR(t.prob[0][0], r0 * o0, 1e-12);
  EXPECT_NEAR(t.prob[1][0], (1 - r0) * o0, 1e-12);
  EXPECT_NEAR(t.prob[0][1], r0 * (1 - o0), 1e-12);
}
