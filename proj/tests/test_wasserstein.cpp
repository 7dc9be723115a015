#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "qwot/wasserstein.hpp"

using namespace qwot;

TEST(Distance, ExponentConvention) {
  const auto rho = random_state(2, 2, 1);
  const auto omega = random_state(2, 2, 2);
  const auto a = pauli_collection();
  for (double p : {0.5, 1.0, 2.0, 3.0}) {
    const double v = optimal_transport(rho, omega, a, p).value;
    EXPECT_NEAR(distance(rho, omega, a, p), std::pow(v, std::min(1.0, 1.0 / p)), 1e-12);
  }
  EXPECT_THROW(distance(rho, omega, a, 0.0), DomainError);
  EXPECT_THROW(distance(rho, omega, a, std::nan("")), DomainError);
}

TEST(SelfDistance, QuadraticClosedFormMatchesSolver) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t d = 2 + seed % 2;
    const auto rho = random_state(d, d, seed);
    const ObservableCollection a({random_observable(d, seed + 1), random_observable(d, seed + 2)});
    const double solver = optimal_transport(rho, rho, a, 2.0).value;
    EXPECT_NEAR(quadratic_self_distance_sq(rho, a), solver, 1e-5);
  }
}

TEST(SelfDistance, PureStateClosedFormIsTwiceVariance) {
  // For a pure state tr[(rho^{1/2} A)^2] = <A>^2.
  const auto psi = random_pure_state(3, 4);
  const auto a = random_observable(3, 5);
  const double mean = trace_of_product(psi.matrix(), a.matrix()).real();
  const double second = trace_of_product(psi.matrix(), a.matrix() * a.matrix()).real();
  EXPECT_NEAR(quadratic_self_distance_sq(psi, ObservableCollection({a})), 2.0 * (second - mean * mean), 1e-12);
}

TEST(SelfDistance, QubitClosedFormAtOtherExponents) {
  for (double p : {1.0, 1.5, 3.0}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto rho = random_state(2, 2, seed);
      const auto a = pauli_collection();
      const auto closed = self_cost_closed_form(rho, a, p);
      ASSERT_TRUE(closed.has_value());
      EXPECT_NEAR(*closed, optimal_transport(rho, rho, a, p).value, 1e-5);
    }
  }
  EXPECT_FALSE(self_cost_closed_form(random_state(3, 3, 1), ObservableCollection({random_observable(3, 2)}), 1.5));
}

TEST(Divergence, IdenticalStatesGiveZero) {
  const auto rho = random_state(3, 3, 9);
  const auto r = divergence(rho, rho, ObservableCollection({random_observable(3, 1)}), 2.0);
  ASSERT_TRUE(r.defined());
  EXPECT_EQ(*r.divergence, 0.0);
  EXPECT_EQ(r.divergence_pow, 0.0);
}

TEST(Divergence, Symmetric) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rho = random_state(2, 2, seed);
    const auto omega = random_state(2, 2, seed + 10);
    const auto a = pauli_collection();
    const auto r1 = divergence(rho, omega, a, 2.0);
    const auto r2 = divergence(omega, rho, a, 2.0);
    EXPECT_NEAR(r1.divergence_pow, r2.divergence_pow, 1e-5);
  }
}

TEST(Divergence, PurePairsEqualBlochDistance) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto rho = random_pure_state(2, seed);
    const auto omega = random_pure_state(2, seed + 20);
    const auto a = pauli_collection();
    const auto r = divergence(rho, omega, a, 2.0);
    ASSERT_TRUE(r.defined());
    EXPECT_NEAR(*r.divergence, pure_divergence_quadratic(rho, omega, a), 1e-5);
  }
  // |0> and the +y state: Bloch vectors (0,0,1) and (0,1,0).
  const auto zero = basis_state(2, 0);
  const auto yplus = qubit_state(0.0, 1.0, 0.0);
  EXPECT_NEAR(pure_divergence_quadratic(zero, yplus, pauli_collection()), std::sqrt(2.0), 1e-12);
  EXPECT_THROW(pure_divergence_quadratic(maximally_mixed(2), zero, pauli_collection()), DomainError);
}

TEST(Divergence, NonnegativeAtQuadraticExponent) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t d = 2 + seed % 2;
    const auto r = divergence(random_state(d, d, seed), random_state(d, d, seed + 100),
                              ObservableCollection({random_observable(d, seed + 200)}), 2.0);
    EXPECT_GE(r.divergence_pow, -1e-6);
    EXPECT_TRUE(r.health_ok());
  }
}

TEST(Divergence, ClampAndUndefined) {
  TransportResult cross;
  SelfCost s;
  s.value = 1.0;
  cross.value = 1.0 - 5e-8;
  const auto clamped = assemble_divergence(2.0, 1e-7, cross, s, s);
  EXPECT_TRUE(clamped.clamped);
  ASSERT_TRUE(clamped.defined());
  EXPECT_EQ(*clamped.divergence, 0.0);
  cross.value = 0.5;
  const auto neg = assemble_divergence(2.0, 1e-7, cross, s, s);
  EXPECT_FALSE(neg.defined());
  cross.value = 5.0;
  const auto pos = assemble_divergence(2.0, 1e-7, cross, s, s);
  EXPECT_NEAR(*pos.divergence, 2.0, 1e-15);
  const auto sub = assemble_divergence(0.5, 1e-7, cross, s, s);
  EXPECT_NEAR(*sub.divergence, 4.0, 1e-15);
}

TEST(ChannelForm, MatchesSolverDivergence) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rho = random_state(2, 2, seed);
    const auto phi = random_channel(2, 2, 2, seed + 30);
    const State omega(channel_apply(phi, rho.op()), 1e-9);
    const auto a = pauli_collection();
    const double form = quadratic_divergence_channel_form(rho, omega, a, phi);
    // Any channel gives an upper bound on the bracket.
    EXPECT_GE(form, divergence(rho, omega, a, 2.0).divergence_pow - 1e-5);
    const auto opt = optimal_transport(rho, omega, a, 2.0);
    const auto best = coupling_to_channel(opt.plan);
    const State out(channel_apply(best, rho.op()), 1e-6);
    EXPECT_LE(max_abs_diff(out.matrix(), omega.matrix()), 1e-5);
    // The optimal coupling's channel attains the bracket.
    EXPECT_NEAR(quadratic_divergence_channel_form(rho, out, a, best), divergence(rho, omega, a, 2.0).divergence_pow, 1e-5);
  }
  EXPECT_THROW(quadratic_divergence_channel_form(maximally_mixed(2), basis_state(2, 0), pauli_collection(),
                                                 Channel::identity(2)),
               InvalidChannel);
}

TEST(Triangle, QuadraticWithPureMiddleState) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto t = triangle_check(random_state(2, 2, seed), random_pure_state(2, seed + 1),
                                  random_state(2, 2, seed + 2), pauli_collection(), 2.0);
    ASSERT_TRUE(t.defined());
    EXPECT_LE(t.violation(), 1e-5);
  }
}
