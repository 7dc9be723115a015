#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "qwot/quantum.hpp"

using namespace qwot;

TEST(State, ValidatesTraceAndPositivity) {
  EXPECT_THROW(State(ComplexMatrix{{0.6, 0}, {0, 0.6}}), DomainError);
  EXPECT_THROW(State(ComplexMatrix{{1.5, 0}, {0, -0.5}}), DomainError);
  // Tiny negative eigenvalue is clipped and the trace restored.
  const State s(ComplexMatrix{{1.0 + 5e-11, 0}, {0, -5e-11}});
  EXPECT_GE(s.eigenvalues().front(), 0.0);
  EXPECT_NEAR(s.matrix().trace().real(), 1.0, 1e-15);
}

TEST(State, FromRoundedHermitianizesAndRenormalizes) {
  const auto s = State::from_rounded(ComplexMatrix{{0.5, cplx(0.1, 0.001)}, {cplx(0.1, 0.0), 0.502}});
  EXPECT_NEAR(s.matrix().trace().real(), 1.0, 1e-15);
  EXPECT_EQ(max_abs_diff(s.matrix(), s.matrix().adjoint()), 0.0);
}

TEST(ObservableCollection, SharedDimension) {
  EXPECT_THROW(ObservableCollection({pauli_x(), HermitianOperator::identity(3)}), ShapeError);
  EXPECT_THROW(ObservableCollection(std::vector<HermitianOperator>{}), InvalidProblem);
}

TEST(TrivialCoupling, Examples) {
  const auto half = maximally_mixed(2);
  EXPECT_LE(max_abs_diff(trivial_coupling(half, half).matrix(), 0.25 * ComplexMatrix::identity(4)), 1e-15);
  const auto zero = basis_state(2, 0);
  const auto one = basis_state(2, 1);
  const auto pi = trivial_coupling(zero, one);
  EXPECT_LE(max_abs_diff(pi.matrix(), kron(one.matrix(), zero.matrix())), 0.0);
  const auto rho = random_state(3, 3, 4);
  const auto omega = random_state(3, 3, 5);
  const auto c = trivial_coupling(rho, omega);
  EXPECT_LE(c.marginal_error_omega(), 1e-12);
  EXPECT_LE(c.marginal_error_rho(), 1e-12);
  EXPECT_THROW(trivial_coupling(rho, half), ShapeError);
}

TEST(Coupling, RejectsWrongMarginals) {
  const auto rho = random_state(2, 2, 1);
  const auto omega = random_state(2, 2, 2);
  const auto wrong = kron(rho.matrix(), transpose_op(omega.matrix()));
  EXPECT_THROW(Coupling(State(HermitianOperator::hermitian_part(wrong)), omega, rho), InvalidCoupling);
}

TEST(IsPure, Examples) {
  EXPECT_TRUE(is_pure(basis_state(2, 0)));
  EXPECT_FALSE(is_pure(maximally_mixed(2)));
  const State nearly(ComplexMatrix::diagonal(std::vector<double>{0.999, 0.001}));
  EXPECT_NEAR(nearly.purity(), 0.998002, 1e-12);
  EXPECT_FALSE(is_pure(nearly, 1e-6));
}

TEST(Channel, ValidatesTracePreservation) {
  EXPECT_THROW(Channel(2, 2, {0.5 * ComplexMatrix::identity(2)}), InvalidChannel);
  EXPECT_THROW(Channel(2, 2, {ComplexMatrix::identity(3)}), InvalidChannel);
  const auto phi = random_channel(3, 3, 4, 11);
  EXPECT_LE(max_abs_diff(phi.adjoint_apply(ComplexMatrix::identity(3)), ComplexMatrix::identity(3)), 1e-10);
}

TEST(ChannelAdjoint, IdentityReplacementAndDuality) {
  const auto a = random_observable(3, 1);
  EXPECT_LE(max_abs_diff(channel_adjoint_apply(Channel::identity(3), a).matrix(), a.matrix()), 1e-15);
  const auto omega = random_state(3, 2, 2);
  const auto rep = Channel::replacement(3, omega);
  const double expect = trace_of_product(omega.matrix(), a.matrix()).real();
  EXPECT_LE(max_abs_diff(channel_adjoint_apply(rep, a).matrix(), expect * ComplexMatrix::identity(3)), 1e-12);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto phi = random_channel(3, 2, 3, seed);
    const auto x = random_observable(3, seed + 10).matrix();
    const auto b = random_observable(2, seed + 20).matrix();
    EXPECT_LE(std::abs(hs_inner(phi.apply(x), b) - hs_inner(x, phi.adjoint_apply(b))), 1e-12);
  }
}

TEST(ChannelToCoupling, Examples) {
  const auto pure = random_pure_state(3, 3);
  const auto id = channel_to_coupling(Channel::identity(3), pure);
  // The purification of a pure state is rho (x) rho^T.
  EXPECT_LE(max_abs_diff(id.matrix(), kron(pure.matrix(), transpose_op(pure.matrix()))), 1e-12);

  const auto rho = random_state(3, 3, 4);
  const auto omega = random_state(3, 3, 5);
  const auto rep = channel_to_coupling(Channel::replacement(3, omega), rho);
  EXPECT_LE(max_abs_diff(rep.matrix(), kron(omega.matrix(), transpose_op(rho.matrix()))), 1e-12);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = random_state(3, 3, seed);
    const auto c = channel_to_coupling(random_channel(3, 3, 2, seed + 30), r);
    EXPECT_LE(c.marginal_error_omega(), 1e-10);
    EXPECT_LE(c.marginal_error_rho(), 1e-10);
  }
}

TEST(CouplingToChannel, TrivialCouplingGivesReplacement) {
  const auto rho = random_state(3, 3, 6);
  const auto omega = random_state(3, 3, 7);
  const auto phi = coupling_to_channel(trivial_coupling(rho, omega));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = random_observable(3, seed).matrix();
    EXPECT_LE(max_abs_diff(phi.apply(x), x.trace() * omega.matrix()), 1e-8);
  }
  const auto a = random_observable(3, 8);
  const double expect = trace_of_product(omega.matrix(), a.matrix()).real();
  EXPECT_LE(max_abs_diff(phi.adjoint_apply(a.matrix()), expect * ComplexMatrix::identity(3)), 1e-8);
}

TEST(CouplingToChannel, RoundTripFullRank) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto rho = random_state(3, 3, seed);
    const auto phi = random_channel(3, 3, 1 + seed % 3, seed + 40);
    const auto back = coupling_to_channel(channel_to_coupling(phi, rho));
    EXPECT_LE(max_abs_diff(back.choi(), phi.choi()), 1e-8);
    EXPECT_LE(max_abs_diff(back.apply(rho.matrix()), phi.apply(rho.matrix())), 1e-8);
  }
  const auto rho = random_state(2, 2, 3);
  const auto back = coupling_to_channel(channel_to_coupling(Channel::identity(2), rho));
  EXPECT_LE(max_abs_diff(back.choi(), Channel::identity(2).choi()), 1e-8);
}

TEST(CouplingToChannel, PairingIdentity) {
  // tr[Pi (A (x) B^T)] = tr[rho^{1/2} B rho^{1/2} Phi^dagger(A)].
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto rho = random_state(3, 3, seed);
    const auto c = channel_to_coupling(random_channel(3, 3, 2, seed + 1), rho);
    const auto phi = coupling_to_channel(c);
    const auto a = random_observable(3, seed + 2).matrix();
    const auto b = random_observable(3, seed + 3).matrix();
    const auto sr = rho.sqrt().matrix();
    const auto lhs = trace_of_product(c.matrix(), kron(a, transpose_op(b)));
    const auto rhs = trace_of_product(sr * b * sr, phi.adjoint_apply(a));
    EXPECT_LE(std::abs(lhs - rhs), 1e-8);
  }
}

TEST(BlochVector, Examples) {
  const auto paulis = pauli_collection();
  const auto zero = bloch_vector(maximally_mixed(2), paulis);
  for (double x : zero.coords) EXPECT_NEAR(x, 0.0, 1e-15);
  const auto up = bloch_vector(basis_state(2, 0), paulis);
  EXPECT_NEAR(up.coords[2], 1.0, 1e-15);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_LE(bloch_vector(random_state(2, 1 + seed % 2, seed), paulis).norm(), 1.0 + 1e-10);
  }
  const auto rho = random_state(3, 3, 1);
  const ObservableCollection a({random_observable(3, 2), random_observable(3, 3)});
  const auto b = bloch_vector(rho, a);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(b.coords[k], trace_of_product(rho.matrix(), a[k].matrix()).real(), 1e-14);
  }
}

TEST(Samplers, DeterministicAndValid) {
  EXPECT_NEAR(random_pure_state(2, 17).purity(), 1.0, 1e-12);
  const auto s = random_state(3, 3, 5);
  EXPECT_GT(s.eigenvalues().front(), 0.0);
  EXPECT_NEAR(s.matrix().trace().real(), 1.0, 1e-15);
  EXPECT_EQ(max_abs_diff(random_state(3, 2, 9).matrix(), random_state(3, 2, 9).matrix()), 0.0);
  EXPECT_EQ(max_abs_diff(random_observable(4, 9).matrix(), random_observable(4, 9).matrix()), 0.0);
  EXPECT_THROW(random_state(3, 4, 1), DomainError);
  EXPECT_THROW(random_state(3, 0, 1), DomainError);
}

TEST(Inequalities, LiebMonotonicity) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t d = 2 + seed % 2;
    const auto rho = random_state(d, d, seed);
    const auto phi = random_channel(d, d, 1 + seed % 3, seed + 1000);
    const auto a = random_observable(d, seed + 2000);
    const State out(channel_apply(phi, rho.op()), 1e-9);
    EXPECT_GE(sqrt_product_trace(out, a), sqrt_product_trace(rho, channel_adjoint_apply(phi, a)) - 1e-9);
  }
}

TEST(Inequalities, CauchySchwarzAndPureEquality) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t d = 2 + seed % 3;
    const auto x = random_state(d, 1 + seed % d, seed);
    const auto y = random_observable(d, seed + 1);
    const double t = trace_of_product(x.matrix(), y.matrix()).real();
    EXPECT_GE(sqrt_product_trace(x, y), t * t - 1e-9);
    const auto pure = random_pure_state(d, seed + 2);
    const double tp = trace_of_product(pure.matrix(), y.matrix()).real();
    EXPECT_NEAR(sqrt_product_trace(pure, y), tp * tp, 1e-10);
  }
}
