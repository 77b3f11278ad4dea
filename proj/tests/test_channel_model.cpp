#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rissense/channel_model.hpp"
#include "rissense/solvers.hpp"

using namespace rissense;

namespace {

bool bit_identical(const CMatrix& a, const CMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace

TEST(GenChannels, NormsAfterGeneration) {
  const ChannelSet ch = gen_channels(1, 8, 42);
  ASSERT_EQ(ch.m(), 1);
  ASSERT_EQ(ch.n(), 8);
  EXPECT_LE(ch.b.norm(), 1.0);
  EXPECT_LE(ch.c.norm(), 1.0);
  for (Index j = 0; j < ch.n(); ++j) EXPECT_NEAR(ch.A.col(j).norm(), 1.0, 1e-12);
}

TEST(GenChannels, InvariantsAcrossSeedsAndShapes) {
  for (auto [m, n] : {std::pair<Index, Index>{1, 8}, {2, 4}, {4, 8}, {8, 8}, {8, 2}}) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const ChannelSet ch = gen_channels(m, n, seed);
      EXPECT_EQ(ch.b.size(), m);
      EXPECT_EQ(ch.c.size(), n);
      EXPECT_LE(ch.b.norm(), 1.0 + 1e-15);
      EXPECT_LE(ch.c.norm(), 1.0 + 1e-15);
      for (Index j = 0; j < n; ++j) EXPECT_NEAR(ch.A.col(j).norm(), 1.0, 1e-12);
    }
  }
}

TEST(GenChannels, Deterministic) {
  const ChannelSet a = gen_channels(4, 8, 99);
  const ChannelSet b = gen_channels(4, 8, 99);
  EXPECT_TRUE(bit_identical(a.A, b.A));
  EXPECT_TRUE(bit_identical(a.b, b.b));
  EXPECT_TRUE(bit_identical(a.c, b.c));
  const ChannelSet c = gen_channels(4, 8, 100);
  EXPECT_FALSE(bit_identical(a.A, c.A));
}

TEST(GenChannels, RejectsBadDimensions) {
  EXPECT_THROW(gen_channels(0, 8, 1), DimensionError);
  EXPECT_THROW(gen_channels(4, 0, 1), DimensionError);
  EXPECT_THROW(gen_channels(-1, 8, 1), DimensionError);
  EXPECT_THROW(gen_channels(Index{1} << 40, Index{1} << 40, 1), DimensionError);
}

// Unnormalized draws are CN(0, 1): |z| is Rayleigh with mean sqrt(pi)/2.
TEST(GenChannels, UnnormalizedDrawStatistics) {
  std::mt19937_64 rng(7);
  double sum = 0.0;
  double power = 0.0;
  long count = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const CMatrix draw = complex_normal(4, 8, rng);
    sum += draw.cwiseAbs().sum();
    power += draw.cwiseAbs2().sum();
    count += draw.size();
  }
  const double expected = std::sqrt(M_PI) / 2.0;
  EXPECT_NEAR(sum / count / expected, 1.0, 0.02);
  EXPECT_NEAR(power / count, 1.0, 0.02);
}

TEST(GenPerturbation, ZeroSigma) {
  const Perturbation p = gen_perturbation(4, 8, 0.0, 3);
  EXPECT_TRUE(p.dA.isZero(0.0));
  EXPECT_TRUE(p.db.isZero(0.0));
  EXPECT_TRUE(p.dc.isZero(0.0));
}

TEST(GenPerturbation, ComponentNormsEqualSigma) {
  const Perturbation p = gen_perturbation(4, 8, 0.1, 3);
  EXPECT_NEAR(p.dA.norm(), 0.1, 1e-12);
  EXPECT_NEAR(p.db.norm(), 0.1, 1e-12);
  EXPECT_NEAR(p.dc.norm(), 0.1, 1e-12);
  for (double s : {1e-6, 2.5e-3, 0.5, 3.0}) {
    const Perturbation q = gen_perturbation(2, 6, s, 11);
    EXPECT_NEAR(q.dA.norm(), s, 1e-12);
    EXPECT_NEAR(q.db.norm(), s, 1e-12);
    EXPECT_NEAR(q.dc.norm(), s, 1e-12);
  }
}

TEST(GenPerturbation, DistinctSeedsGiveDistinctDirections) {
  const double sigma = 0.1;
  int aligned = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const Perturbation a = gen_perturbation(4, 8, sigma, 2 * k);
    const Perturbation b = gen_perturbation(4, 8, sigma, 2 * k + 1);
    EXPECT_NEAR(a.dA.norm(), b.dA.norm(), 1e-12);
    const double inner = std::abs(a.dA.reshaped().dot(b.dA.reshaped()));
    if (inner >= 0.99 * sigma * sigma) ++aligned;
  }
  EXPECT_EQ(aligned, 0);
}

TEST(GenPerturbation, SameSeedScalesOneDirection) {
  const Perturbation a = gen_perturbation(3, 5, 0.01, 8);
  const Perturbation b = gen_perturbation(3, 5, 0.04, 8);
  EXPECT_LT(oracle::max_abs(4.0 * a.dA - b.dA), 1e-15);
  EXPECT_LT((4.0 * a.db - b.db).norm(), 1e-15);
}

TEST(GenPerturbation, RejectsNegativeSigma) {
  EXPECT_THROW(gen_perturbation(2, 2, -1e-3, 1), ArgumentError);
  EXPECT_THROW(gen_perturbation(2, 2, NAN, 1), ArgumentError);
}

TEST(ApplyPerturbation, ZeroIsIdentity) {
  const ChannelSet ch = gen_channels(2, 4, 5);
  const ChannelSet out = apply_perturbation(ch, zero_perturbation(2, 4));
  EXPECT_TRUE(bit_identical(out.A, ch.A));
  EXPECT_TRUE(bit_identical(out.b, ch.b));
  EXPECT_TRUE(bit_identical(out.c, ch.c));
}

TEST(ApplyPerturbation, DirectAddition) {
  ChannelSet ch{CMatrix::Identity(2, 2), CVector(2), CVector::Ones(2)};
  ch.b << 1.0, 0.0;
  Perturbation p = zero_perturbation(2, 2);
  p.db << 0.1, 0.0;
  const ChannelSet out = apply_perturbation(ch, p);
  EXPECT_NEAR(std::abs(out.b[0] - cplx(1.1)), 0.0, 1e-15);
  EXPECT_EQ(out.b[1], cplx(0.0));
}

TEST(ApplyPerturbation, RoundTripWithNegation) {
  const ChannelSet ch = gen_channels(4, 8, 21);
  const Perturbation p = gen_perturbation(4, 8, 0.3, 22);
  const ChannelSet back = apply_perturbation(apply_perturbation(ch, p), negate(p));
  EXPECT_LT(oracle::max_abs(back.A - ch.A), 1e-15);
  EXPECT_LT(oracle::max_abs(back.b - ch.b), 1e-15);
  EXPECT_LT(oracle::max_abs(back.c - ch.c), 1e-15);
}

TEST(ApplyPerturbation, ShapeMismatch) {
  const ChannelSet ch = gen_channels(2, 4, 1);
  EXPECT_THROW(apply_perturbation(ch, zero_perturbation(2, 5)), DimensionError);
  EXPECT_THROW(apply_perturbation(ch, zero_perturbation(3, 4)), DimensionError);
}

TEST(EffectiveMatrix, OnesAndDiagonal) {
  std::mt19937_64 rng(1);
  const CMatrix A = oracle::random_matrix(3, 4, rng);
  EXPECT_LT(oracle::max_abs(effective_matrix(A, CVector::Ones(4)) - A), 0.0 + 1e-300);

  CVector c(2);
  c << cplx(0, 2), 3.0;
  CMatrix expected = CMatrix::Zero(2, 2);
  expected(0, 0) = cplx(0, 2);
  expected(1, 1) = 3.0;
  EXPECT_LT(oracle::max_abs(effective_matrix(CMatrix::Identity(2, 2), c) - expected), 1e-300);
}

TEST(EffectiveMatrix, MatchesFoldedProduct) {
  std::mt19937_64 rng(2);
  const CMatrix A = oracle::random_matrix(3, 4, rng);
  const CVector c = oracle::random_vector(4, rng);
  const CMatrix A_c = effective_matrix(A, c);
  for (int k = 0; k < 20; ++k) {
    const CVector d = oracle::random_vector(4, rng);
    EXPECT_LT((A_c * d - A * d.cwiseProduct(c)).norm(), 1e-13);
  }
}

TEST(EffectiveMatrix, LinearInC) {
  std::mt19937_64 rng(3);
  const CMatrix A = oracle::random_matrix(5, 3, rng);
  const CVector c1 = oracle::random_vector(3, rng);
  const CVector c2 = oracle::random_vector(3, rng);
  EXPECT_LT(oracle::max_abs(effective_matrix(A, c1 + c2) - effective_matrix(A, c1) -
                            effective_matrix(A, c2)),
            1e-14);
}

TEST(EffectiveMatrix, LengthMismatch) {
  EXPECT_THROW(effective_matrix(CMatrix::Identity(2, 3), CVector::Ones(2)), DimensionError);
}

TEST(SignalLevel, ZeroReflector) {
  const ChannelSet ch = gen_channels(4, 8, 31);
  EXPECT_DOUBLE_EQ(signal_level(ch, CVector(CVector::Zero(8))), ch.b.squaredNorm());
}

TEST(SignalLevel, ExactNullingWithSquareInvertible) {
  const ChannelSet ch = gen_channels(4, 4, 32);
  const CMatrix A_c = effective_matrix(ch);
  const CVector d = -A_c.fullPivLu().solve(ch.b);
  EXPECT_LE(signal_level(ch, d), 1e-20 * ch.b.squaredNorm());
}

TEST(SignalLevel, MatchesIndependentLeastSquaresResidual) {
  // (2,4) is wide, so the residual of the min-norm solution is zero; use a
  // tall (4,2) instance to get a nonzero residual as well.
  for (auto [m, n] : {std::pair<Index, Index>{2, 4}, {4, 2}}) {
    const ChannelSet ch = gen_channels(m, n, 33);
    const CMatrix A_c = effective_matrix(ch);
    const CVector d = solve_pinv(A_c, ch.b).d.d;
    // Normal-equations residual: b^H (I - A_c (A_c^H A_c)^+ A_c^H) b
    const CMatrix G = A_c.adjoint() * A_c;
    const CMatrix proj = A_c * G.completeOrthogonalDecomposition().pseudoInverse() * A_c.adjoint();
    const double expected =
        (ch.b.adjoint() * (CMatrix::Identity(m, m) - proj) * ch.b)(0, 0).real();
    EXPECT_NEAR(signal_level(ch, d), std::max(expected, 0.0), 1e-12);
  }
}

TEST(SignalLevel, NonNegativeAndShapeChecked) {
  std::mt19937_64 rng(4);
  const ChannelSet ch = gen_channels(3, 5, 34);
  for (int k = 0; k < 50; ++k) EXPECT_GE(signal_level(ch, CVector(oracle::random_vector(5, rng))), 0.0);
  EXPECT_THROW(signal_level(ch, CVector(CVector::Zero(4))), DimensionError);
}

TEST(ReceivedSignal, PassThroughAndNull) {
  const ChannelSet ch = gen_channels(2, 6, 35);
  const RisVector zero{CVector::Zero(6), RisMode::active};
  const CVector no_noise = CVector::Zero(2);
  EXPECT_LT((received_signal(ch, zero, 1.0, no_noise) - ch.b).norm(), 1e-300);

  const RisVector null{solve_pinv(effective_matrix(ch), ch.b).d.d, RisMode::active};
  CVector noise(2);
  noise << cplx(0.01, -0.02), cplx(-0.03, 0.005);
  EXPECT_LT((received_signal(ch, null, 1.0, noise) - noise).norm(), 1e-14);
  EXPECT_THROW(received_signal(ch, null, 1.0, CVector(CVector::Zero(3))), DimensionError);
}

TEST(ReceivedSignal, NoisePowerMonteCarlo) {
  const Index m = 4;
  const ChannelSet ch = gen_channels(m, 8, 36);
  const RisVector null{solve_pinv(effective_matrix(ch), ch.b).d.d, RisMode::active};
  const double sigma2 = 0.01;
  std::mt19937_64 rng(37);
  double acc = 0.0;
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    const CVector noise = std::sqrt(sigma2) * complex_normal(m, 1, rng);
    acc += received_signal(ch, null, 1.0, noise).squaredNorm();
  }
  EXPECT_NEAR(acc / draws / (m * sigma2), 1.0, 0.05);
}
