#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "wdrkf/errors.hpp"
#include "wdrkf/matops.hpp"

namespace wdrkf {
namespace {

using test::random_psd;
using test::random_symmetric;

Matrix diag2(double a, double b) { return Eigen::Vector2d(a, b).asDiagonal(); }

TEST(SymMatrix, SymmetrizesOnConstruction) {
  Matrix m(2, 2);
  m << 1.0, 2.0, 4.0, 3.0;
  const SymMatrix s(m);
  EXPECT_EQ(s.mat()(0, 1), s.mat()(1, 0));
  EXPECT_DOUBLE_EQ(s.mat()(0, 1), 3.0);
}

TEST(PsdMatrix, RejectsNegativeEigenvalue) {
  EXPECT_THROW(PsdMatrix(diag2(1.0, -0.1)), NotPsdError);
  EXPECT_THROW(PsdMatrix(diag2(1.0, 0.0), PsdMatrix::Kind::kPd), NotPsdError);
  EXPECT_NO_THROW(PsdMatrix(diag2(1.0, 0.0)));
  EXPECT_NO_THROW(PsdMatrix(diag2(1.0, -1e-12)));
}

TEST(SymEig, Identity) {
  const SymEig e = sym_eig(SymMatrix(Matrix::Identity(3, 3)));
  EXPECT_TRUE(e.values.isApprox(Vector::Ones(3)));
  EXPECT_LT((e.vectors.transpose() * e.vectors - Matrix::Identity(3, 3)).norm(), 1e-12);
}

TEST(SymEig, DiagonalSortedDescending) {
  const SymEig e = sym_eig(SymMatrix(diag2(1.0, 4.0)));
  EXPECT_DOUBLE_EQ(e.values(0), 4.0);
  EXPECT_DOUBLE_EQ(e.values(1), 1.0);
  // Eigenvectors are a signed permutation of the identity.
  EXPECT_NEAR(std::abs(e.vectors(1, 0)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(e.vectors(0, 1)), 1.0, 1e-14);
}

TEST(SymEig, ReconstructionRandom5x5) {
  std::mt19937_64 rng(11);
  const Matrix m = random_symmetric(rng, 5);
  const SymEig e = sym_eig(SymMatrix(m));
  const Matrix rec = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
  EXPECT_LT((rec - m).norm(), 1e-10);
}

TEST(SqrtmPsd, IdentityAndDiagonal) {
  EXPECT_LT((sqrtm_psd(PsdMatrix::identity(3)).mat() - Matrix::Identity(3, 3)).norm(), 1e-14);
  EXPECT_LT((sqrtm_psd(PsdMatrix(diag2(4.0, 9.0))).mat() - diag2(2.0, 3.0)).norm(), 1e-14);
}

TEST(SqrtmPsd, SquaresBackRandom) {
  std::mt19937_64 rng(12);
  const Matrix m = random_psd(rng, 4);
  const Matrix s = sqrtm_psd(PsdMatrix(m)).mat();
  EXPECT_LT((s * s - m).norm(), 1e-9);
  EXPECT_GE(lambda_min(s), -1e-12);
}

TEST(SqrtmPsd, ClampsRoundoffNegativeEigenvalues) {
  const Matrix s = sqrtm_psd(PsdMatrix(diag2(1.0, -1e-12))).mat();
  EXPECT_DOUBLE_EQ(s(1, 1), 0.0);
}

TEST(Bures, CoincidentIsZero) {
  std::mt19937_64 rng(13);
  const PsdMatrix s(random_psd(rng, 3));
  EXPECT_NEAR(bures_distance(s, s), 0.0, 1e-8);
}

TEST(Bures, ScalarClosedForm) {
  EXPECT_NEAR(bures_distance(PsdMatrix(Matrix::Constant(1, 1, 4.0)),
                             PsdMatrix(Matrix::Constant(1, 1, 1.0))),
              1.0, 1e-12);
}

TEST(Bures, CommutingDiagonal) {
  const Eigen::Vector3d l(1.0, 4.0, 0.25);
  const Eigen::Vector3d m(9.0, 1.0, 2.0);
  const double expected = (l.cwiseSqrt() - m.cwiseSqrt()).norm();
  EXPECT_NEAR(bures_distance(PsdMatrix(Matrix(l.asDiagonal())), PsdMatrix(Matrix(m.asDiagonal()))),
              expected, 1e-12);
}

TEST(Bures, MatchesEigenSqrtFormulaRandom) {
  std::mt19937_64 rng(14);
  for (int k = 0; k < 20; ++k) {
    const Matrix a = random_psd(rng, 3);
    const Matrix b = random_psd(rng, 3);
    Eigen::SelfAdjointEigenSolver<Matrix> ea(a);
    const Matrix ra = ea.operatorSqrt();
    Eigen::SelfAdjointEigenSolver<Matrix> inner(ra * b * ra);
    const double sq = a.trace() + b.trace() - 2.0 * inner.operatorSqrt().trace();
    EXPECT_NEAR(bures_distance(PsdMatrix(a), PsdMatrix(b)), std::sqrt(std::max(sq, 0.0)), 1e-8);
  }
}

TEST(Bures, DimensionMismatchThrows) {
  EXPECT_THROW(bures_distance(PsdMatrix::identity(2), PsdMatrix::identity(3)), DimensionError);
}

TEST(Gelbrich, Examples) {
  const PsdMatrix s(diag2(1.0, 2.0));
  EXPECT_NEAR(gelbrich_w2(Eigen::Vector2d(1, 2), s, Eigen::Vector2d(1, 2), s), 0.0, 1e-8);
  EXPECT_NEAR(gelbrich_w2(Eigen::Vector2d(1, 0), s, Eigen::Vector2d(0, 0), s), 1.0, 1e-8);
  const Vector zero = Vector::Zero(1);
  EXPECT_NEAR(gelbrich_w2(zero, PsdMatrix(Matrix::Constant(1, 1, 4.0)), zero,
                          PsdMatrix(Matrix::Constant(1, 1, 1.0))),
              1.0, 1e-12);
}

TEST(Riccati, ScalarHandArithmetic) {
  const PsdMatrix one(Matrix::Constant(1, 1, 1.0));
  const PsdMatrix out = riccati_step(one, Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0),
                                     one, one);
  EXPECT_NEAR(out.mat()(0, 0), 1.125, 1e-14);
}

TEST(Riccati, ZeroDynamicsReturnsSigmaW) {
  std::mt19937_64 rng(15);
  const PsdMatrix sw(random_psd(rng, 3, 0.1));
  const PsdMatrix out = riccati_step(PsdMatrix(random_psd(rng, 3, 0.1)), Matrix::Zero(3, 3),
                                     test::random_matrix(rng, 2, 3), sw,
                                     PsdMatrix(random_psd(rng, 2, 0.1)));
  EXPECT_LT((out.mat() - sw.mat()).norm(), 1e-14);
}

TEST(Dare, ScalarQuadraticFormula) {
  const PsdMatrix one(Matrix::Constant(1, 1, 1.0));
  const double expected = (0.25 + std::sqrt(0.0625 + 4.0)) / 2.0;
  const PsdMatrix p = dare_fixed_point(Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 1.0), one, one);
  EXPECT_NEAR(p.mat()(0, 0), expected, 1e-8);
  EXPECT_NEAR(expected, 1.13278, 1e-5);
}

TEST(Dare, ZeroDynamics) {
  const PsdMatrix sw(diag2(2.0, 3.0));
  const PsdMatrix p = dare_fixed_point(Matrix::Zero(2, 2), Matrix::Identity(2, 2), sw,
                                       PsdMatrix::identity(2));
  EXPECT_LT((p.mat() - sw.mat()).norm(), 1e-14);
}

TEST(Dare, BenchmarkResidual) {
  const NominalModel m = test::benchmark_model();
  const PsdMatrix p = dare_fixed_point(m.a, m.c, m.sigma_w, m.sigma_v);
  const PsdMatrix next = riccati_step(p, m.a, m.c, m.sigma_w, m.sigma_v);
  EXPECT_LT((next.mat() - p.mat()).norm(), 1e-9 * (1.0 + p.mat().norm()));
}

TEST(CtrbObsv, Examples) {
  Matrix c(1, 2);
  c << 1.0, 0.0;
  CtrbObsv r = check_ctrb_obsv(Matrix::Identity(2, 2), c, PsdMatrix::identity(2));
  EXPECT_TRUE(r.controllable);
  EXPECT_FALSE(r.observable);

  const NominalModel m = test::benchmark_model();
  r = check_ctrb_obsv(m.a, m.c, m.sigma_w);
  EXPECT_TRUE(r.controllable);
  EXPECT_TRUE(r.observable);

  r = check_ctrb_obsv(Matrix::Zero(2, 2), Matrix::Identity(2, 2), PsdMatrix::identity(2));
  EXPECT_TRUE(r.controllable);
  EXPECT_TRUE(r.observable);
}

TEST(CtrbObsv, RankDeficientNoiseOnIdentityDynamics) {
  const CtrbObsv r =
      check_ctrb_obsv(Matrix::Identity(2, 2), Matrix::Identity(2, 2), PsdMatrix(diag2(1.0, 0.0)));
  EXPECT_FALSE(r.controllable);
  EXPECT_TRUE(r.observable);
}

// Invariants.

TEST(MatopsProperty, EigReconstructionUpToDim12) {
  std::mt19937_64 rng(16);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index n = 1 + k % 12;
    const Matrix m = random_symmetric(rng, n);
    const SymEig e = sym_eig(SymMatrix(m));
    const Matrix rec = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    EXPECT_LT((rec - m).norm(), 1e-10 * static_cast<double>(n));
    EXPECT_LT((e.vectors.transpose() * e.vectors - Matrix::Identity(n, n)).norm(),
              1e-10 * static_cast<double>(n));
    for (Eigen::Index i = 1; i < n; ++i) EXPECT_GE(e.values(i - 1), e.values(i));
  }
}

TEST(MatopsProperty, MatrixInversionLemmaForm) {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 50; ++k) {
    const Matrix a = test::random_matrix(rng, 3, 3);
    const Matrix c = test::random_matrix(rng, 2, 3);
    const Matrix sw = random_psd(rng, 3, 0.1);
    const Matrix sv = random_psd(rng, 2, 0.1);
    const Matrix p = random_psd(rng, 3, 0.1);
    const Matrix s = c * p * c.transpose() + sv;
    const Matrix expected =
        a * (p - p * c.transpose() * s.inverse() * c * p) * a.transpose() + sw;
    const Matrix got =
        riccati_step(PsdMatrix(p), a, c, PsdMatrix(sw), PsdMatrix(sv)).mat();
    EXPECT_LT((got - expected).norm(), 1e-9 * (1.0 + expected.norm()));
  }
}

TEST(MatopsProperty, RiccatiMonotone) {
  std::mt19937_64 rng(18);
  for (int k = 0; k < 50; ++k) {
    const Matrix a = test::random_matrix(rng, 3, 3);
    const Matrix c = test::random_matrix(rng, 2, 3);
    const PsdMatrix sw(random_psd(rng, 3, 0.1));
    const PsdMatrix sv(random_psd(rng, 2, 0.1));
    const Matrix p2 = random_psd(rng, 3, 0.1);
    const Matrix p1 = p2 + random_psd(rng, 3);
    const Matrix d = riccati_step(PsdMatrix(p1), a, c, sw, sv).mat() -
                     riccati_step(PsdMatrix(p2), a, c, sw, sv).mat();
    EXPECT_GE(lambda_min(symmetrize(d)), -1e-9);
  }
}

TEST(MatopsProperty, BuresTraceLowerBound) {
  std::mt19937_64 rng(19);
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Index n = 1 + k % 5;
    const Matrix a = k % 3 == 0 ? test::random_low_rank_psd(rng, n, 1 + k % n) : random_psd(rng, n);
    const Matrix b = random_psd(rng, n);
    const double d = bures_distance(PsdMatrix(a), PsdMatrix(b));
    const double lb = std::sqrt(a.trace()) - std::sqrt(b.trace());
    EXPECT_GE(d * d, lb * lb - 1e-9 * (1.0 + a.trace() + b.trace()));
  }
}

TEST(MatopsProperty, VonNeumannTraceInequality) {
  std::mt19937_64 rng(20);
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Index n = 1 + k % 6;
    const Matrix a = random_psd(rng, n);
    const Matrix b = random_psd(rng, n);
    const Vector la = sym_eig(SymMatrix(a)).values;
    const Vector lb = sym_eig(SymMatrix(b)).values;
    const double tr = (a * b).trace();
    const double paired = la.dot(lb);
    const double slack = 1e-9 * (1.0 + std::abs(paired));
    EXPECT_LE(tr, paired + slack);
    EXPECT_LE(paired, la(0) * b.trace() + slack);
  }
}

}  // namespace
}  // namespace wdrkf
