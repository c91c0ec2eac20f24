#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "slaterank/numerics.hpp"
#include "slaterank/random.hpp"

using namespace slaterank;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (double& v : m.data()) v = standard_normal(rng);
  return m;
}

Matrix random_spd(Rng& rng, std::size_t n) {
  const Matrix g = random_matrix(rng, n, n);
  Matrix a = multiply(g, transpose(g));
  for (std::size_t i = 0; i < n; ++i) a(i, i) += 0.1;
  return a;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  return e;
}

}  // namespace

TEST(Cholesky, IdentityFactorsToIdentity) {
  const auto f = cholesky(Matrix::identity(3));
  EXPECT_EQ(f.lower(), Matrix::identity(3));
}

TEST(Cholesky, TwoByTwo) {
  const auto f = cholesky(Matrix{{4, 2}, {2, 3}});
  EXPECT_DOUBLE_EQ(f.lower()(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(f.lower()(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(f.lower()(1, 0), 1.0);
  EXPECT_NEAR(f.lower()(1, 1), std::sqrt(2.0), 1e-15);
}

TEST(Cholesky, IndefiniteThrows) {
  EXPECT_THROW(cholesky(Matrix{{1, 2}, {2, 1}}), NotPositiveDefinite);
  EXPECT_THROW(cholesky(Matrix(2, 2)), NotPositiveDefinite);
  EXPECT_THROW(cholesky(Matrix(2, 3)), DimensionMismatch);
}

TEST(Cholesky, ReconstructsRandomSpdUpTo64) {
  Rng rng(7);
  for (std::size_t n : {1u, 2u, 5u, 16u, 33u, 64u}) {
    const Matrix a = random_spd(rng, n);
    const auto f = cholesky(a);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GT(f.lower()(i, i), 0.0);
      for (std::size_t j = i + 1; j < n; ++j) EXPECT_EQ(f.lower()(i, j), 0.0);
    }
    EXPECT_LE(frobenius_norm(subtract(f.reconstruct(), a)) / frobenius_norm(a), 1e-9) << n;
  }
}

TEST(Cholesky, LogDetMatchesEigen) {
  Rng rng(3);
  const Matrix a = random_spd(rng, 7);
  EXPECT_NEAR(cholesky(a).log_det(), std::log(to_eigen(a).determinant()), 1e-9);
}

TEST(SolveSpd, Examples) {
  EXPECT_EQ(solve_spd(Matrix::identity(2), Vec{3, 4}), (Vec{3, 4}));
  const Vec a = solve_spd(Matrix{{2, 0}, {0, 1}}, Vec{1, 0});
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], 0.0);
  const Vec b = solve_spd(Matrix{{2, 1}, {1, 2}}, Vec{3, 3});
  EXPECT_NEAR(b[0], 1.0, 1e-15);
  EXPECT_NEAR(b[1], 1.0, 1e-15);
  EXPECT_THROW(solve_spd(Matrix::identity(2), Vec{1, 2, 3}), DimensionMismatch);
}

TEST(SolveSpd, RelativeResidual) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial);
    const Matrix a = random_spd(rng, n);
    Vec rhs(n);
    for (double& v : rhs) v = standard_normal(rng);
    const Vec y = solve_spd(a, rhs);
    const Vec ay = matvec(a, y);
    Vec r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = ay[i] - rhs[i];
    EXPECT_LE(norm(r) / norm(rhs), 1e-9);
  }
}

TEST(QuadForm, Examples) {
  EXPECT_DOUBLE_EQ(quad_form(Matrix::identity(2), Vec{3, 4}), 25.0);
  EXPECT_NEAR(quad_form(Matrix{{2, 0}, {0, 1}}, Vec{1, 1}), 1.5, 1e-15);
  EXPECT_EQ(quad_form(Matrix{{2, 1}, {1, 2}}, Vec{0, 0}), 0.0);
}

TEST(QuadForm, NonNegativeOnSpd) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix a = random_spd(rng, 6);
    Vec x(6);
    for (double& v : x) v = standard_normal(rng);
    EXPECT_GE(quad_form(a, x), -1e-12);
  }
}

TEST(TruncatedSvd, Diagonal) {
  const auto s = truncated_svd(Matrix{{3, 0, 0}, {0, 2, 0}, {0, 0, 1}}, 2);
  ASSERT_EQ(s.values.size(), 2u);
  EXPECT_NEAR(s.values[0], 3.0, 1e-12);
  EXPECT_NEAR(s.values[1], 2.0, 1e-12);
}

TEST(TruncatedSvd, RankOneExact) {
  const Vec u{1, -2, 0.5, 3}, v{2, 1, -1};
  Matrix m(4, 3);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) m(i, j) = u[i] * v[j];
  const auto s = truncated_svd(m, 1);
  EXPECT_LE(frobenius_norm(subtract(reconstruct(s), m)), 1e-9);
}

TEST(TruncatedSvd, MatchesFullDecompositionOracle) {
  Rng rng(42);
  for (auto [r, c] : {std::pair{6u, 4u}, std::pair{4u, 6u}}) {
    const Matrix m = random_matrix(rng, r, c);
    const auto s = truncated_svd(m, 4);
    Eigen::JacobiSVD<Eigen::MatrixXd> oracle(to_eigen(m), Eigen::ComputeThinU | Eigen::ComputeThinV);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(s.values[j], oracle.singularValues()(j), 1e-8);
    EXPECT_LE(frobenius_norm(subtract(reconstruct(s), m)), 1e-8);
    // Factor columns agree with the oracle up to sign.
    for (std::size_t j = 0; j < 4; ++j) {
      double d = 0.0;
      for (std::size_t i = 0; i < r; ++i) d += s.left(i, j) * oracle.matrixU()(i, j);
      EXPECT_NEAR(std::abs(d), 1.0, 1e-8);
    }
  }
}

TEST(TruncatedSvd, SortedAndOrthonormal) {
  Rng rng(9);
  const Matrix m = random_matrix(rng, 12, 7);
  const auto s = truncated_svd(m, 5);
  for (std::size_t j = 0; j + 1 < 5; ++j) EXPECT_GE(s.values[j], s.values[j + 1]);
  for (double v : s.values) EXPECT_GE(v, 0.0);
  for (const Matrix* f : {&s.left, &s.right}) {
    const Matrix g = multiply(transpose(*f), *f);
    EXPECT_LE(frobenius_norm(subtract(g, Matrix::identity(5))), 1e-8);
  }
}

TEST(TruncatedSvd, RankDeficientStillOrthonormal) {
  Matrix m(5, 3);
  for (std::size_t i = 0; i < 5; ++i) m(i, 0) = double(i + 1);
  const auto s = truncated_svd(m, 3);
  EXPECT_NEAR(s.values[1], 0.0, 1e-9);
  const Matrix g = multiply(transpose(s.left), s.left);
  EXPECT_LE(frobenius_norm(subtract(g, Matrix::identity(3))), 1e-8);
}

TEST(TruncatedSvd, RankTooLarge) {
  EXPECT_THROW(truncated_svd(Matrix(3, 2), 3), RankTooLarge);
}

TEST(MinEigenBound, Examples) {
  const double id = min_eigen_bound(Matrix::identity(4));
  EXPECT_LE(id, 1.0);
  EXPECT_GE(id, 1.0 - 1e-9);
  EXPECT_LE(min_eigen_bound(Matrix{{1, 2}, {2, 1}}), -1.0 + 1e-9);
  EXPECT_NEAR(min_eigen_bound(Matrix(3, 3)), 0.0, 1e-12);
}

TEST(MinEigenBound, BoundsEigenOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a = random_matrix(rng, 6, 6);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(a));
    const double lo = es.eigenvalues().minCoeff();
    const double b = min_eigen_bound(a);
    EXPECT_LE(b, lo + 1e-12);
    EXPECT_GE(b, lo - 1e-9);
  }
}

TEST(Matrix, SymmetryCheck) {
  EXPECT_TRUE(is_symmetric(Matrix{{1, 2}, {2, 1}}));
  EXPECT_FALSE(is_symmetric(Matrix{{1, 2}, {2.1, 1}}));
  EXPECT_FALSE(is_symmetric(Matrix(2, 3)));
}

TEST(Random, DeriveSeedSeparatesStreams) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(2, 2, 3));
  EXPECT_EQ(stable_hash(""), 0xcbf29ce484222325ULL);
}
