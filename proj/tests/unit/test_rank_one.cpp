#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ronet/rank_one.hpp"

namespace ronet {
namespace {

using testing::jacobi_singular_values;
using testing::random_matrix;

double tail_energy(const std::vector<double>& sv, std::size_t from) {
  double acc = 0.0;
  for (std::size_t i = from; i < sv.size(); ++i) acc += sv[i] * sv[i];
  return std::sqrt(acc);
}

TEST(BestRankOne, DiagonalMatrix) {
  const Matrix x(2, 2, {2, 0, 0, 1});
  const SvdTriplet t = best_rank_one(x);
  EXPECT_NEAR(t.sigma, 2.0, 1e-12);
  EXPECT_NEAR(t.u[0], 1.0, 1e-9);
  EXPECT_NEAR(t.u[1], 0.0, 1e-9);
  EXPECT_NEAR(t.v[0], 1.0, 1e-9);
  const Matrix d = t.dyad();
  EXPECT_NEAR(d(0, 0), 2.0, 1e-9);
  EXPECT_NEAR(d(1, 1), 0.0, 1e-9);
}

TEST(BestRankOne, ReproducesADyad) {
  const std::vector<double> u = {1, -2, 0.5, 3}, v = {0.3, 1, -1};
  Matrix x(4, 3);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) x(i, j) = u[i] * v[j];
  const Matrix r = x - best_rank_one(x).dyad();
  EXPECT_LT(r.frobenius_norm(), 1e-8);
}

TEST(BestRankOne, UnitVectorsAndSignConvention) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Matrix x = random_matrix(6, 9, s);
    const SvdTriplet t = best_rank_one(x);
    double nu = 0, nv = 0;
    for (double a : t.u) nu += a * a;
    for (double a : t.v) nv += a * a;
    EXPECT_NEAR(std::sqrt(nu), 1.0, 1e-6);
    EXPECT_NEAR(std::sqrt(nv), 1.0, 1e-6);
    EXPECT_GE(t.sigma, 0.0);
    for (double a : t.u) {
      if (a != 0.0) {
        EXPECT_GT(a, 0.0);
        break;
      }
    }
  }
}

TEST(BestRankOne, ZeroMatrixGivesCanonicalVectors) {
  const SvdTriplet t = best_rank_one(Matrix(3, 2));
  EXPECT_EQ(t.sigma, 0.0);
  EXPECT_EQ(t.u[0], 1.0);
  EXPECT_EQ(t.v[0], 1.0);
}

TEST(BestRankOne, RejectsNonFiniteInput) {
  Matrix x(2, 2, 1.0);
  x(0, 1) = std::nan("");
  EXPECT_THROW(best_rank_one(x), ArgumentError);
}

TEST(BestRankOne, ResidualMatchesJacobiTail) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix x = random_matrix(8, 8, 100 + s);
    const auto sv = jacobi_singular_values(x);
    const double residual = (x - best_rank_one(x).dyad()).frobenius_norm();
    EXPECT_NEAR(residual, tail_energy(sv, 1), 1e-6 * tail_energy(sv, 1));
  }
}

TEST(BestRankOne, EckartYoungAgainstRandomDyads) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0, 1);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Matrix x = random_matrix(8, 8, 300 + s);
    const double best = (x - best_rank_one(x).dyad()).frobenius_norm();
    for (int k = 0; k < 100; ++k) {
      std::vector<double> u(8), v(8);
      double nu = 0, nv = 0;
      for (auto& a : u) nu += (a = n(rng)) * a;
      for (auto& a : v) nv += (a = n(rng)) * a;
      // Optimal scale for a fixed dyad is u^T x v with unit u, v.
      double proj = 0;
      for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) proj += u[i] * x(i, j) * v[j];
      proj /= std::sqrt(nu * nv);
      Matrix d(8, 8);
      for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) d(i, j) = proj * u[i] * v[j] / std::sqrt(nu * nv);
      EXPECT_LE(best, (x - d).frobenius_norm() + 1e-12);
    }
  }
}

TEST(SvdDecompose, IdentityOneLevel) {
  const Decomposition d = svd_decompose(Matrix::identity(2), 1);
  EXPECT_NEAR(d.sigmas[0][0], 1.0, 1e-12);
  EXPECT_NEAR(d.residual[0].frobenius_norm(), 1.0, 1e-9);
}

TEST(SvdDecompose, FullRankCapturesEverything) {
  const Matrix x = random_matrix(5, 7, 9);
  const Decomposition d = svd_decompose(x, 5);
  EXPECT_LT(d.residual[0].frobenius_norm(), 1e-6 * x.frobenius_norm());
}

TEST(SvdDecompose, ResidualEnergyMatchesOracleAndIsMonotone) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Matrix x = random_matrix(16, 16, 500 + s);
    const auto sv = jacobi_singular_values(x);
    double previous = x.frobenius_norm();
    for (std::size_t levels = 1; levels <= 5; ++levels) {
      const Decomposition d = svd_decompose(x, levels);
      const double e = d.residual[0].frobenius_norm();
      EXPECT_NEAR(e, tail_energy(sv, levels), 1e-5 * tail_energy(sv, levels));
      EXPECT_LE(e, previous + 1e-12);
      previous = e;
    }
  }
}

TEST(SvdDecompose, ReconstructionIdentityAndRankOneComponents) {
  const Matrix x = random_matrix(12, 10, 77);
  const Decomposition d = svd_decompose(x, 4);
  const Matrix back = d.reconstruct()[0];
  EXPECT_LT((back - x).max_abs(), 1e-4);
  for (std::size_t l = 0; l < 4; ++l) {
    const auto sv = jacobi_singular_values(d.components[l][0]);
    EXPECT_LE(sv[1], 1e-4 * sv[0]);
  }
}

TEST(SvdDecompose, LevelsBeyondRankAreZero) {
  const Decomposition d = svd_decompose(Matrix::identity(2), 4);
  EXPECT_EQ(d.components[2][0].max_abs(), 0.0);
  EXPECT_EQ(d.components[3][0].max_abs(), 0.0);
}

TEST(SvdDecompose, TransposeGivesTransposedComponents) {
  const Matrix x = random_matrix(7, 5, 12);
  const Decomposition a = svd_decompose(x, 3);
  const Decomposition b = svd_decompose(x.transpose(), 3);
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_NEAR(a.sigmas[l][0], b.sigmas[l][0], 1e-8);
    EXPECT_LT((a.components[l][0].transpose() - b.components[l][0]).max_abs(), 1e-6);
  }
}

TEST(SvdDecompose, ColorImagesPerChannel) {
  Image img(3, 6, 5);
  for (std::size_t c = 0; c < 3; ++c) img.set_plane(c, random_matrix(6, 5, 40 + c));
  const Decomposition d = svd_decompose(img, 2);
  ASSERT_EQ(d.channels(), 3u);
  for (std::size_t c = 0; c < 3; ++c) {
    const Decomposition single = svd_decompose(img.plane(c), 2);
    EXPECT_LT((single.components[0][0] - d.components[0][c]).max_abs(), 1e-12);
  }
  const Image back = low_rank_image(d);
  EXPECT_EQ(back.channels, 3u);
}

TEST(RankOneDefect, Cases) {
  Matrix dyad(3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) dyad(i, j) = (i + 1.0) * (j - 1.5);
  EXPECT_LT(rank_one_defect(dyad), 1e-6);
  EXPECT_NEAR(rank_one_defect(Matrix::identity(2)), 1.0, 1e-9);
  EXPECT_EQ(rank_one_defect(Matrix(3, 3)), 0.0);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Matrix x = random_matrix(6, 6, 900 + s);
    const auto sv = jacobi_singular_values(x);
    EXPECT_NEAR(rank_one_defect(x), sv[1] / sv[0], 1e-6);
  }
}

}  // namespace
}  // namespace ronet
