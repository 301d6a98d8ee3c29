#include <gtest/gtest.h>

#include "mirrorflow/numerics.hpp"

using namespace mirrorflow;

TEST(Kron, MixedProductRule) {
  SeededRng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_gaussian_matrix(rng, 2, 3), c = random_gaussian_matrix(rng, 3, 2);
    const Matrix b = random_gaussian_matrix(rng, 3, 2), d = random_gaussian_matrix(rng, 2, 4);
    const Matrix lhs = kron(a, b) * kron(c, d);
    const Matrix rhs = kron(a * c, b * d);
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Kron, EntriesByDefinition) {
  Matrix a(2, 2), b(1, 2);
  a << 1, 2, 3, 4;
  b << 5, 6;
  Matrix want(2, 4);
  want << 5, 6, 10, 12, 15, 18, 20, 24;
  EXPECT_EQ(kron(a, b), want);
}

TEST(Pseudoinverse, MoorePenroseIdentitiesFullRowRank) {
  SeededRng rng(2);
  for (auto [r, c] : {std::pair<Index, Index>{1, 1}, {3, 7}, {10, 40}, {20, 60}}) {
    const Matrix a = random_gaussian_matrix(rng, r, c);
    const Matrix p = pseudoinverse(a);
    EXPECT_LE((a * p * a - a).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((p * a * p - p).cwiseAbs().maxCoeff(), 1e-9);
    const Matrix ap = a * p, pa = p * a;
    EXPECT_LE((ap - ap.transpose()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((pa - pa.transpose()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Pseudoinverse, RankDeficientGoesThroughSvd) {
  Matrix a(3, 2);
  a << 1, 2, 2, 4, 3, 6;  // rank one: a = u v^T with u = (1,2,3), v = (1,2)
  const Matrix p = pseudoinverse(a);
  // rank one pseudoinverse is a^T / (|u|^2 |v|^2)
  const Matrix want = a.transpose() / (14.0 * 5.0);
  EXPECT_LE((p - want).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(numerical_rank(a), 1);
}

TEST(Pseudoinverse, ZeroMatrixIsRejected) {
  EXPECT_THROW(pseudoinverse(Matrix::Zero(2, 3)), DomainError);
  EXPECT_THROW(pseudoinverse(Matrix(0, 0)), SizeError);
}

TEST(Rng, SameSeedSameStream) {
  SeededRng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, SplitMix64ReferenceValues) {
  // first outputs of SplitMix64 seeded with 0, as published with the generator
  SeededRng r(0);
  EXPECT_EQ(r.next_u64(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(r.next_u64(), 0x6E789E6AA1B965F4ULL);
}

TEST(Rng, UniformAndGaussianMoments) {
  SeededRng r(5);
  const int n = 200000;
  double su = 0, sg = 0, sg2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double g = r.gaussian();
    sg += g;
    sg2 += g * g;
  }
  EXPECT_NEAR(su / n, 0.5, 5e-3);
  EXPECT_NEAR(sg / n, 0.0, 1e-2);
  EXPECT_NEAR(sg2 / n, 1.0, 1e-2);
}

TEST(Rng, SplitStreamsAreDistinctAndReproducible) {
  SeededRng base(9);
  auto a = base.split(0), b = base.split(1), a2 = base.split(0);
  const auto x = a.next_u64();
  EXPECT_EQ(x, a2.next_u64());
  EXPECT_NE(x, b.next_u64());
}

TEST(Random, OrthonormalRows) {
  SeededRng rng(3);
  const Matrix q = random_orthonormal_rows(rng, 10, 60);
  EXPECT_LE((q * q.transpose() - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(random_orthonormal_rows(rng, 5, 4), SizeError);
}

TEST(Random, PsdIsSymmetricPositiveSemidefinite) {
  SeededRng rng(4);
  const Matrix p = random_psd(rng, 5);
  EXPECT_EQ((p - p.transpose()).cwiseAbs().maxCoeff(), 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
}

TEST(Grid, GeometricEndpointsAndDensity) {
  const auto g = geometric_grid(1.0, 100.0, 40);
  ASSERT_EQ(g.size(), 81u);
  EXPECT_EQ(g.front(), 1.0);
  EXPECT_EQ(g.back(), 100.0);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(std::log10(g[i] / g[i - 1]), 1.0 / 40, 1e-12);
  EXPECT_THROW(geometric_grid(0.0, 1.0, 10), ParameterError);
  EXPECT_THROW(geometric_grid(2.0, 1.0, 10), ParameterError);
}

TEST(Sizes, RequireSizeNamesTheArgument) {
  try {
    require_size(3, 4, "thing");
    FAIL();
  } catch (const SizeError& e) {
    EXPECT_NE(std::string(e.what()).find("thing"), std::string::npos);
  }
}
