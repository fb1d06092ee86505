#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "geoprior/error.hpp"
#include "geoprior/geometry.hpp"
#include "geoprior/randvec.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace geoprior;
using testing_helpers::to_matrix;

namespace {

GeometryBasis basis_from(const oracle::Dense& q, int id = 0) {
  GeometryBasis g;
  g.class_id = id;
  g.eigenvectors = to_matrix(q);
  for (std::size_t i = 0; i < q.size(); ++i) g.eigenvalues.push_back(static_cast<double>(q.size() - i));
  g.sample_count = 1;
  return g;
}

FeatureSet two_class_set() {
  // Class 0 spread along x, class 1 along y.
  Matrix x(8, 2);
  std::vector<int> y;
  const double v[] = {-3, -1, 1, 3};
  for (int i = 0; i < 4; ++i) {
    x(i, 0) = v[i];
    // Offsets (+,-,-,+) are orthogonal to (-3,-1,1,3), so the axes decouple.
    const double off = (i == 0 || i == 3) ? 0.1 : -0.1;
    x(i, 1) = off;
    x(4 + i, 0) = off;
    x(4 + i, 1) = v[i];
  }
  for (int i = 0; i < 8; ++i) y.push_back(i < 4 ? 0 : 1);
  return make_feature_set(x, y, 3);
}

}  // namespace

TEST(GeometryOf, AxisAlignedClasses) {
  const FeatureSet set = two_class_set();
  const GeometryBasis g0 = geometry_of(set, 0);
  const GeometryBasis g1 = geometry_of(set, 1);
  EXPECT_NEAR(g0.eigenvalues[0], (9 + 1 + 1 + 9) / 4.0, 1e-12);
  EXPECT_NEAR(std::abs(g0.eigenvectors(0, 0)), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(g1.eigenvectors(1, 0)), 1.0, 1e-12);
  EXPECT_EQ(g0.sample_count, 4u);
  EXPECT_NEAR(geometry_similarity(g0, g1, 1), 0.0, 1e-12);
  EXPECT_NEAR(geometry_similarity(g0, g1, 2), 0.0, 1e-12);
}

TEST(GeometryOf, CenteringRemovesMean) {
  Matrix x(4, 2);
  const double pts[4][2] = {{10, 1}, {10, -1}, {12, 0}, {8, 0}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) x(i, j) = pts[i][j];
  const FeatureSet set = make_feature_set(x, {0, 0, 0, 0});
  const auto raw = geometry_of(set, 0, false);
  const auto cen = geometry_of(set, 0, true);
  EXPECT_NEAR(std::abs(raw.eigenvectors(0, 0)), 1.0, 1e-3);
  EXPECT_NEAR(cen.eigenvalues[0], 2.0, 1e-12);
  EXPECT_NEAR(cen.eigenvalues[1], 0.5, 1e-12);
}

TEST(GeometryOf, Errors) {
  const FeatureSet set = two_class_set();
  EXPECT_THROW(geometry_of(set, 5), Error);
  try {
    geometry_of(set, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyClass);
  }
}

TEST(GeometrySimilarity, SelfSimilarityEqualsK) {
  std::mt19937_64 gen(4);
  for (std::size_t p : {2u, 5u, 16u}) {
    const auto g = basis_from(oracle::random_orthonormal(p, gen));
    for (std::size_t k = 1; k <= p; ++k) EXPECT_NEAR(geometry_similarity(g, g, k), static_cast<double>(k), 1e-10);
  }
}

TEST(GeometrySimilarity, MatchesOracleAndIsBounded) {
  std::mt19937_64 gen(5);
  for (int t = 0; t < 50; ++t) {
    const std::size_t p = 2 + t % 12;
    const auto qa = oracle::random_orthonormal(p, gen);
    const auto qb = oracle::random_orthonormal(p, gen);
    const auto a = basis_from(qa), b = basis_from(qb);
    for (std::size_t k = 1; k <= p; ++k) {
      const double s = geometry_similarity(a, b, k);
      EXPECT_NEAR(s, oracle::paired_similarity(qa, qb, k), 1e-12);
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, static_cast<double>(k) + 1e-12);
      EXPECT_NEAR(s, geometry_similarity(b, a, k), 1e-14);
    }
  }
}

TEST(GeometrySimilarity, PermutedBasisGivesZero) {
  // Cyclically shifted columns of an orthonormal basis are pairwise orthogonal.
  std::mt19937_64 gen(6);
  const std::size_t p = 7;
  const auto q = oracle::random_orthonormal(p, gen);
  oracle::Dense shifted = q;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) shifted[i][j] = q[i][(j + 1) % p];
  EXPECT_NEAR(geometry_similarity(basis_from(q), basis_from(shifted), p), 0.0, 1e-10);
}

TEST(GeometrySimilarity, SignFlipInvariance) {
  std::mt19937_64 gen(7);
  std::bernoulli_distribution flip(0.5);
  for (int t = 0; t < 30; ++t) {
    const std::size_t p = 3 + t % 10;
    const auto qa = oracle::random_orthonormal(p, gen);
    auto qb = oracle::random_orthonormal(p, gen);
    const double before = geometry_similarity(basis_from(qa), basis_from(qb), p);
    for (std::size_t j = 0; j < p; ++j)
      if (flip(gen))
        for (std::size_t i = 0; i < p; ++i) qb[i][j] = -qb[i][j];
    EXPECT_NEAR(geometry_similarity(basis_from(qa), basis_from(qb), p), before, 1e-12);
  }
}

TEST(GeometrySimilarity, ArgumentErrors) {
  std::mt19937_64 gen(1);
  const auto a = basis_from(oracle::random_orthonormal(3, gen));
  const auto b = basis_from(oracle::random_orthonormal(4, gen));
  EXPECT_THROW(geometry_similarity(a, a, 0), Error);
  EXPECT_THROW(geometry_similarity(a, a, 4), Error);
  EXPECT_THROW(geometry_similarity(a, b, 1), Error);
  EXPECT_THROW(alignment_matrix(a, b), Error);
}

TEST(AlignmentMatrix, DiagonalMassEqualsSimilarity) {
  std::mt19937_64 gen(8);
  const auto a = basis_from(oracle::random_orthonormal(6, gen));
  const auto b = basis_from(oracle::random_orthonormal(6, gen));
  const Matrix m = alignment_matrix(a, b);
  for (std::size_t k = 1; k <= 6; ++k) EXPECT_NEAR(diagonal_mass(m, k), geometry_similarity(a, b, k), 1e-12);
  // Rows of an orthogonal change of basis have unit norm.
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(norm2(m.row(i)), 1.0, 1e-10);
  EXPECT_THROW(diagonal_mass(m, 7), Error);
}

TEST(TopKRatio, KnownSpectrum) {
  GeometryBasis g;
  g.eigenvalues = {4, 2, 1, 1};
  g.eigenvectors = Matrix::identity(4);
  EXPECT_DOUBLE_EQ(top_k_eigenvalue_ratio(g, 1), 0.5);
  EXPECT_DOUBLE_EQ(top_k_eigenvalue_ratio(g, 4), 1.0);
  EXPECT_THROW(top_k_eigenvalue_ratio(g, 0), Error);
  g.eigenvalues = {0, 0, 0, 0};
  EXPECT_THROW(top_k_eigenvalue_ratio(g, 2), Error);
}

TEST(SimilarityMatrix, SymmetricWithKOnDiagonal) {
  std::mt19937_64 gen(9);
  std::vector<GeometryBasis> gs;
  for (int i = 0; i < 4; ++i) gs.push_back(basis_from(oracle::random_orthonormal(5, gen), i));
  const Matrix m = similarity_matrix(gs, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(m(i, i), 3.0, 1e-10);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(m(i, j), m(j, i));
  }
}

TEST(ClassSimilarity, AveragesAndRanksWithTieBreak) {
  // Class 0 rows average to (., 0.2, 0.2, 0.6); class 1 to (0.5, ., 0.1, 0.4).
  const Matrix scores = Matrix::from_rows({{0.0, 0.3, 0.1, 0.6},
                                           {0.0, 0.1, 0.3, 0.6},
                                           {0.5, 0.0, 0.1, 0.4},
                                           {0.3, 0.3, 0.2, 0.2},
                                           {0.1, 0.6, 0.3, 0.0}});
  const std::vector<int> labels{0, 0, 1, 2, 3};
  const auto table = class_similarity_table(scores, labels);
  ASSERT_EQ(table.num_classes(), 4u);
  const auto& r0 = table.ranking(0);
  ASSERT_EQ(r0.size(), 3u);
  EXPECT_EQ(r0[0].label, 3);
  EXPECT_NEAR(r0[0].score, 0.6, 1e-12);
  EXPECT_EQ(r0[1].label, 1);  // tie 0.2 vs 0.2: lower index first
  EXPECT_EQ(r0[2].label, 2);
  EXPECT_EQ(table.most_similar(1), 0);
  EXPECT_EQ(table.ranking(2)[0].label, 0);  // 0.3 == 0.3 tie with class 1
  EXPECT_EQ(most_similar_head(0, table, std::vector<int>{1, 2}), 1);
  EXPECT_THROW(most_similar_head(0, table, std::vector<int>{}), Error);
  EXPECT_THROW(table.ranking(4), Error);
}

TEST(ClassSimilarity, Errors) {
  const Matrix scores = Matrix::from_rows({{0.5, 0.5, 0.0}, {0.2, 0.8, 0.0}});
  try {
    class_similarity_table(scores, std::vector<int>{0, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingClass);
  }
  EXPECT_THROW(class_similarity_table(scores, std::vector<int>{0}), Error);
  EXPECT_THROW(class_similarity_table(scores, std::vector<int>{0, 3}), Error);
}

TEST(HeadTailSplit, ThresholdAndExplicit) {
  const std::vector<std::size_t> counts{500, 100, 99, 3};
  const auto s = split_head_tail(counts, SplitConfig{{}, 100});
  EXPECT_EQ(s.head, (std::vector<int>{0, 1}));
  EXPECT_EQ(s.tail, (std::vector<int>{2, 3}));
  const auto e = split_head_tail(counts, SplitConfig{{3}, 100});
  EXPECT_EQ(e.head, (std::vector<int>{3}));
  EXPECT_EQ(e.tail, (std::vector<int>{0, 1, 2}));
}

TEST(RandomBaseline, MatchesAnalyticMean) {
  // E|<u, v>| = Gamma(P/2) / (sqrt(pi) Gamma((P+1)/2)); paired columns are
  // individually uniform, so the top_p sum has top_p times that mean.
  for (std::size_t p : {4u, 16u}) {
    const double e1 = std::exp(std::lgamma(p / 2.0) - std::lgamma((p + 1) / 2.0)) / std::sqrt(M_PI);
    Rng rng(31);
    const auto base = random_basis_similarity(p, 3, 4000, rng);
    EXPECT_EQ(base.trials, 4000u);
    EXPECT_NEAR(base.mean, 3 * e1, 4 * base.stddev / std::sqrt(4000.0));
    EXPECT_GT(base.stddev, 0.0);
  }
  Rng rng(1);
  EXPECT_THROW(random_basis_similarity(4, 2, 1, rng), Error);
}
