#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "geoprior/rng.hpp"

using geoprior::Rng;

TEST(Rng, EngineMatchesStandardMt19937_64) {
  // The engine sequence is fixed by the standard: the 10000th output of a
  // default-seeded mt19937_64 is 9981545732273789042.
  Rng rng(5489);
  std::uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = rng.next_u64();
  EXPECT_EQ(x, 9981545732273789042ULL);
}

TEST(Rng, UniformUsesTop53Bits) {
  Rng rng(17);
  std::mt19937_64 ref(17);
  for (int i = 0; i < 100; ++i) {
    const double expected = static_cast<double>(ref() >> 11) / 9007199254740992.0;
    EXPECT_EQ(rng.uniform(), expected);
  }
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.normal(), b.normal());
}

TEST(Rng, StreamsAreDistinctAndReproducible) {
  Rng s1 = Rng::stream(7, 1);
  Rng s2 = Rng::stream(7, 2);
  Rng s1b = Rng::stream(7, 1);
  int equal = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = s1.next_u64();
    equal += x == s2.next_u64();
    ASSERT_EQ(x, s1b.next_u64());
  }
  EXPECT_EQ(equal, 0);
  EXPECT_NE(geoprior::mix_seed(0, 0), geoprior::mix_seed(0, 1));
  EXPECT_NE(geoprior::mix_seed(0, 1), geoprior::mix_seed(1, 1));
}

TEST(Rng, UniformRangeAndMoments) {
  Rng rng(3);
  const int n = 200000;
  double sum = 0;
  double sq = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sq / n - mean * mean, 1.0 / 12.0, 2e-3);
}

TEST(Rng, NormalMoments) {
  Rng rng(11);
  const int n = 400000;
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s1 += x;
    s2 += x * x;
    s3 += x * x * x;
    s4 += x * x * x * x;
  }
  EXPECT_NEAR(s1 / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s3 / n, 0.0, 5.0 * std::sqrt(15.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 5.0 * std::sqrt(96.0 / n));
}

TEST(Rng, IndexIsUniformChiSquare) {
  Rng rng(99);
  const std::size_t k = 7;
  const int n = 70000;
  std::vector<int> counts(k, 0);
  for (int i = 0; i < n; ++i) {
    const auto j = rng.index(k);
    ASSERT_LT(j, k);
    ++counts[j];
  }
  double chi2 = 0;
  const double expected = static_cast<double>(n) / k;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 6 degrees of freedom; 0.999 quantile is 22.46.
  EXPECT_LT(chi2, 22.46);
}

TEST(Rng, IndexOfOneIsZero) {
  Rng rng(1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(rng.index(1), 0u);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng rng(5);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.shuffle(std::span<int>(w));
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}
