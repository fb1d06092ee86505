#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "geoprior/error.hpp"
#include "geoprior/linalg.hpp"
#include "geoprior/randvec.hpp"
#include "oracles.hpp"

using namespace geoprior;
constexpr double kPi = std::numbers::pi;

TEST(Sphere, SurfaceAreaKnownValues) {
  EXPECT_NEAR(sphere_surface_area(1), 2.0, 1e-12);
  EXPECT_NEAR(sphere_surface_area(2), 2 * kPi, 1e-12);
  EXPECT_NEAR(sphere_surface_area(3), 4 * kPi, 1e-12);
  EXPECT_NEAR(sphere_surface_area(4), 2 * kPi * kPi, 1e-12);
}

TEST(InnerProductPdf, LowDimensionClosedForms) {
  for (double x : {-0.9, -0.3, 0.0, 0.4, 0.95}) {
    EXPECT_NEAR(inner_product_pdf(2, x), 1.0 / (kPi * std::sqrt(1 - x * x)), 1e-12);
    EXPECT_NEAR(inner_product_pdf(3, x), 0.5, 1e-12);
    EXPECT_NEAR(inner_product_pdf(4, x), 2.0 / kPi * std::sqrt(1 - x * x), 1e-12);
  }
  EXPECT_TRUE(std::isinf(inner_product_pdf(2, 1.0)));
  EXPECT_EQ(inner_product_pdf(5, 1.0), 0.0);
}

TEST(InnerProductPdf, MatchesBetaFormAcrossDimensions) {
  for (std::size_t p : {5u, 16u, 64u, 512u, 4096u}) {
    for (double x : {-0.5, -0.1, 0.0, 0.05, 0.2}) {
      const double ref = oracle::inner_product_density(p, x);
      EXPECT_NEAR(inner_product_pdf(p, x), ref, 1e-10 * std::max(1.0, ref)) << p << " " << x;
    }
  }
}

TEST(InnerProductPdf, IntegratesToOneAgainstIndependentQuadrature) {
  for (std::size_t p : {3u, 8u, 64u, 512u}) {
    const double total = oracle::simpson([&](double x) { return inner_product_pdf(p, x); }, -1.0, 1.0, 200000);
    EXPECT_NEAR(total, 1.0, 1e-6) << p;
  }
  EXPECT_NEAR(inner_product_probability(2, -1.0, 1.0), 1.0, 1e-9);
}

TEST(AnglePdf, ChangeOfVariables) {
  for (std::size_t p : {2u, 3u, 8u, 64u, 512u}) {
    for (double t = 0.05; t < kPi; t += 0.1) {
      const double lhs = inner_product_pdf(p, std::cos(t)) * std::sin(t);
      EXPECT_NEAR(lhs, angle_pdf(p, t), 1e-9 * std::max(1.0, lhs)) << p << " " << t;
    }
  }
}

TEST(AngleCdf, EndpointsSymmetryAndMonotone) {
  for (std::size_t p : {2u, 3u, 10u, 100u}) {
    EXPECT_NEAR(angle_cdf(p, 0.0), 0.0, 1e-12);
    EXPECT_NEAR(angle_cdf(p, kPi), 1.0, 1e-8);
    EXPECT_NEAR(angle_cdf(p, kPi / 2), 0.5, 1e-8);
    double prev = 0;
    for (double t = 0.1; t < kPi; t += 0.1) {
      const double c = angle_cdf(p, t);
      EXPECT_GE(c, prev);
      prev = c;
    }
  }
  // P = 3: theta has density sin(theta)/2, CDF (1 - cos theta)/2.
  EXPECT_NEAR(angle_cdf(3, 1.0), (1 - std::cos(1.0)) / 2, 1e-9);
}

TEST(InnerProductCdf, ConsistentWithProbabilityAndTail) {
  const std::size_t p = 12;
  for (double d : {-0.7, -0.2, 0.0, 0.3, 0.8}) {
    EXPECT_NEAR(inner_product_cdf(p, d), inner_product_probability(p, -1.0, d), 1e-8);
    const double tail = inner_product_tail_probability(p, d);
    EXPECT_NEAR(tail, 1.0 - inner_product_probability(p, -std::abs(d), std::abs(d)), 1e-8);
  }
  EXPECT_NEAR(inner_product_tail_probability(p, 0.0), 1.0, 1e-9);
  // P = 3 is uniform on [-1, 1].
  EXPECT_NEAR(inner_product_cdf(3, 0.3), 0.65, 1e-9);
}

TEST(Randvec, DomainErrors) {
  EXPECT_THROW(inner_product_pdf(8, 1.5), Error);
  EXPECT_THROW(angle_pdf(8, -0.1), Error);
  EXPECT_THROW(inner_product_probability(8, 0.5, 0.2), Error);
  EXPECT_THROW(inner_product_pdf(1, 0.0), Error);
  Rng rng(0);
  EXPECT_THROW(mc_validate_pdf(8, 0, 10, rng), Error);
  EXPECT_THROW(ks_distance_inner_product(8, {}), Error);
}

TEST(AdaptiveSimpson, PolynomialsAndSmoothFunctions) {
  EXPECT_NEAR(adaptive_simpson([](double x) { return x * x * x; }, 0, 2), 4.0, 1e-12);
  EXPECT_NEAR(adaptive_simpson([](double x) { return std::sin(x); }, 0, kPi), 2.0, 1e-9);
}

TEST(Sampling, UnitVectorsAndOrthonormalBasis) {
  Rng rng(4);
  for (std::size_t p : {2u, 7u, 50u}) {
    const auto u = sample_unit_vector(p, rng);
    EXPECT_NEAR(norm2(u), 1.0, 1e-12);
    const Matrix q = sample_orthonormal_basis(p, rng);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) EXPECT_NEAR(dot(q.column(i), q.column(j)), i == j ? 1.0 : 0.0, 1e-10);
  }
  EXPECT_EQ(sample_orthonormal_basis(6, rng, 2).cols(), 2u);
}

TEST(MonteCarlo, HistogramAndKolmogorovSmirnov) {
  Rng rng(21);
  const auto h = mc_validate_pdf(16, 100000, 20, rng);
  EXPECT_EQ(h.bin_centers.size(), 20u);
  EXPECT_LT(h.max_abs_deviation, 0.05);
  double mass = 0;
  for (double e : h.empirical) mass += e * 0.1;
  EXPECT_NEAR(mass, 1.0, 1e-9);
  Rng rng2(22);
  const auto samples = sample_inner_products(16, 20000, rng2);
  // 1.63 / sqrt(n) is the 1% critical value.
  EXPECT_LT(ks_distance_inner_product(16, samples), 1.63 / std::sqrt(20000.0));
  // A wrong dimension is detected.
  EXPECT_GT(ks_distance_inner_product(4, samples), 0.1);
}

TEST(MonteCarlo, SingleBinAllowed) {
  Rng rng(2);
  const auto h = mc_validate_pdf(8, 1000, 1, rng);
  EXPECT_NEAR(h.empirical[0], 0.5, 1e-12);
  EXPECT_NEAR(h.analytic_bin_mean[0], 0.5, 1e-9);
}
