#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "geoprior/linalg.hpp"
#include "geoprior/rng.hpp"

namespace geoprior {

// Distributions of angles and inner products between uniformly random unit
// vectors. For a unit vector x uniform on the sphere in R^P and any fixed unit
// vector y, delta = <x, y> has density
//
//   f_P(delta) = Gamma(P/2) / (Gamma((P-1)/2) sqrt(pi)) * (1 - delta^2)^((P-3)/2)
//
// and the angle theta = acos(delta) has density proportional to sin^(P-2).
// Gamma ratios are evaluated in log space so large dimensions do not overflow.

/// Surface area of the unit sphere in R^n, 2 pi^(n/2) / Gamma(n/2).
double sphere_surface_area(std::size_t n);

/// Gamma(n/2) / (Gamma((n-1)/2) sqrt(pi)), shared by both densities. n >= 2.
double sphere_density_constant(std::size_t n);

/// Density of the angle between two random unit vectors in R^n, theta in [0, pi].
double angle_pdf(std::size_t n, double theta);

/// P(angle <= theta), integrated numerically from angle_pdf.
double angle_cdf(std::size_t n, double theta);

/// Density of the inner product of two random unit vectors in R^P.
/// Returns +inf at |delta| = 1 when P = 2.
double inner_product_pdf(std::size_t p, double delta);

/// P(<u, v> <= delta), via angle_cdf.
double inner_product_cdf(std::size_t p, double delta);

/// P(|<u, v>| >= |delta|): how likely an observed alignment is by chance.
double inner_product_tail_probability(std::size_t p, double delta);

/// Integral of f_P over [a, b] with -1 <= a <= b <= 1, evaluated in the
/// angle variable so the P = 2 endpoint singularity is never sampled.
double inner_product_probability(std::size_t p, double a, double b);

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-9,
                        int max_depth = 50);

/// Uniform draw from the unit sphere in R^P (normalized Gaussian vector).
std::vector<double> sample_unit_vector(std::size_t p, Rng& rng);

/// Haar-random orthonormal basis; column i is the i-th basis vector.
/// With `columns` > 0 only the first `columns` vectors are drawn.
Matrix sample_orthonormal_basis(std::size_t p, Rng& rng, std::size_t columns = 0);

struct HistogramReport {
  std::size_t dim = 0;
  std::size_t draws = 0;
  std::vector<double> bin_centers;
  std::vector<double> empirical;          // count / (draws * bin width)
  std::vector<double> analytic_midpoint;  // f_P at the bin center
  std::vector<double> analytic_bin_mean;  // exact bin probability / bin width
  double max_abs_deviation = 0.0;         // empirical vs analytic_bin_mean
};

/// Histograms <u, v> over `draws` pairs of random unit vectors on [-1, 1].
HistogramReport mc_validate_pdf(std::size_t p, std::size_t draws, std::size_t bins, Rng& rng);

/// Draws `count` inner products of independent random unit-vector pairs.
std::vector<double> sample_inner_products(std::size_t p, std::size_t count, Rng& rng);

/// Kolmogorov-Smirnov distance between samples of <u, v> and inner_product_cdf.
double ks_distance_inner_product(std::size_t p, std::span<const double> samples);

}  // namespace geoprior
