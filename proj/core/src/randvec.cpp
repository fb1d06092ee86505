#include "geoprior/randvec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "geoprior/error.hpp"

namespace geoprior {

namespace {

void require_dim(std::size_t n, std::size_t min, const char* what) {
  if (n < min) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(what) + ": dimension must be >= " + std::to_string(min));
  }
}

void require_angle(double theta, const char* what) {
  if (!(theta >= 0.0 && theta <= std::numbers::pi)) {
    throw Error(ErrorCode::OutOfDomain, std::string(what) + ": theta outside [0, pi]");
  }
}

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                    double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// f_n(theta) with the normalizing constant hoisted out of quadrature loops.
struct AngleDensity {
  explicit AngleDensity(std::size_t n)
      : exponent(static_cast<double>(n) - 2.0), constant(sphere_density_constant(n)), log_constant(std::log(constant)) {}

  double operator()(double theta) const {
    if (exponent == 0.0) return constant;
    const double s = std::sin(theta);
    if (s <= 0.0) return 0.0;
    return std::exp(log_constant + exponent * std::log(s));
  }

  double exponent;
  double constant;
  double log_constant;
};

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth) {
  if (a == b) return 0.0;
  // Splitting into quarters first keeps narrow central peaks from being missed.
  constexpr int kPieces = 4;
  const double h = (b - a) / kPieces;
  double total = 0.0;
  for (int i = 0; i < kPieces; ++i) {
    const double lo = a + i * h;
    const double hi = (i + 1 == kPieces) ? b : lo + h;
    const double flo = f(lo);
    const double fhi = f(hi);
    const double fmid = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    total += simpson_step(f, lo, hi, flo, fmid, fhi, whole, tol / kPieces, max_depth);
  }
  return total;
}

double sphere_surface_area(std::size_t n) {
  require_dim(n, 1, "sphere_surface_area");
  const double half = 0.5 * static_cast<double>(n);
  return 2.0 * std::exp(half * std::log(std::numbers::pi) - std::lgamma(half));
}

double sphere_density_constant(std::size_t n) {
  require_dim(n, 2, "sphere_density_constant");
  const double nd = static_cast<double>(n);
  return std::exp(std::lgamma(0.5 * nd) - std::lgamma(0.5 * (nd - 1.0)) - 0.5 * std::log(std::numbers::pi));
}

double angle_pdf(std::size_t n, double theta) {
  require_dim(n, 2, "angle_pdf");
  require_angle(theta, "angle_pdf");
  return AngleDensity(n)(theta);
}

double angle_cdf(std::size_t n, double theta) {
  require_dim(n, 2, "angle_cdf");
  require_angle(theta, "angle_cdf");
  if (theta == 0.0) return 0.0;
  // Integrate the shorter side; f_n is symmetric about pi/2.
  const double half = 0.5 * std::numbers::pi;
  const AngleDensity pdf(n);
  if (theta <= half) {
    return std::clamp(adaptive_simpson(pdf, 0.0, theta), 0.0, 1.0);
  }
  const double upper = adaptive_simpson(pdf, theta, std::numbers::pi);
  return std::clamp(1.0 - upper, 0.0, 1.0);
}

double inner_product_pdf(std::size_t p, double delta) {
  require_dim(p, 2, "inner_product_pdf");
  if (!(delta >= -1.0 && delta <= 1.0)) {
    throw Error(ErrorCode::OutOfDomain, "inner_product_pdf: |delta| > 1");
  }
  const double c = sphere_density_constant(p);
  const double base = 1.0 - delta * delta;
  if (p == 3) return c;
  if (base <= 0.0) {
    return p == 2 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  const double exponent = 0.5 * (static_cast<double>(p) - 3.0);
  return std::exp(std::log(c) + exponent * std::log(base));
}

double inner_product_probability(std::size_t p, double a, double b) {
  require_dim(p, 2, "inner_product_probability");
  if (!(a >= -1.0 && b <= 1.0 && a <= b)) {
    throw Error(ErrorCode::OutOfDomain, "inner_product_probability: need -1 <= a <= b <= 1");
  }
  // delta = cos(theta) maps [a, b] onto [acos(b), acos(a)].
  const double lo = std::acos(b);
  const double hi = std::acos(a);
  return adaptive_simpson(AngleDensity(p), lo, hi);
}

double inner_product_cdf(std::size_t p, double delta) {
  if (!(delta >= -1.0 && delta <= 1.0)) {
    throw Error(ErrorCode::OutOfDomain, "inner_product_cdf: |delta| > 1");
  }
  return 1.0 - angle_cdf(p, std::acos(delta));
}

double inner_product_tail_probability(std::size_t p, double delta) {
  if (!(delta >= -1.0 && delta <= 1.0)) {
    throw Error(ErrorCode::OutOfDomain, "inner_product_tail_probability: |delta| > 1");
  }
  const double d = std::abs(delta);
  const double inside = inner_product_probability(p, -d, d);
  return std::clamp(1.0 - inside, 0.0, 1.0);
}

std::vector<double> sample_unit_vector(std::size_t p, Rng& rng) {
  require_dim(p, 1, "sample_unit_vector");
  std::vector<double> v(p);
  for (;;) {
    for (double& x : v) x = rng.normal();
    const double n = norm2(v);
    if (n >= 1e-12) {
      for (double& x : v) x /= n;
      return v;
    }
  }
}

Matrix sample_orthonormal_basis(std::size_t p, Rng& rng, std::size_t columns) {
  require_dim(p, 1, "sample_orthonormal_basis");
  const std::size_t k = columns == 0 ? p : std::min(columns, p);
  // Gram-Schmidt on Gaussian columns, two passes per column.
  std::vector<std::vector<double>> cols;
  cols.reserve(k);
  while (cols.size() < k) {
    std::vector<double> v(p);
    for (double& x : v) x = rng.normal();
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : cols) {
        const double proj = dot(v, q);
        for (std::size_t i = 0; i < p; ++i) v[i] -= proj * q[i];
      }
    }
    const double n = norm2(v);
    if (n < 1e-10) continue;
    for (double& x : v) x /= n;
    cols.push_back(std::move(v));
  }
  Matrix basis(p, k);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t r = 0; r < p; ++r) basis(r, c) = cols[c][r];
  return basis;
}

std::vector<double> sample_inner_products(std::size_t p, std::size_t count, Rng& rng) {
  std::vector<double> out(count);
  for (auto& d : out) {
    const auto u = sample_unit_vector(p, rng);
    const auto v = sample_unit_vector(p, rng);
    d = std::clamp(dot(u, v), -1.0, 1.0);
  }
  return out;
}

HistogramReport mc_validate_pdf(std::size_t p, std::size_t draws, std::size_t bins, Rng& rng) {
  require_dim(p, 2, "mc_validate_pdf");
  if (draws == 0 || bins == 0) {
    throw Error(ErrorCode::InvalidArgument, "mc_validate_pdf: draws and bins must be positive");
  }
  const double width = 2.0 / static_cast<double>(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (std::size_t i = 0; i < draws; ++i) {
    const auto u = sample_unit_vector(p, rng);
    const auto v = sample_unit_vector(p, rng);
    const double d = std::clamp(dot(u, v), -1.0, 1.0);
    auto bin = static_cast<std::size_t>((d + 1.0) / width);
    ++counts[std::min(bin, bins - 1)];
  }

  HistogramReport report;
  report.dim = p;
  report.draws = draws;
  for (std::size_t b = 0; b < bins; ++b) {
    const double lo = -1.0 + static_cast<double>(b) * width;
    const double hi = (b + 1 == bins) ? 1.0 : lo + width;
    const double center = 0.5 * (lo + hi);
    const double empirical = static_cast<double>(counts[b]) / (static_cast<double>(draws) * width);
    const double bin_mean = inner_product_probability(p, lo, hi) / width;
    report.bin_centers.push_back(center);
    report.empirical.push_back(empirical);
    report.analytic_midpoint.push_back(inner_product_pdf(p, center));
    report.analytic_bin_mean.push_back(bin_mean);
    report.max_abs_deviation = std::max(report.max_abs_deviation, std::abs(empirical - bin_mean));
  }
  return report;
}

double ks_distance_inner_product(std::size_t p, std::span<const double> samples) {
  require_dim(p, 2, "ks_distance_inner_product");
  if (samples.empty()) {
    throw Error(ErrorCode::EmptyInput, "ks_distance_inner_product: no samples");
  }
  // Work in the angle variable: sorted descending delta is ascending theta, and
  // the CDF of delta at d equals 1 - F_theta(acos d).
  std::vector<double> angles(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) angles[i] = std::acos(std::clamp(samples[i], -1.0, 1.0));
  std::sort(angles.begin(), angles.end());

  const AngleDensity pdf(p);
  const double n = static_cast<double>(angles.size());
  double theta_cdf = 0.0;
  double prev = 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    theta_cdf += adaptive_simpson(pdf, prev, angles[i], 1e-12);
    prev = angles[i];
    const double f = std::clamp(theta_cdf, 0.0, 1.0);
    worst = std::max({worst, std::abs(static_cast<double>(i + 1) / n - f), std::abs(f - static_cast<double>(i) / n)});
  }
  return worst;
}

}  // namespace geoprior
