#pragma once

// Reference implementations used only by tests. They are deliberately naive
// (dense loops, direct formulas) and share no code with the library.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense zeros(std::size_t r, std::size_t c) { return Dense(r, std::vector<double>(c, 0.0)); }

inline Dense matmul(const Dense& a, const Dense& b) {
  Dense out = zeros(a.size(), b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

inline Dense transpose(const Dense& a) {
  Dense out = zeros(a[0].size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) out[j][i] = a[i][j];
  return out;
}

/// Random symmetric matrix with entries from N(0, 1), using <random> directly.
inline Dense random_symmetric(std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Dense s = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) s[i][j] = s[j][i] = nd(gen);
  return s;
}

/// Orthonormal columns via modified Gram-Schmidt on a Gaussian matrix.
inline Dense random_orthonormal(std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Dense q = zeros(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> v(n);
    for (double& x : v) x = nd(gen);
    for (std::size_t k = 0; k < j; ++k) {
      double d = 0;
      for (std::size_t i = 0; i < n; ++i) d += v[i] * q[i][k];
      for (std::size_t i = 0; i < n; ++i) v[i] -= d * q[i][k];
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) q[i][j] = v[i] / norm;
  }
  return q;
}

/// Closed-form density of <u, v> for random unit vectors in R^p:
/// (1 - x^2)^((p-3)/2) / B(1/2, (p-1)/2).
inline double inner_product_density(std::size_t p, double x) {
  const double a = 0.5 * (static_cast<double>(p) - 1.0);
  const double log_beta = std::lgamma(0.5) + std::lgamma(a) - std::lgamma(0.5 + a);
  return std::exp((a - 1.0) * std::log1p(-x * x) - log_beta);
}

/// Composite Simpson rule with n (even) panels.
template <typename F>
double simpson(F f, double a, double b, std::size_t n = 20000) {
  const double h = (b - a) / static_cast<double>(n);
  double sum = f(a) + f(b);
  for (std::size_t i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
  return sum * h / 3.0;
}

/// Sum over the first k paired columns of |<a_i, b_i>|.
inline double paired_similarity(const Dense& a, const Dense& b, std::size_t k) {
  double s = 0;
  for (std::size_t j = 0; j < k; ++j) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i][j] * b[i][j];
    s += std::abs(d);
  }
  return s;
}

/// Round-half-away-from-zero long-tailed count profile.
inline std::size_t longtail_count(std::size_t c, std::size_t classes, std::size_t max_count, double factor) {
  const double e = classes > 1 ? static_cast<double>(c) / static_cast<double>(classes - 1) : 0.0;
  return static_cast<std::size_t>(std::llround(static_cast<double>(max_count) * std::pow(factor, -e)));
}

/// Mean softmax cross-entropy of a logit matrix.
inline double cross_entropy(const Dense& logits, const std::vector<int>& labels) {
  double total = 0;
  for (std::size_t r = 0; r < logits.size(); ++r) {
    double m = logits[r][0];
    for (double v : logits[r]) m = std::max(m, v);
    double z = 0;
    for (double v : logits[r]) z += std::exp(v - m);
    total += -(logits[r][static_cast<std::size_t>(labels[r])] - m - std::log(z));
  }
  return total / static_cast<double>(logits.size());
}

}  // namespace oracle
