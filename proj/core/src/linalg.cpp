#include "geoprior/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "geoprior/error.hpp"

namespace geoprior {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) {
      throw Error(ErrorCode::DimensionMismatch, "ragged initializer list");
    }
    std::copy(row.begin(), row.end(), m.row(i).begin());
    ++i;
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "multiply: inner dimensions differ");
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

double frobenius_norm(const Matrix& m) {
  double sum = 0.0;
  for (double v : m.data()) sum += v * v;
  return std::sqrt(sum);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "dot: lengths differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

SymMatrix::SymMatrix(std::size_t dim) : dim_(dim), data_(dim * (dim + 1) / 2, 0.0) {}

SymMatrix SymMatrix::from_dense(const Matrix& dense) {
  if (dense.rows() != dense.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "SymMatrix::from_dense: matrix is not square");
  }
  SymMatrix s(dense.rows());
  for (std::size_t i = 0; i < s.dim_; ++i)
    for (std::size_t j = i; j < s.dim_; ++j) s.set(i, j, dense(i, j));
  return s;
}

Matrix SymMatrix::to_dense() const {
  Matrix m(dim_, dim_);
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < dim_; ++j) m(i, j) = (*this)(i, j);
  return m;
}

double SymMatrix::trace() const noexcept {
  double t = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) t += (*this)(i, i);
  return t;
}

double SymMatrix::frobenius_norm() const noexcept {
  double sum = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = i; j < dim_; ++j) {
      const double v = (*this)(i, j);
      sum += (i == j ? 1.0 : 2.0) * v * v;
    }
  }
  return std::sqrt(sum);
}

bool SymMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix EigenDecomposition::reconstruct() const {
  const std::size_t p = dim();
  Matrix out(p, p);
  for (std::size_t k = 0; k < p; ++k) {
    const double lambda = eigenvalues[k];
    for (std::size_t i = 0; i < p; ++i) {
      const double vik = eigenvectors(i, k) * lambda;
      for (std::size_t j = 0; j < p; ++j) out(i, j) += vik * eigenvectors(j, k);
    }
  }
  return out;
}

SymMatrix covariance(const Matrix& samples, bool centered) {
  const std::size_t p = samples.rows();
  const std::size_t n = samples.cols();
  if (n == 0 || p == 0) {
    throw Error(ErrorCode::EmptyInput, "covariance: no samples");
  }
  if (!samples.all_finite()) {
    throw Error(ErrorCode::NonFinite, "covariance: input contains NaN or Inf");
  }
  std::vector<double> mean(p, 0.0);
  if (centered) {
    for (std::size_t i = 0; i < p; ++i) {
      const auto r = samples.row(i);
      mean[i] = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(n);
    }
  }
  SymMatrix s(p);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < p; ++i) {
    const auto ri = samples.row(i);
    for (std::size_t j = i; j < p; ++j) {
      const auto rj = samples.row(j);
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) sum += (ri[k] - mean[i]) * (rj[k] - mean[j]);
      s.set(i, j, sum * inv_n);
    }
  }
  return s;
}

SymMatrix covariance_of_rows(const Matrix& rows, bool centered) {
  return covariance(rows.transpose(), centered);
}

void apply_canonical_sign(std::span<double> v) {
  if (v.empty()) return;
  double max_abs = 0.0;
  for (double x : v) max_abs = std::max(max_abs, std::abs(x));
  // Magnitudes within rounding of the maximum count as ties.
  const double cutoff = max_abs * (1.0 - 1e-12);
  std::size_t best = 0;
  while (std::abs(v[best]) < cutoff) ++best;
  if (v[best] < 0.0) {
    for (double& x : v) x = -x;
  }
}

namespace {

double off_diagonal_norm(const Matrix& a) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j) sum += 2.0 * a(i, j) * a(i, j);
  return std::sqrt(sum);
}

// Zeroes a(p, q) with one Jacobi rotation, accumulating it into v.
void rotate(Matrix& a, Matrix& v, std::size_t p, std::size_t q) {
  const double apq = a(p, q);
  if (apq == 0.0) return;
  const double app = a(p, p);
  const double aqq = a(q, q);
  const double theta = (aqq - app) / (2.0 * apq);
  const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const double tau = s / (1.0 + c);

  a(p, p) = app - t * apq;
  a(q, q) = aqq + t * apq;
  a(p, q) = 0.0;
  a(q, p) = 0.0;

  const std::size_t n = a.rows();
  for (std::size_t r = 0; r < n; ++r) {
    if (r == p || r == q) continue;
    const double arp = a(r, p);
    const double arq = a(r, q);
    const double new_rp = arp - s * (arq + tau * arp);
    const double new_rq = arq + s * (arp - tau * arq);
    a(r, p) = new_rp;
    a(p, r) = new_rp;
    a(r, q) = new_rq;
    a(q, r) = new_rq;
  }
  for (std::size_t r = 0; r < n; ++r) {
    const double vrp = v(r, p);
    const double vrq = v(r, q);
    v(r, p) = vrp - s * (vrq + tau * vrp);
    v(r, q) = vrq + s * (vrp - tau * vrq);
  }
}

}  // namespace

EigenDecomposition sym_eigen(const SymMatrix& s, const EigenOptions& options) {
  const std::size_t n = s.dim();
  if (n == 0) {
    throw Error(ErrorCode::EmptyInput, "sym_eigen: zero-dimensional matrix");
  }
  if (!s.all_finite()) {
    throw Error(ErrorCode::NonFinite, "sym_eigen: input contains NaN or Inf");
  }

  Matrix a = s.to_dense();
  Matrix v = Matrix::identity(n);
  const double threshold = options.relative_tolerance * s.frobenius_norm();

  double residual = off_diagonal_norm(a);
  int sweep = 0;
  while (residual > threshold) {
    if (sweep == options.max_sweeps) {
      std::ostringstream msg;
      msg << "sym_eigen: no convergence after " << sweep << " sweeps (dim " << n
          << ", off-diagonal residual " << residual << ")";
      throw Error(ErrorCode::NoConvergence, msg.str());
    }
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) rotate(a, v, p, q);
    residual = off_diagonal_norm(a);
    ++sweep;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  std::vector<double> column(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.eigenvalues[k] = a(src, src);
    for (std::size_t r = 0; r < n; ++r) column[r] = v(r, src);
    apply_canonical_sign(column);
    for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = column[r];
  }
  return out;
}

void clamp_near_zero(EigenDecomposition& eig, double eps) {
  for (double& lambda : eig.eigenvalues) {
    if (std::abs(lambda) <= eps) lambda = 0.0;
  }
}

}  // namespace geoprior
