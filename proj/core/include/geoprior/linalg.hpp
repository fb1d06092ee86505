#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace geoprior {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double> column(std::size_t c) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transpose() const;
  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix multiply(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& m);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// Symmetric matrix with packed upper-triangle storage.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim);

  /// Takes the upper triangle of `dense`; throws DimensionMismatch if not square.
  static SymMatrix from_dense(const Matrix& dense);

  std::size_t dim() const noexcept { return dim_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[index(i, j)]; }
  void set(std::size_t i, std::size_t j, double value) { data_[index(i, j)] = value; }
  void add(std::size_t i, std::size_t j, double value) { data_[index(i, j)] += value; }

  Matrix to_dense() const;
  double trace() const noexcept;
  double frobenius_norm() const noexcept;
  bool all_finite() const noexcept;

 private:
  std::size_t index(std::size_t i, std::size_t j) const noexcept {
    if (i > j) std::swap(i, j);
    return i * dim_ - (i * (i + 1)) / 2 + j;
  }

  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
///
/// Column i of `eigenvectors` is the unit eigenvector for `eigenvalues[i]`.
/// Each column carries the canonical sign: its largest-magnitude component is
/// positive, with ties going to the lowest index.
struct EigenDecomposition {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;

  std::size_t dim() const noexcept { return eigenvalues.size(); }
  std::vector<double> vector(std::size_t i) const { return eigenvectors.column(i); }

  /// V diag(eigenvalues) V^T.
  Matrix reconstruct() const;
};

/// Second-moment matrix of the columns of `samples` (P x n): (1/n) X X^T.
/// With `centered`, each row is mean-subtracted first.
SymMatrix covariance(const Matrix& samples, bool centered = false);

/// Same as covariance(), for samples stored one per row (n x P).
SymMatrix covariance_of_rows(const Matrix& rows, bool centered = false);

struct EigenOptions {
  double relative_tolerance = 1e-12;
  int max_sweeps = 100;
};

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Stops once the off-diagonal Frobenius norm is at most
/// relative_tolerance * ||S||_F. Throws NoConvergence if the sweep budget is
/// exhausted, NonFinite on NaN/Inf input.
EigenDecomposition sym_eigen(const SymMatrix& s, const EigenOptions& options = {});

/// Sets eigenvalues with |lambda| <= eps to exactly zero.
void clamp_near_zero(EigenDecomposition& eig, double eps);

/// Flips `v` so its largest-magnitude entry (lowest index on ties) is positive.
void apply_canonical_sign(std::span<double> v);

}  // namespace geoprior
