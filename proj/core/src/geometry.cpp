#include "geoprior/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "geoprior/error.hpp"
#include "geoprior/randvec.hpp"

namespace geoprior {

namespace {

void require_same_dim(const GeometryBasis& a, const GeometryBasis& b, const char* what) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": dimensions " + std::to_string(a.dim()) +
                                                  " and " + std::to_string(b.dim()) + " differ");
  }
}

double column_dot(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
  double sum = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) sum += a(r, i) * b(r, j);
  return sum;
}

}  // namespace

GeometryBasis geometry_of_samples(const Matrix& samples, int class_id, bool centered) {
  const SymMatrix cov = covariance(samples, centered);
  EigenDecomposition eig = sym_eigen(cov);
  clamp_near_zero(eig, 1e-9 * std::abs(cov.trace()));
  GeometryBasis g;
  g.class_id = class_id;
  g.eigenvalues = std::move(eig.eigenvalues);
  g.eigenvectors = std::move(eig.eigenvectors);
  g.sample_count = samples.cols();
  return g;
}

GeometryBasis geometry_of(const FeatureSet& features, int class_id, bool centered) {
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= features.num_classes) {
    throw Error(ErrorCode::UnknownClass, "class " + std::to_string(class_id) + " not in feature set");
  }
  Matrix samples = features.class_samples(class_id);
  if (samples.cols() == 0) {
    throw Error(ErrorCode::EmptyClass, "class " + std::to_string(class_id) + " has no samples");
  }
  return geometry_of_samples(samples, class_id, centered);
}

double geometry_similarity(const GeometryBasis& a, const GeometryBasis& b, std::size_t top_p) {
  require_same_dim(a, b, "geometry_similarity");
  if (top_p < 1 || top_p > a.dim()) {
    throw Error(ErrorCode::InvalidArgument, "geometry_similarity: top_p must be in [1, " + std::to_string(a.dim()) + "]");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < top_p; ++i) s += std::abs(column_dot(a.eigenvectors, i, b.eigenvectors, i));
  return s;
}

Matrix alignment_matrix(const GeometryBasis& a, const GeometryBasis& b) {
  require_same_dim(a, b, "alignment_matrix");
  const std::size_t p = a.dim();
  Matrix m(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) m(i, j) = column_dot(a.eigenvectors, i, b.eigenvectors, j);
  return m;
}

double diagonal_mass(const Matrix& alignment, std::size_t k) {
  if (k > std::min(alignment.rows(), alignment.cols())) {
    throw Error(ErrorCode::InvalidArgument, "diagonal_mass: k exceeds matrix size");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += std::abs(alignment(i, i));
  return s;
}

double top_k_eigenvalue_ratio(const GeometryBasis& g, std::size_t k) {
  if (k < 1 || k > g.dim()) {
    throw Error(ErrorCode::InvalidArgument, "top_k_eigenvalue_ratio: k must be in [1, " + std::to_string(g.dim()) + "]");
  }
  const double total = std::accumulate(g.eigenvalues.begin(), g.eigenvalues.end(), 0.0);
  if (total == 0.0) {
    throw Error(ErrorCode::ZeroSpectrum, "class " + std::to_string(g.class_id) + " has an all-zero spectrum");
  }
  const double top = std::accumulate(g.eigenvalues.begin(), g.eigenvalues.begin() + static_cast<std::ptrdiff_t>(k), 0.0);
  return top / total;
}

Matrix similarity_matrix(std::span<const GeometryBasis> geometries, std::size_t top_p) {
  const std::size_t n = geometries.size();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double s = geometry_similarity(geometries[i], geometries[j], top_p);
      m(i, j) = s;
      m(j, i) = s;
    }
  }
  return m;
}

const std::vector<RankedClass>& ClassSimilarityTable::ranking(int c) const {
  if (c < 0 || static_cast<std::size_t>(c) >= rows.size()) {
    throw Error(ErrorCode::UnknownClass, "class " + std::to_string(c) + " not in similarity table");
  }
  return rows[static_cast<std::size_t>(c)];
}

std::optional<int> ClassSimilarityTable::most_similar(int c) const {
  const auto& row = ranking(c);
  if (row.empty()) return std::nullopt;
  return row.front().label;
}

ClassSimilarityTable class_similarity_table(const Matrix& scores, std::span<const int> labels) {
  if (scores.rows() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "class_similarity_table: " + std::to_string(scores.rows()) +
                                              " score rows for " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t classes = scores.cols();
  std::vector<std::vector<double>> sums(classes, std::vector<double>(classes, 0.0));
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw Error(ErrorCode::ShapeMismatch, "label " + std::to_string(y) + " has no score column");
    }
    const auto row = scores.row(i);
    for (std::size_t k = 0; k < classes; ++k) sums[y][k] += row[k];
    ++counts[y];
  }

  ClassSimilarityTable table;
  table.rows.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] == 0) {
      throw Error(ErrorCode::MissingClass, "class " + std::to_string(c) + " has no samples");
    }
    auto& row = table.rows[c];
    for (std::size_t k = 0; k < classes; ++k) {
      if (k == c) continue;
      row.push_back({static_cast<int>(k), sums[c][k] / static_cast<double>(counts[c])});
    }
    std::stable_sort(row.begin(), row.end(), [](const RankedClass& a, const RankedClass& b) { return a.score > b.score; });
  }
  return table;
}

int most_similar_head(int c, const ClassSimilarityTable& table, std::span<const int> head_set) {
  if (head_set.empty()) throw Error(ErrorCode::NoHeadClass, "empty head set");
  for (const auto& entry : table.ranking(c)) {
    if (std::find(head_set.begin(), head_set.end(), entry.label) != head_set.end()) return entry.label;
  }
  throw Error(ErrorCode::NoHeadClass, "no head class ranked for class " + std::to_string(c));
}

HeadTailSplit split_head_tail(std::span<const std::size_t> class_counts, const SplitConfig& config) {
  HeadTailSplit split;
  for (std::size_t c = 0; c < class_counts.size(); ++c) {
    const int label = static_cast<int>(c);
    const bool head = config.head_classes.empty()
                          ? class_counts[c] >= config.head_min_count
                          : std::find(config.head_classes.begin(), config.head_classes.end(), label) !=
                                config.head_classes.end();
    (head ? split.head : split.tail).push_back(label);
  }
  return split;
}

RandomBaseline random_basis_similarity(std::size_t dim, std::size_t top_p, std::size_t trials, Rng& rng) {
  if (trials < 2) throw Error(ErrorCode::InvalidArgument, "random_basis_similarity: need >= 2 trials");
  GeometryBasis a;
  GeometryBasis b;
  a.eigenvalues.assign(dim, 1.0);
  b.eigenvalues.assign(dim, 1.0);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    a.eigenvectors = sample_orthonormal_basis(dim, rng, top_p);
    b.eigenvectors = sample_orthonormal_basis(dim, rng, top_p);
    const double s = geometry_similarity(a, b, top_p);
    sum += s;
    sum_sq += s * s;
  }
  const double n = static_cast<double>(trials);
  RandomBaseline out;
  out.trials = trials;
  out.mean = sum / n;
  out.stddev = std::sqrt(std::max(0.0, (sum_sq - n * out.mean * out.mean) / (n - 1.0)));
  return out;
}

}  // namespace geoprior
