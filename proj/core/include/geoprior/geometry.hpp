#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "geoprior/feature_set.hpp"
#include "geoprior/linalg.hpp"
#include "geoprior/rng.hpp"

namespace geoprior {

/// Eigen-geometry of one class's feature distribution: the ordered
/// eigenvectors of its covariance, with their eigenvalues.
struct GeometryBasis {
  int class_id = 0;
  std::vector<double> eigenvalues;  // descending
  Matrix eigenvectors;              // column i pairs with eigenvalues[i]
  std::size_t sample_count = 0;

  std::size_t dim() const noexcept { return eigenvalues.size(); }
  std::vector<double> axis(std::size_t i) const { return eigenvectors.column(i); }
};

/// Geometry of the samples labeled `class_id`. Eigenvalues within
/// 1e-9 * trace of zero are clamped to zero.
GeometryBasis geometry_of(const FeatureSet& features, int class_id, bool centered = false);

/// Geometry of an explicit P x n sample matrix.
GeometryBasis geometry_of_samples(const Matrix& samples, int class_id, bool centered = false);

/// Sum over the first top_p rank-paired eigenvectors of |<a_i, b_i>|, in [0, top_p].
double geometry_similarity(const GeometryBasis& a, const GeometryBasis& b, std::size_t top_p);

/// M(i, j) = <a_i, b_j> over all eigenvector pairs.
Matrix alignment_matrix(const GeometryBasis& a, const GeometryBasis& b);

/// Sum of the first k absolute diagonal entries.
double diagonal_mass(const Matrix& alignment, std::size_t k);

/// Fraction of the spectrum carried by the k largest eigenvalues.
double top_k_eigenvalue_ratio(const GeometryBasis& g, std::size_t k);

/// Pairwise geometry_similarity over a list of classes.
Matrix similarity_matrix(std::span<const GeometryBasis> geometries, std::size_t top_p);

// Class similarity

struct RankedClass {
  int label = 0;
  double score = 0.0;

  friend bool operator==(const RankedClass&, const RankedClass&) = default;
};

/// For each class c, the other classes ordered by c's averaged score for them.
struct ClassSimilarityTable {
  std::vector<std::vector<RankedClass>> rows;

  std::size_t num_classes() const noexcept { return rows.size(); }
  const std::vector<RankedClass>& ranking(int c) const;
  /// The most similar other class, if any.
  std::optional<int> most_similar(int c) const;

  friend bool operator==(const ClassSimilarityTable&, const ClassSimilarityTable&) = default;
};

/// Averages the score vectors of each class's samples and ranks the other
/// classes by descending average score (ties: lower class index first).
/// `scores` is N x C. Throws ShapeMismatch and MissingClass.
ClassSimilarityTable class_similarity_table(const Matrix& scores, std::span<const int> labels);

/// Highest-ranked member of head_set in c's row. Throws NoHeadClass.
int most_similar_head(int c, const ClassSimilarityTable& table, std::span<const int> head_set);

// Head / tail split

struct SplitConfig {
  /// Explicit head classes; when non-empty the count threshold is ignored.
  std::vector<int> head_classes;
  /// Classes with at least this many training samples are head classes.
  std::size_t head_min_count = 100;
};

struct HeadTailSplit {
  std::vector<int> head;
  std::vector<int> tail;
};

HeadTailSplit split_head_tail(std::span<const std::size_t> class_counts, const SplitConfig& config);

// Random-basis reference

struct RandomBaseline {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t trials = 0;
};

/// Distribution of geometry_similarity(top_p) between independent
/// Haar-random orthonormal bases in R^dim, by Monte-Carlo.
RandomBaseline random_basis_similarity(std::size_t dim, std::size_t top_p, std::size_t trials, Rng& rng);

}  // namespace geoprior
