#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "geoprior/linalg.hpp"

namespace geoprior {

/// Origin tag of a row in an augmented feature file or batch.
enum class Provenance : std::uint8_t { real_tail = 0, synthetic_tail = 1, real_head = 2 };

std::string_view to_string(Provenance p) noexcept;
/// Inverse of to_string; throws ParseError on unknown names.
Provenance provenance_from_string(std::string_view name);

/// Labeled feature vectors, one sample per row.
struct FeatureSet {
  Matrix features;          // N x P
  std::vector<int> labels;  // length N, each in [0, num_classes)
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }

  std::vector<std::size_t> class_counts() const;
  std::vector<std::size_t> rows_of_class(int label) const;

  /// Samples of `label` as a P x n column matrix.
  Matrix class_samples(int label) const;

  /// Throws ShapeMismatch / NonFinite / InvalidArgument when invariants fail.
  void validate() const;

  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
};

/// Builds a FeatureSet; num_classes defaults to max(label) + 1.
FeatureSet make_feature_set(Matrix features, std::vector<int> labels, std::size_t num_classes = 0);

}  // namespace geoprior
