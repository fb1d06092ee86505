#include "geoprior/feature_set.hpp"

#include <algorithm>
#include <string>

#include "geoprior/error.hpp"

namespace geoprior {

std::string_view to_string(Provenance p) noexcept {
  switch (p) {
    case Provenance::real_tail: return "real-tail";
    case Provenance::synthetic_tail: return "synthetic-tail";
    case Provenance::real_head: return "real-head";
  }
  return "unknown";
}

Provenance provenance_from_string(std::string_view name) {
  if (name == "real-tail") return Provenance::real_tail;
  if (name == "synthetic-tail") return Provenance::synthetic_tail;
  if (name == "real-head") return Provenance::real_head;
  throw Error(ErrorCode::ParseError, "unknown provenance tag '" + std::string(name) + "'");
}

std::vector<std::size_t> FeatureSet::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int label : labels) {
    if (label >= 0 && static_cast<std::size_t>(label) < num_classes) ++counts[label];
  }
  return counts;
}

std::vector<std::size_t> FeatureSet::rows_of_class(int label) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) rows.push_back(i);
  return rows;
}

Matrix FeatureSet::class_samples(int label) const {
  const auto rows = rows_of_class(label);
  Matrix out(dim(), rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = features.row(rows[k]);
    for (std::size_t d = 0; d < r.size(); ++d) out(d, k) = r[d];
  }
  return out;
}

void FeatureSet::validate() const {
  if (features.rows() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "feature rows (" + std::to_string(features.rows()) +
                                              ") != label count (" + std::to_string(labels.size()) + ")");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw Error(ErrorCode::InvalidArgument,
                  "label " + std::to_string(labels[i]) + " at row " + std::to_string(i) + " outside [0, " +
                      std::to_string(num_classes) + ")");
    }
  }
  if (!features.all_finite()) {
    throw Error(ErrorCode::NonFinite, "feature values contain NaN or Inf");
  }
}

FeatureSet make_feature_set(Matrix features, std::vector<int> labels, std::size_t num_classes) {
  FeatureSet set;
  set.features = std::move(features);
  set.labels = std::move(labels);
  if (num_classes == 0 && !set.labels.empty()) {
    num_classes = static_cast<std::size_t>(*std::max_element(set.labels.begin(), set.labels.end()) + 1);
  }
  set.num_classes = num_classes;
  set.validate();
  return set;
}

}  // namespace geoprior
