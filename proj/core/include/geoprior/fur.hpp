#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "geoprior/feature_set.hpp"
#include "geoprior/geometry.hpp"
#include "geoprior/linalg.hpp"
#include "geoprior/rng.hpp"

namespace geoprior {

/// How each eigendirection's noise is weighted.
enum class FurScaling {
  eigenvalue,       // epsilon_j * lambda_j
  sqrt_eigenvalue,  // epsilon_j * sqrt(lambda_j), a standard-deviation scale
};

/// How the N_T real tail rows of a batch are drawn.
enum class TailAllocation {
  per_sample,  // uniform over the pooled tail samples
  per_class,   // uniform tail class first, then uniform sample within it
};

struct FurConfig {
  std::size_t n_t = 32;               // real tail rows per batch
  std::size_t n_a = 3;                // perturbations per real tail row
  std::optional<std::size_t> k_top;  // eigenvectors used; unset means all
  double scale = 1.0;
  FurScaling scaling = FurScaling::eigenvalue;
  TailAllocation allocation = TailAllocation::per_sample;
  std::uint64_t seed = 0;

  /// Throws InvalidConfig when n_t == 0, scale < 0, or k_top outside [1, dim].
  void validate(std::size_t dim) const;
  std::size_t directions(std::size_t dim) const { return k_top.value_or(dim); }
  std::size_t batch_size() const { return 2 * n_t * (1 + n_a); }
};

/// z + scale * sum_j noise[j] * w(lambda_j) * xi_j over the first
/// cfg.directions(P) eigenvectors of `head`. `noise` supplies epsilon.
std::vector<double> fur_translate(std::span<const double> z, const GeometryBasis& head, const FurConfig& cfg,
                                  std::span<const double> noise);

/// fur_translate with epsilon_j drawn i.i.d. standard normal from `rng`.
std::vector<double> fur_perturb(std::span<const double> z, const GeometryBasis& head, const FurConfig& cfg, Rng& rng);

struct AugmentedBatch {
  Matrix features;  // 2 N_T (1 + N_A) rows
  std::vector<int> labels;
  std::vector<Provenance> provenance;
  /// For synthetic rows, the batch row of the real tail row they perturb.
  std::vector<std::optional<std::size_t>> source_row;
  /// For real rows, the dataset row they were drawn from.
  std::vector<std::optional<std::size_t>> dataset_row;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t count(Provenance p) const;
};

/// Balanced mini-batch: N_T real tail rows, N_A FUR perturbations of each
/// (using the matched head class's geometry), and N_T (1 + N_A) real head rows.
/// Sampling is with replacement; row order is shuffled.
///
/// Throws InsufficientHeadData when the head pool is empty, UnmatchedTail
/// when a drawn tail class has no matched head geometry, InvalidArgument on
/// overlapping or empty class sets.
AugmentedBatch compose_balanced_batch(const FeatureSet& dataset, std::span<const int> tail_classes,
                                      std::span<const int> head_classes, const std::map<int, int>& match,
                                      const std::map<int, GeometryBasis>& head_geometries, const FurConfig& cfg,
                                      Rng& rng);

struct AugmentedFeatureSet {
  FeatureSet set;
  std::vector<Provenance> provenance;
};

/// Every original row (tagged real-tail or real-head) followed by N_A
/// perturbations of each tail row. Classes in neither set are tagged real-head.
AugmentedFeatureSet augment_feature_set(const FeatureSet& dataset, std::span<const int> tail_classes,
                                        const std::map<int, int>& match,
                                        const std::map<int, GeometryBasis>& head_geometries, const FurConfig& cfg,
                                        Rng& rng);

}  // namespace geoprior
