#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "geoprior/feature_set.hpp"
#include "geoprior/linalg.hpp"
#include "geoprior/rng.hpp"

namespace geoprior {

// File formats
//
// CSV:    optional leading '#' comment lines, then a header
//         `label,f0,...,f{P-1}` (plus `,provenance` for augmented files), one
//         row per sample. Values use the shortest round-trip decimal form.
//
// Binary: little-endian.
//         "FGEO" | u32 version = 1 | u64 N | u32 P | u32 C
//         | N x u32 labels | N*P x f32 features, row-major
//         Augmented files append "PROV" | N x u8 provenance codes.

enum class FileFormat { csv, binary };

/// ".csv" selects CSV; anything else is binary.
FileFormat format_from_path(const std::filesystem::path& path);

struct SaveOptions {
  std::string comment;                      // CSV only, written as '# ...' lines
  std::span<const Provenance> provenance;  // empty: no provenance column
};

void save_features(const FeatureSet& set, const std::filesystem::path& path, FileFormat format,
                   const SaveOptions& options = {});

/// Throws ParseError (with line or byte offset) and DimensionInconsistent.
/// Provenance tags, when present in the file and `provenance` is non-null, are returned through it.
FeatureSet load_features(const std::filesystem::path& path, FileFormat format,
                         std::vector<Provenance>* provenance = nullptr);

FeatureSet load_features(const std::filesystem::path& path);

// Synthetic long-tailed data

struct SynthConfig {
  std::size_t classes = 10;
  std::size_t dim = 16;
  double imbalance_factor = 100.0;
  std::size_t max_count = 1000;
  /// Basis-sharing group per class; classes in a group share eigenvectors.
  /// Empty means every class gets its own random basis.
  std::vector<int> basis_groups;
  /// Per-class covariance eigenvalues (descending). Empty: geometric profile
  /// top_eigenvalue * spectrum_decay^i for every class.
  std::vector<std::vector<double>> spectrum;
  double top_eigenvalue = 4.0;
  double spectrum_decay = 0.7;
  /// Class means sit at mean_scale * e_c, pulled toward their basis group's
  /// centroid by group_pull in [0, 1).
  double mean_scale = 3.0;
  double group_pull = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  int group_of(std::size_t c) const;
};

struct ClassGenerator {
  int basis_group = 0;
  std::vector<double> mean;
  Matrix basis;  // columns are covariance eigenvectors
  std::vector<double> spectrum;
};

struct SyntheticDataset {
  SynthConfig config;
  std::vector<std::size_t> counts;
  std::vector<ClassGenerator> generators;
  FeatureSet data;
};

/// Class c and class c + ceil(C/2) share group c.
std::vector<int> paired_basis_groups(std::size_t classes);

/// n_c = round(max_count * imbalance_factor^(-c / (classes - 1))).
std::vector<std::size_t> longtailed_counts(std::size_t classes, std::size_t max_count, double imbalance_factor);

/// Draws Gaussian classes with the configured geometry. Sample values are
/// rounded to float precision so CSV and binary copies hold identical data.
SyntheticDataset generate_longtailed(const SynthConfig& config, Rng& rng);

/// Fresh samples from existing generators (e.g. a balanced test split).
FeatureSet sample_classes(std::span<const ClassGenerator> generators, std::span<const std::size_t> counts, Rng& rng);

}  // namespace geoprior
