#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geoprior/feature_set.hpp"
#include "geoprior/geometry.hpp"
#include "geoprior/model.hpp"
#include "geoprior/pipeline.hpp"

namespace geoprior {

struct PhenomenaConfig {
  std::size_t top_k = 5;   // spectral ratio
  std::size_t top_p = 5;   // geometry similarity
  bool centered = false;
  ScoreMode score_mode = ScoreMode::probabilities;
  SplitConfig split;
  std::size_t baseline_trials = 2000;
  double dominance_threshold = 0.8;  // ratio counted as "dominant directions"
  std::uint64_t seed = 0;
};

/// Inputs for the four checks. Without models, geometries come from the raw
/// features and class scores from a nearest-centroid softmax.
struct PhenomenaInput {
  const FeatureSet* data = nullptr;
  std::vector<const Model*> models;
  const FeatureSet* balanced = nullptr;      // balanced counterpart of `data`
  const Model* balanced_model = nullptr;     // trained on `balanced`; defaults to models[0]
};

struct SpectralCheck {
  std::vector<double> ratio;  // per class; NaN when the class is empty
  double mean_ratio = 0.0;
  double min_ratio = 0.0;
  double isotropic_control = 0.0;  // k / P
  bool above_control = false;      // every class ratio > control
  bool dominant = false;           // every class ratio >= dominance_threshold
};

struct RankCorrelationCheck {
  std::vector<double> per_class;  // Spearman rho per class (NaN when undefined)
  double mean = 0.0;
  bool positive = false;
};

struct CrossModelPair {
  std::size_t a = 0;
  std::size_t b = 0;
  std::vector<double> per_class;
  double mean = 0.0;
  double z_score = 0.0;  // (mean - baseline.mean) / baseline.stddev
  bool within_two_sigma = false;
};

enum class CheckStatus { ok, insufficient_models };

struct CrossModelCheck {
  CheckStatus status = CheckStatus::insufficient_models;
  RandomBaseline baseline;
  std::vector<CrossModelPair> pairs;
  bool near_random = false;  // every pair within two sigma
};

struct HeadAffinityCheck {
  std::vector<int> tail;
  std::map<int, int> most_similar;  // tail class -> h
  double head_fraction = 0.0;
  std::optional<double> top1_agreement;     // share of classes with the same h on the balanced counterpart
  std::optional<double> rank_correlation;   // mean Spearman rho between LT and balanced rankings
};

struct PhenomenaReport {
  PhenomenaConfig config;
  SpectralCheck spectral;
  RankCorrelationCheck rank_correlation;
  CrossModelCheck cross_model;
  HeadAffinityCheck head_affinity;
};

PhenomenaReport validate_phenomena(const PhenomenaInput& input, const PhenomenaConfig& config);

/// Spearman rank correlation with average ranks for ties; NaN when either
/// side is constant or fewer than two points are given.
double spearman(std::span<const double> x, std::span<const double> y);

/// Softmax over negative half squared distances to the class means.
Matrix centroid_scores(const FeatureSet& data);

}  // namespace geoprior
