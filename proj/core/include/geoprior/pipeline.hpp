#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geoprior/dataio.hpp"
#include "geoprior/feature_set.hpp"
#include "geoprior/fur.hpp"
#include "geoprior/geometry.hpp"
#include "geoprior/model.hpp"

namespace geoprior {

/// What gets averaged per class when ranking class similarity.
enum class ScoreMode { probabilities, logits };

struct PipelineConfig {
  ModelConfig model;
  TrainConfig train;
  FurConfig fur = [] {
    FurConfig f;
    f.scale = 0.5;
    return f;
  }();
  SplitConfig split;
  GroupThresholds groups;
  ScoreMode score_mode = ScoreMode::probabilities;
  /// Mean-center class features before estimating head geometries.
  bool centered_geometry = true;
  std::size_t top_p = 5;
  /// Re-match and repeat classifier re-balancing after Phase 3.
  bool phase4 = false;
};

struct PhaseResult {
  std::string name;
  std::size_t epochs = 0;
  std::vector<double> loss_curve;  // mean training loss per epoch
  AccuracyReport accuracy;
  std::optional<double> tail_recall;  // mean recall over the split's tail classes
};

struct GeometryDiagnostics {
  std::vector<double> top_k_ratio;  // per class, k = top_p; NaN for empty classes
  Matrix similarity;                // class x class geometry similarity
};

struct RunReport {
  PipelineConfig config;
  std::vector<std::size_t> train_counts;
  std::vector<ClassGroup> groups;
  HeadTailSplit split;
  ClassSimilarityTable class_similarity;
  std::map<int, int> match;  // tail class -> most similar head class
  GeometryDiagnostics geometry;
  std::vector<PhaseResult> phases;  // phase1, phase2, phase3 [, phase4]
  /// Per tail class, geometry similarity of its features before vs after Phase 3.
  std::map<int, double> tail_shift;
  bool phase2_feature_unchanged = true;
  bool phase3_classifier_unchanged = true;

  const PhaseResult* phase(const std::string& name) const;
  /// Phase-1 result (plain ERM).
  const PhaseResult& erm() const { return phases.front(); }
};

/// Synthetic long-tailed benchmark: a training set and a balanced test set
/// drawn from the same class generators.
struct Benchmark {
  SyntheticDataset train;
  FeatureSet test;
};

/// C=10, P=16, IF=100, max 1000, classes c and c+5 sharing a basis.
SynthConfig standard_synth_config(std::uint64_t seed);

Benchmark make_benchmark(const SynthConfig& config, std::size_t test_per_class = 100);

/// Called after each phase with its 1-based index and the model state.
using PhaseObserver = std::function<void(int phase, const Model& model)>;

/// Phase 1: ERM on the long-tailed data. Then class similarity and the
/// tail -> head matching from Phase-1 scores, and head geometries of the
/// Phase-1 features. Phase 2: features frozen, classifier trained on FUR
/// balanced batches. Phase 3: classifier frozen, features trained on the
/// long-tailed data, skipped when it has zero epochs and phase4 is off.
/// Accuracy on `test` is recorded after every phase.
///
/// Throws InvalidConfig when Phase 2 or 3 is enabled and the split has no
/// head or no tail class.
RunReport run_three_stage(const FeatureSet& train, const FeatureSet& test, const PipelineConfig& config,
                          Model* trained = nullptr, const PhaseObserver& observer = {});

/// Phase-1 scores of `data` under the chosen mode (N x C).
Matrix class_scores(const Model& model, const Matrix& inputs, ScoreMode mode);

/// Geometry per class of `model`'s features on `data`.
std::vector<GeometryBasis> feature_geometries(const Model& model, const FeatureSet& data, bool centered);

}  // namespace geoprior
