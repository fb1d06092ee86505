#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geoprior/feature_set.hpp"
#include "geoprior/linalg.hpp"

namespace geoprior {

/// Fully connected layer, y = W x + b with W stored out x in, row-major.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim)
      : in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

  double& w(std::size_t o, std::size_t i) { return weight[o * in + i]; }
  double w(std::size_t o, std::size_t i) const { return weight[o * in + i]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct ModelConfig {
  std::size_t input_dim = 16;
  std::vector<std::size_t> hidden = {64};  // ReLU layers
  std::size_t embedding_dim = 32;          // linear output of the feature network
  std::size_t num_classes = 10;
  std::uint64_t seed = 0;
};

enum class ParamGroup { feature, classifier };

struct FrozenGroups {
  bool feature = false;
  bool classifier = false;
};

struct ForwardResult {
  Matrix features;  // z = f(x, theta1)
  Matrix logits;
  Matrix scores;    // softmax(logits)
};

/// Gradient with the same layout as the model's parameters.
struct Gradients {
  std::vector<DenseLayer> feature;
  DenseLayer classifier;
};

struct LossAndGradient {
  double loss = 0.0;
  Gradients grad;
};

/// Feature sub-network f(x, theta1) (dense ReLU layers, then a linear
/// embedding layer) followed by a linear softmax classifier g(z, theta2).
/// Trained with SGD + momentum; either parameter group can be frozen.
class Model {
 public:
  Model() = default;
  /// Fan-in uniform initialization U(-1/sqrt(in), 1/sqrt(in)) from config.seed.
  explicit Model(const ModelConfig& config);
  Model(std::vector<DenseLayer> feature_layers, DenseLayer classifier);

  std::size_t input_dim() const;
  std::size_t embedding_dim() const;
  std::size_t num_classes() const { return classifier_.out; }

  Matrix embed(const Matrix& x) const;
  Matrix logits(const Matrix& z) const;
  ForwardResult forward(const Matrix& x) const;
  std::vector<int> predict(const Matrix& x) const;

  /// Mean cross-entropy over the batch.
  double loss(const Matrix& x, std::span<const int> labels) const;
  LossAndGradient loss_and_gradient(const Matrix& x, std::span<const int> labels) const;

  /// One SGD step on the unfrozen groups; returns the pre-step loss.
  /// Throws NonFiniteLoss if the loss is NaN or Inf.
  double train_step(const Matrix& x, std::span<const int> labels, double lr, FrozenGroups frozen = {});

  /// One SGD step on theta2 only, from precomputed features z.
  double train_classifier_step(const Matrix& z, std::span<const int> labels, double lr);

  void set_momentum(double momentum) { momentum_ = momentum; }
  double momentum() const { return momentum_; }
  /// Clears the momentum buffers.
  void reset_optimizer();

  /// Flattened parameters (weights then bias, layer by layer).
  std::vector<double> parameters(ParamGroup group) const;
  void set_parameters(ParamGroup group, std::span<const double> values);

  const std::vector<DenseLayer>& feature_layers() const { return feature_; }
  const DenseLayer& classifier() const { return classifier_; }

  // Checkpoint format, little-endian:
  //   "GPMD" | u32 version = 1 | u32 layer_count
  //   | layer_count x (u32 in, u32 out)
  //   | per layer: out*in f64 weights (row-major), out f64 biases
  // The last layer is the classifier; the rest form the feature network.
  std::string serialize() const;
  static Model deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

  friend bool operator==(const Model& a, const Model& b) {
    return a.feature_ == b.feature_ && a.classifier_ == b.classifier_;
  }

 private:
  struct Trace;
  Trace run(const Matrix& x) const;
  void apply_update(DenseLayer& layer, DenseLayer& velocity, const DenseLayer& grad, double lr);
  void ensure_velocity();

  std::vector<DenseLayer> feature_;
  DenseLayer classifier_;
  double momentum_ = 0.9;
  std::vector<DenseLayer> feature_velocity_;
  DenseLayer classifier_velocity_;
};

/// Numerically stable row-wise softmax.
Matrix softmax_rows(const Matrix& logits);

// Training schedule

enum class LrDecay { cosine, linear, none };

struct PhaseSchedule {
  std::size_t epochs = 0;
  double lr = 0.01;
};

struct TrainConfig {
  PhaseSchedule phase1{30, 0.05};
  PhaseSchedule phase2{30, 0.05};
  PhaseSchedule phase3{5, 0.001};
  double momentum = 0.9;
  std::size_t batch_size = 64;
  LrDecay decay = LrDecay::cosine;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Learning rate at `step` of `total_steps` under the decay rule.
double scheduled_lr(double base, LrDecay decay, std::size_t step, std::size_t total_steps);

// Evaluation

enum class ClassGroup { head, middle, tail };

/// Head: more than head_above training samples; tail: fewer than
/// tail_below; middle otherwise. Both thresholds are multiplied by factor.
struct GroupThresholds {
  double head_above = 100.0;
  double tail_below = 20.0;
  double factor = 1.0;
};

std::vector<ClassGroup> assign_groups(std::span<const std::size_t> train_counts, const GroupThresholds& thresholds);

struct AccuracyReport {
  std::size_t samples = 0;
  double overall = 0.0;
  std::optional<double> head;    // absent when the group has no test samples
  std::optional<double> middle;
  std::optional<double> tail;
  std::vector<std::optional<double>> per_class_recall;
};

AccuracyReport accuracy_report(std::span<const int> predictions, std::span<const int> labels,
                               std::span<const ClassGroup> groups);
AccuracyReport evaluate(const Model& model, const FeatureSet& data, std::span<const ClassGroup> groups);

/// Mean recall over `classes`, skipping classes with no test samples.
std::optional<double> mean_recall(const AccuracyReport& report, std::span<const int> classes);

}  // namespace geoprior
