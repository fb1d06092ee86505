#include "geoprior/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "geoprior/error.hpp"
#include "geoprior/rng.hpp"

namespace geoprior {

namespace {

enum StreamId : std::uint64_t { kInit = 1, kPhase1 = 2, kPhase2 = 3, kPhase3 = 4, kPhase4 = 5 };

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = src.row(rows[i]);
    std::copy(r.begin(), r.end(), out.row(i).begin());
  }
  return out;
}

// One pass over `data` in shuffled mini-batches.
double sgd_epoch(Model& model, const FeatureSet& data, std::size_t batch_size, double base_lr, LrDecay decay,
                 std::size_t& step, std::size_t total_steps, FrozenGroups frozen, Rng& rng) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  double sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    const std::span<const std::size_t> rows(order.data() + start, end - start);
    const Matrix x = gather_rows(data.features, rows);
    std::vector<int> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) y[i] = data.labels[rows[i]];
    sum += model.train_step(x, y, scheduled_lr(base_lr, decay, step++, total_steps), frozen);
    ++batches;
  }
  return batches ? sum / static_cast<double>(batches) : 0.0;
}

std::size_t batches_per_epoch(std::size_t n, std::size_t batch_size) { return (n + batch_size - 1) / batch_size; }

std::vector<double> train_long_tailed(Model& model, const FeatureSet& data, const PhaseSchedule& schedule,
                                      const TrainConfig& train, FrozenGroups frozen, Rng& rng) {
  model.reset_optimizer();
  std::vector<double> curve;
  const std::size_t total = schedule.epochs * batches_per_epoch(data.size(), train.batch_size);
  std::size_t step = 0;
  for (std::size_t e = 0; e < schedule.epochs; ++e) {
    curve.push_back(sgd_epoch(model, data, train.batch_size, schedule.lr, train.decay, step, total, frozen, rng));
  }
  return curve;
}

FeatureSet embedded(const Model& model, const FeatureSet& data) {
  FeatureSet z;
  z.features = model.embed(data.features);
  z.labels = data.labels;
  z.num_classes = data.num_classes;
  return z;
}

struct Rebalance {
  std::map<int, int> match;
  std::map<int, GeometryBasis> head_geometries;
};

Rebalance prepare_rebalance(const ClassSimilarityTable& table, const HeadTailSplit& split, const FeatureSet& features,
                            bool centered) {
  Rebalance out;
  for (int t : split.tail) out.match[t] = most_similar_head(t, table, split.head);
  for (int h : split.head) {
    if (features.class_counts()[static_cast<std::size_t>(h)] > 0) {
      out.head_geometries.emplace(h, geometry_of(features, h, centered));
    }
  }
  return out;
}

// Classifier training on FUR balanced batches of cached features.
std::vector<double> train_rebalanced(Model& model, const FeatureSet& features, const HeadTailSplit& split,
                                     const Rebalance& rebalance, const PhaseSchedule& schedule,
                                     const PipelineConfig& config, Rng& rng) {
  model.reset_optimizer();
  std::vector<double> curve;
  const std::size_t per_epoch = std::max<std::size_t>(1, features.size() / config.fur.batch_size());
  const std::size_t total = schedule.epochs * per_epoch;
  std::size_t step = 0;
  for (std::size_t e = 0; e < schedule.epochs; ++e) {
    double sum = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const AugmentedBatch batch = compose_balanced_batch(features, split.tail, split.head, rebalance.match,
                                                          rebalance.head_geometries, config.fur, rng);
      sum += model.train_classifier_step(batch.features, batch.labels,
                                         scheduled_lr(schedule.lr, config.train.decay, step++, total));
    }
    curve.push_back(sum / static_cast<double>(per_epoch));
  }
  return curve;
}

PhaseResult make_phase(std::string name, std::size_t epochs, std::vector<double> curve, const Model& model,
                       const FeatureSet& test, std::span<const ClassGroup> groups, std::span<const int> tail) {
  PhaseResult r;
  r.name = std::move(name);
  r.epochs = epochs;
  r.loss_curve = std::move(curve);
  r.accuracy = evaluate(model, test, groups);
  r.tail_recall = mean_recall(r.accuracy, tail);
  return r;
}

}  // namespace

SynthConfig standard_synth_config(std::uint64_t seed) {
  SynthConfig config;
  config.basis_groups = paired_basis_groups(config.classes);
  config.seed = seed;
  return config;
}

Benchmark make_benchmark(const SynthConfig& config, std::size_t test_per_class) {
  Rng train_rng = Rng::stream(config.seed, 100);
  Benchmark out;
  out.train = generate_longtailed(config, train_rng);
  const std::vector<std::size_t> counts(config.classes, test_per_class);
  Rng test_rng = Rng::stream(config.seed, 101);
  out.test = sample_classes(out.train.generators, counts, test_rng);
  return out;
}

const PhaseResult* RunReport::phase(const std::string& name) const {
  for (const auto& p : phases)
    if (p.name == name) return &p;
  return nullptr;
}

Matrix class_scores(const Model& model, const Matrix& inputs, ScoreMode mode) {
  ForwardResult f = model.forward(inputs);
  return mode == ScoreMode::probabilities ? std::move(f.scores) : std::move(f.logits);
}

std::vector<GeometryBasis> feature_geometries(const Model& model, const FeatureSet& data, bool centered) {
  const FeatureSet z = embedded(model, data);
  const auto counts = z.class_counts();
  std::vector<GeometryBasis> out(z.num_classes);
  for (std::size_t c = 0; c < z.num_classes; ++c) {
    if (counts[c] > 0) out[c] = geometry_of(z, static_cast<int>(c), centered);
    else out[c].class_id = static_cast<int>(c);
  }
  return out;
}

RunReport run_three_stage(const FeatureSet& train, const FeatureSet& test, const PipelineConfig& config,
                          Model* trained, const PhaseObserver& observer) {
  train.validate();
  test.validate();
  config.train.validate();
  if (train.size() == 0) throw Error(ErrorCode::EmptyInput, "training set is empty");
  if (train.dim() != config.model.input_dim) {
    throw Error(ErrorCode::InvalidConfig, "model input_dim " + std::to_string(config.model.input_dim) +
                                              " does not match feature dimension " + std::to_string(train.dim()));
  }
  if (train.num_classes != config.model.num_classes) {
    throw Error(ErrorCode::InvalidConfig, "model has " + std::to_string(config.model.num_classes) +
                                              " classes, data has " + std::to_string(train.num_classes));
  }
  if (test.dim() != train.dim()) throw Error(ErrorCode::DimensionMismatch, "train and test dimensions differ");
  if (config.top_p < 1 || config.top_p > config.model.embedding_dim) {
    throw Error(ErrorCode::InvalidConfig, "top_p must be in [1, embedding_dim]");
  }
  const bool rebalancing = config.train.phase2.epochs > 0 || config.train.phase3.epochs > 0 || config.phase4;

  RunReport report;
  report.config = config;
  report.train_counts = train.class_counts();
  report.groups = assign_groups(report.train_counts, config.groups);
  report.split = split_head_tail(report.train_counts, config.split);
  if (rebalancing) {
    if (report.split.head.empty() || report.split.tail.empty()) {
      throw Error(ErrorCode::InvalidConfig, "head/tail split has " + std::to_string(report.split.head.size()) +
                                                " head and " + std::to_string(report.split.tail.size()) +
                                                " tail classes; both must be non-empty");
    }
    config.fur.validate(config.model.embedding_dim);
  }
  const std::span<const int> tail(report.split.tail);

  ModelConfig model_config = config.model;
  model_config.seed = mix_seed(config.train.seed, kInit);
  Model model(model_config);
  model.set_momentum(config.train.momentum);
  auto notify = [&](int phase) {
    if (observer) observer(phase, model);
  };

  // Phase 1
  Rng rng1 = Rng::stream(config.train.seed, kPhase1);
  auto curve = train_long_tailed(model, train, config.train.phase1, config.train, {}, rng1);
  report.phases.push_back(make_phase("phase1", config.train.phase1.epochs, std::move(curve), model, test,
                                     report.groups, tail));
  notify(1);

  report.class_similarity = class_similarity_table(class_scores(model, train.features, config.score_mode), train.labels);
  FeatureSet features = embedded(model, train);
  {
    const auto geoms = feature_geometries(model, train, config.centered_geometry);
    report.geometry.top_k_ratio.assign(geoms.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < geoms.size(); ++c) {
      if (geoms[c].sample_count > 0 && std::accumulate(geoms[c].eigenvalues.begin(), geoms[c].eigenvalues.end(), 0.0) > 0.0)
        report.geometry.top_k_ratio[c] = top_k_eigenvalue_ratio(geoms[c], std::min(config.top_p, geoms[c].dim()));
    }
    std::vector<GeometryBasis> present;
    for (const auto& g : geoms)
      if (g.sample_count > 0) present.push_back(g);
    report.geometry.similarity = similarity_matrix(present, config.top_p);
  }
  if (!rebalancing) {
    if (trained) *trained = std::move(model);
    return report;
  }

  const Rebalance rebalance = prepare_rebalance(report.class_similarity, report.split, features, config.centered_geometry);
  report.match = rebalance.match;

  // Phase 2
  const auto theta1 = model.parameters(ParamGroup::feature);
  Rng rng2 = Rng::stream(config.train.seed, kPhase2);
  curve = train_rebalanced(model, features, report.split, rebalance, config.train.phase2, config, rng2);
  report.phase2_feature_unchanged = model.parameters(ParamGroup::feature) == theta1;
  report.phases.push_back(make_phase("phase2", config.train.phase2.epochs, std::move(curve), model, test,
                                     report.groups, tail));
  notify(2);

  // Phase 3; with zero epochs the run stops at the decoupled variant.
  if (config.train.phase3.epochs == 0 && !config.phase4) {
    if (trained) *trained = std::move(model);
    return report;
  }
  std::map<int, GeometryBasis> tail_before;
  for (int t : report.split.tail) {
    if (report.train_counts[static_cast<std::size_t>(t)] > 0)
      tail_before.emplace(t, geometry_of(features, t, config.centered_geometry));
  }
  const auto theta2 = model.parameters(ParamGroup::classifier);
  Rng rng3 = Rng::stream(config.train.seed, kPhase3);
  curve = train_long_tailed(model, train, config.train.phase3, config.train, {.feature = false, .classifier = true}, rng3);
  report.phase3_classifier_unchanged = model.parameters(ParamGroup::classifier) == theta2;
  report.phases.push_back(make_phase("phase3", config.train.phase3.epochs, std::move(curve), model, test,
                                     report.groups, tail));
  notify(3);

  features = embedded(model, train);
  for (const auto& [t, before] : tail_before) {
    report.tail_shift[t] = geometry_similarity(before, geometry_of(features, t, config.centered_geometry), config.top_p);
  }

  if (config.phase4) {
    const auto table = class_similarity_table(class_scores(model, train.features, config.score_mode), train.labels);
    const Rebalance again = prepare_rebalance(table, report.split, features, config.centered_geometry);
    Rng rng4 = Rng::stream(config.train.seed, kPhase4);
    curve = train_rebalanced(model, features, report.split, again, config.train.phase2, config, rng4);
    report.phases.push_back(make_phase("phase4", config.train.phase2.epochs, std::move(curve), model, test,
                                       report.groups, tail));
    notify(4);
  }

  if (trained) *trained = std::move(model);
  return report;
}

}  // namespace geoprior
