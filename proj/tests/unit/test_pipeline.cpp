#include <gtest/gtest.h>

#include <cmath>

#include "geoprior/error.hpp"
#include "geoprior/pipeline.hpp"
#include "geoprior/report_json.hpp"

using namespace geoprior;

namespace {

struct Small {
  Benchmark bench;
  PipelineConfig config;
};

Small small_problem(std::uint64_t seed = 0) {
  SynthConfig sc = standard_synth_config(seed);
  sc.classes = 6;
  sc.basis_groups = paired_basis_groups(6);
  sc.dim = 8;
  sc.max_count = 200;
  sc.imbalance_factor = 20;
  Small s{make_benchmark(sc, 30), {}};
  s.config.model.input_dim = 8;
  s.config.model.hidden = {16};
  s.config.model.embedding_dim = 8;
  s.config.model.num_classes = 6;
  s.config.train.phase1 = {4, 0.05};
  s.config.train.phase2 = {2, 0.05};
  s.config.train.phase3 = {1, 0.001};
  s.config.train.seed = seed;
  s.config.fur.n_t = 8;
  s.config.split.head_min_count = 50;
  s.config.top_p = 3;
  return s;
}

}  // namespace

TEST(Benchmark, StandardConfigShape) {
  const SynthConfig sc = standard_synth_config(3);
  EXPECT_EQ(sc.classes, 10u);
  EXPECT_EQ(sc.dim, 16u);
  EXPECT_EQ(sc.imbalance_factor, 100.0);
  EXPECT_EQ(sc.basis_groups, paired_basis_groups(10));
  const Benchmark b = make_benchmark(sc, 20);
  EXPECT_EQ(b.train.data.class_counts().front(), 1000u);
  EXPECT_EQ(b.train.data.class_counts().back(), 10u);
  EXPECT_EQ(b.test.class_counts(), std::vector<std::size_t>(10, 20));
  EXPECT_EQ(make_benchmark(sc, 20).train.data, b.train.data);
}

TEST(Pipeline, PhasesIsolationAndReport) {
  const Small s = small_problem();
  Model trained;
  std::vector<int> seen;
  const RunReport r = run_three_stage(s.bench.train.data, s.bench.test, s.config, &trained,
                                      [&](int phase, const Model&) { seen.push_back(phase); });
  EXPECT_EQ(seen, (std::vector<int>{1, 2, 3}));
  ASSERT_EQ(r.phases.size(), 3u);
  EXPECT_EQ(r.phases[0].name, "phase1");
  EXPECT_EQ(r.phases[0].loss_curve.size(), 4u);
  EXPECT_EQ(r.phases[1].loss_curve.size(), 2u);
  EXPECT_TRUE(r.phase2_feature_unchanged);
  EXPECT_TRUE(r.phase3_classifier_unchanged);
  EXPECT_FALSE(r.split.head.empty());
  EXPECT_FALSE(r.split.tail.empty());
  for (int t : r.split.tail) {
    ASSERT_TRUE(r.match.contains(t));
    EXPECT_NE(std::find(r.split.head.begin(), r.split.head.end(), r.match.at(t)), r.split.head.end());
    EXPECT_TRUE(r.tail_shift.contains(t));
    EXPECT_GE(r.tail_shift.at(t), 0.0);
    EXPECT_LE(r.tail_shift.at(t), 3.0 + 1e-9);
  }
  EXPECT_EQ(r.geometry.similarity.rows(), 6u);
  for (const auto& p : r.phases) {
    EXPECT_GE(p.accuracy.overall, 0.0);
    EXPECT_LE(p.accuracy.overall, 1.0);
    EXPECT_TRUE(p.tail_recall);
  }
  EXPECT_EQ(r.erm().name, "phase1");
  EXPECT_EQ(r.phase("phase4"), nullptr);
  EXPECT_EQ(trained.num_classes(), 6u);
  // The final model reproduces the last reported accuracy.
  EXPECT_DOUBLE_EQ(evaluate(trained, s.bench.test, r.groups).overall, r.phases.back().accuracy.overall);
}

TEST(Pipeline, ObserverSeesFrozenGroupsUnchanged) {
  const Small s = small_problem(1);
  std::vector<double> feature_after1, classifier_after2;
  bool feature_same = false, classifier_same = false;
  run_three_stage(s.bench.train.data, s.bench.test, s.config, nullptr, [&](int phase, const Model& m) {
    if (phase == 1) feature_after1 = m.parameters(ParamGroup::feature);
    if (phase == 2) {
      feature_same = m.parameters(ParamGroup::feature) == feature_after1;
      classifier_after2 = m.parameters(ParamGroup::classifier);
    }
    if (phase == 3) classifier_same = m.parameters(ParamGroup::classifier) == classifier_after2;
  });
  EXPECT_TRUE(feature_same);
  EXPECT_TRUE(classifier_same);
}

TEST(Pipeline, DeterministicPerSeed) {
  const Small s = small_problem(2);
  const auto a = run_three_stage(s.bench.train.data, s.bench.test, s.config);
  const auto b = run_three_stage(s.bench.train.data, s.bench.test, s.config);
  EXPECT_EQ(to_json(a), to_json(b));
  Small other = s;
  other.config.train.seed = 3;
  EXPECT_NE(to_json(run_three_stage(s.bench.train.data, s.bench.test, other.config)), to_json(a));
}

TEST(Pipeline, ErmOnlyAndPhase4) {
  Small s = small_problem();
  s.config.train.phase2.epochs = 0;
  s.config.train.phase3.epochs = 0;
  s.config.split.head_min_count = 100000;  // no head classes: fine without rebalancing
  const auto erm = run_three_stage(s.bench.train.data, s.bench.test, s.config);
  EXPECT_EQ(erm.phases.size(), 1u);
  EXPECT_TRUE(erm.match.empty());

  s = small_problem();
  s.config.phase4 = true;
  const auto r4 = run_three_stage(s.bench.train.data, s.bench.test, s.config);
  ASSERT_EQ(r4.phases.size(), 4u);
  EXPECT_EQ(r4.phases[3].name, "phase4");
}

TEST(Pipeline, ConfigErrors) {
  auto code_of = [](const Small& s) {
    try {
      run_three_stage(s.bench.train.data, s.bench.test, s.config);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::EmptyInput;
  };
  Small s = small_problem();
  s.config.split.head_min_count = 100000;
  EXPECT_EQ(code_of(s), ErrorCode::InvalidConfig);
  s = small_problem();
  s.config.model.input_dim = 5;
  EXPECT_EQ(code_of(s), ErrorCode::InvalidConfig);
  s = small_problem();
  s.config.model.num_classes = 7;
  EXPECT_EQ(code_of(s), ErrorCode::InvalidConfig);
  s = small_problem();
  s.config.top_p = 9;
  EXPECT_EQ(code_of(s), ErrorCode::InvalidConfig);
  s = small_problem();
  s.config.fur.k_top = 20;
  EXPECT_EQ(code_of(s), ErrorCode::InvalidConfig);
  s = small_problem();
  s.config.train.momentum = 2;
  EXPECT_EQ(code_of(s), ErrorCode::InvalidConfig);
}

TEST(ClassScores, ModesAgreeOnRanking) {
  const Model m(ModelConfig{4, {8}, 4, 3, 0});
  Matrix x(5, 4, 0.3);
  const Matrix p = class_scores(m, x, ScoreMode::probabilities);
  const Matrix l = class_scores(m, x, ScoreMode::logits);
  EXPECT_EQ(softmax_rows(l), p);
}
