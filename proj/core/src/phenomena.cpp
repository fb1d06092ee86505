#include "geoprior/phenomena.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "geoprior/error.hpp"
#include "geoprior/rng.hpp"

namespace geoprior {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double mean_of_finite(std::span<const double> v) {
  double s = 0.0;
  std::size_t n = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      s += x;
      ++n;
    }
  return n ? s / static_cast<double>(n) : kNaN;
}

FeatureSet features_of(const FeatureSet& data, const Model* model) {
  if (!model) return data;
  FeatureSet z;
  z.features = model->embed(data.features);
  z.labels = data.labels;
  z.num_classes = data.num_classes;
  return z;
}

std::vector<std::optional<GeometryBasis>> geometries(const FeatureSet& z, bool centered) {
  const auto counts = z.class_counts();
  std::vector<std::optional<GeometryBasis>> out(z.num_classes);
  for (std::size_t c = 0; c < z.num_classes; ++c)
    if (counts[c] > 0) out[c] = geometry_of(z, static_cast<int>(c), centered);
  return out;
}

ClassSimilarityTable similarity_of(const FeatureSet& data, const Model* model, ScoreMode mode) {
  const Matrix scores = model ? class_scores(*model, data.features, mode) : centroid_scores(data);
  return class_similarity_table(scores, data.labels);
}

// Row of c's averaged scores indexed by class label.
std::vector<double> score_row(const ClassSimilarityTable& table, int c) {
  std::vector<double> row(table.num_classes(), kNaN);
  for (const auto& e : table.ranking(c)) row[static_cast<std::size_t>(e.label)] = e.score;
  return row;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "spearman: sequences differ in length");
  if (x.size() < 2) return kNaN;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return kNaN;
  return sxy / std::sqrt(sxx * syy);
}

Matrix centroid_scores(const FeatureSet& data) {
  const std::size_t c = data.num_classes;
  const std::size_t p = data.dim();
  const auto counts = data.class_counts();
  Matrix means(c, p);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = data.features.row(i);
    auto m = means.row(static_cast<std::size_t>(data.labels[i]));
    for (std::size_t j = 0; j < p; ++j) m[j] += row[j];
  }
  for (std::size_t k = 0; k < c; ++k)
    for (double& v : means.row(k)) v = counts[k] ? v / static_cast<double>(counts[k]) : 0.0;

  Matrix logits(data.size(), c);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.features.row(i);
    for (std::size_t k = 0; k < c; ++k) {
      if (counts[k] == 0) {
        logits(i, k) = -std::numeric_limits<double>::infinity();
        continue;
      }
      double d = 0.0;
      const auto m = means.row(k);
      for (std::size_t j = 0; j < p; ++j) d += (x[j] - m[j]) * (x[j] - m[j]);
      logits(i, k) = -0.5 * d;
    }
  }
  return softmax_rows(logits);
}

PhenomenaReport validate_phenomena(const PhenomenaInput& input, const PhenomenaConfig& config) {
  if (!input.data) throw Error(ErrorCode::InvalidArgument, "validate_phenomena: no data");
  const FeatureSet& data = *input.data;
  data.validate();
  if (data.size() == 0) throw Error(ErrorCode::EmptyInput, "validate_phenomena: empty data");
  for (const Model* m : input.models)
    if (!m) throw Error(ErrorCode::InvalidArgument, "validate_phenomena: null model");

  PhenomenaReport report;
  report.config = config;
  const Model* primary = input.models.empty() ? nullptr : input.models.front();
  const FeatureSet z = features_of(data, primary);
  const std::size_t p = z.dim();
  if (config.top_k < 1 || config.top_k > p || config.top_p < 1 || config.top_p > p) {
    throw Error(ErrorCode::InvalidConfig, "top_k and top_p must be in [1, " + std::to_string(p) + "]");
  }
  const auto geoms = geometries(z, config.centered);

  // 1. Spectral concentration.
  auto& spectral = report.spectral;
  spectral.isotropic_control = static_cast<double>(config.top_k) / static_cast<double>(p);
  spectral.ratio.assign(geoms.size(), kNaN);
  spectral.above_control = true;
  spectral.dominant = true;
  spectral.min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < geoms.size(); ++c) {
    if (!geoms[c]) continue;
    const double r = top_k_eigenvalue_ratio(*geoms[c], config.top_k);
    spectral.ratio[c] = r;
    spectral.min_ratio = std::min(spectral.min_ratio, r);
    spectral.above_control = spectral.above_control && r > spectral.isotropic_control;
    spectral.dominant = spectral.dominant && r >= config.dominance_threshold;
  }
  spectral.mean_ratio = mean_of_finite(spectral.ratio);

  // 2. Class similarity vs geometry similarity.
  const ClassSimilarityTable table = similarity_of(data, primary, config.score_mode);
  auto& rank = report.rank_correlation;
  rank.per_class.assign(geoms.size(), kNaN);
  for (std::size_t c = 0; c < geoms.size(); ++c) {
    if (!geoms[c]) continue;
    std::vector<double> cls;
    std::vector<double> geo;
    for (const auto& e : table.ranking(static_cast<int>(c))) {
      const auto& other = geoms[static_cast<std::size_t>(e.label)];
      if (!other) continue;
      cls.push_back(e.score);
      geo.push_back(geometry_similarity(*geoms[c], *other, config.top_p));
    }
    rank.per_class[c] = spearman(cls, geo);
  }
  rank.mean = mean_of_finite(rank.per_class);
  rank.positive = rank.mean > 0.0;

  // 3. Same class across independently trained models.
  auto& cross = report.cross_model;
  if (input.models.size() >= 2) {
    cross.status = CheckStatus::ok;
    const std::size_t dim = input.models.front()->embedding_dim();
    Rng rng = Rng::stream(config.seed, 0x70);
    cross.baseline = random_basis_similarity(dim, config.top_p, config.baseline_trials, rng);
    std::vector<std::vector<std::optional<GeometryBasis>>> per_model;
    for (const Model* m : input.models) {
      if (m->embedding_dim() != dim) {
        throw Error(ErrorCode::DimensionMismatch, "validate_phenomena: models differ in feature dimension");
      }
      per_model.push_back(geometries(features_of(data, m), config.centered));
    }
    cross.near_random = true;
    for (std::size_t a = 0; a < per_model.size(); ++a) {
      for (std::size_t b = a + 1; b < per_model.size(); ++b) {
        CrossModelPair pair;
        pair.a = a;
        pair.b = b;
        pair.per_class.assign(data.num_classes, kNaN);
        for (std::size_t c = 0; c < data.num_classes; ++c) {
          if (per_model[a][c] && per_model[b][c])
            pair.per_class[c] = geometry_similarity(*per_model[a][c], *per_model[b][c], config.top_p);
        }
        pair.mean = mean_of_finite(pair.per_class);
        pair.z_score = cross.baseline.stddev > 0.0 ? (pair.mean - cross.baseline.mean) / cross.baseline.stddev
                                                   : (pair.mean == cross.baseline.mean ? 0.0 : kNaN);
        pair.within_two_sigma = std::abs(pair.z_score) <= 2.0;
        cross.near_random = cross.near_random && pair.within_two_sigma;
        cross.pairs.push_back(std::move(pair));
      }
    }
  }

  // 4. Tail classes borrow from head classes.
  auto& affinity = report.head_affinity;
  const HeadTailSplit split = split_head_tail(data.class_counts(), config.split);
  affinity.tail = split.tail;
  std::size_t head_hits = 0;
  for (int t : split.tail) {
    const auto h = table.most_similar(t);
    if (!h) continue;
    affinity.most_similar[t] = *h;
    if (std::find(split.head.begin(), split.head.end(), *h) != split.head.end()) ++head_hits;
  }
  affinity.head_fraction =
      split.tail.empty() ? kNaN : static_cast<double>(head_hits) / static_cast<double>(split.tail.size());
  if (input.balanced) {
    if (input.balanced->num_classes != data.num_classes) {
      throw Error(ErrorCode::ShapeMismatch, "balanced counterpart has a different class count");
    }
    const Model* bmodel = input.balanced_model ? input.balanced_model : primary;
    const ClassSimilarityTable btable = similarity_of(*input.balanced, bmodel, config.score_mode);
    std::size_t agree = 0;
    std::vector<double> rhos;
    for (std::size_t c = 0; c < data.num_classes; ++c) {
      const int label = static_cast<int>(c);
      if (table.most_similar(label) == btable.most_similar(label)) ++agree;
      auto lt = score_row(table, label);
      auto bal = score_row(btable, label);
      lt.erase(lt.begin() + static_cast<std::ptrdiff_t>(c));
      bal.erase(bal.begin() + static_cast<std::ptrdiff_t>(c));
      rhos.push_back(spearman(lt, bal));
    }
    affinity.top1_agreement = static_cast<double>(agree) / static_cast<double>(data.num_classes);
    affinity.rank_correlation = mean_of_finite(rhos);
  }
  return report;
}

}  // namespace geoprior
