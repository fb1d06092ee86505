#include "geoprior/fur.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "geoprior/error.hpp"

namespace geoprior {

void FurConfig::validate(std::size_t dim) const {
  if (n_t < 1) throw Error(ErrorCode::InvalidConfig, "FUR: n_t must be >= 1");
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw Error(ErrorCode::InvalidConfig, "FUR: scale must be >= 0");
  if (k_top && (*k_top < 1 || *k_top > dim)) {
    throw Error(ErrorCode::InvalidConfig, "FUR: k_top must be in [1, " + std::to_string(dim) + "]");
  }
}

std::vector<double> fur_translate(std::span<const double> z, const GeometryBasis& head, const FurConfig& cfg,
                                  std::span<const double> noise) {
  const std::size_t p = head.dim();
  if (z.size() != p) {
    throw Error(ErrorCode::DimensionMismatch, "FUR: feature has dimension " + std::to_string(z.size()) +
                                                  ", head geometry has " + std::to_string(p));
  }
  cfg.validate(p);
  const std::size_t k = cfg.directions(p);
  if (noise.size() < k) throw Error(ErrorCode::DimensionMismatch, "FUR: need one noise value per direction");

  std::vector<double> out(z.begin(), z.end());
  for (std::size_t j = 0; j < k; ++j) {
    const double lambda = head.eigenvalues[j];
    const double weight = cfg.scaling == FurScaling::eigenvalue ? lambda : std::sqrt(std::max(lambda, 0.0));
    const double step = cfg.scale * noise[j] * weight;
    if (step == 0.0) continue;
    for (std::size_t r = 0; r < p; ++r) out[r] += step * head.eigenvectors(r, j);
  }
  return out;
}

std::vector<double> fur_perturb(std::span<const double> z, const GeometryBasis& head, const FurConfig& cfg, Rng& rng) {
  std::vector<double> noise(cfg.directions(head.dim()));
  for (double& e : noise) e = rng.normal();
  return fur_translate(z, head, cfg, noise);
}

std::size_t AugmentedBatch::count(Provenance p) const {
  return static_cast<std::size_t>(std::count(provenance.begin(), provenance.end(), p));
}

namespace {

std::vector<std::size_t> pool_rows(const FeatureSet& dataset, std::span<const int> classes) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (std::find(classes.begin(), classes.end(), dataset.labels[i]) != classes.end()) rows.push_back(i);
  }
  return rows;
}

const GeometryBasis& matched_geometry(int tail_class, const std::map<int, int>& match,
                                      const std::map<int, GeometryBasis>& head_geometries) {
  const auto m = match.find(tail_class);
  if (m == match.end()) {
    throw Error(ErrorCode::UnmatchedTail, "tail class " + std::to_string(tail_class) + " has no matched head class");
  }
  const auto g = head_geometries.find(m->second);
  if (g == head_geometries.end()) {
    throw Error(ErrorCode::UnmatchedTail, "head class " + std::to_string(m->second) + " matched to tail class " +
                                              std::to_string(tail_class) + " has no geometry");
  }
  return g->second;
}

}  // namespace

AugmentedBatch compose_balanced_batch(const FeatureSet& dataset, std::span<const int> tail_classes,
                                      std::span<const int> head_classes, const std::map<int, int>& match,
                                      const std::map<int, GeometryBasis>& head_geometries, const FurConfig& cfg,
                                      Rng& rng) {
  cfg.validate(dataset.dim());
  if (tail_classes.empty()) throw Error(ErrorCode::InvalidArgument, "compose_balanced_batch: no tail classes");
  if (head_classes.empty()) throw Error(ErrorCode::InsufficientHeadData, "compose_balanced_batch: no head classes");
  for (int t : tail_classes) {
    if (std::find(head_classes.begin(), head_classes.end(), t) != head_classes.end()) {
      throw Error(ErrorCode::InvalidArgument, "class " + std::to_string(t) + " is both head and tail");
    }
  }

  const auto head_pool = pool_rows(dataset, head_classes);
  if (head_pool.empty()) throw Error(ErrorCode::InsufficientHeadData, "head classes have no samples");

  // Draw the real tail rows.
  std::vector<std::size_t> tail_rows;
  tail_rows.reserve(cfg.n_t);
  if (cfg.allocation == TailAllocation::per_sample) {
    const auto tail_pool = pool_rows(dataset, tail_classes);
    if (tail_pool.empty()) throw Error(ErrorCode::InvalidArgument, "tail classes have no samples");
    for (std::size_t i = 0; i < cfg.n_t; ++i) tail_rows.push_back(tail_pool[rng.index(tail_pool.size())]);
  } else {
    std::vector<std::vector<std::size_t>> per_class;
    for (int t : tail_classes) {
      auto rows = dataset.rows_of_class(t);
      if (!rows.empty()) per_class.push_back(std::move(rows));
    }
    if (per_class.empty()) throw Error(ErrorCode::InvalidArgument, "tail classes have no samples");
    for (std::size_t i = 0; i < cfg.n_t; ++i) {
      const auto& rows = per_class[rng.index(per_class.size())];
      tail_rows.push_back(rows[rng.index(rows.size())]);
    }
  }

  const std::size_t p = dataset.dim();
  const std::size_t total = cfg.batch_size();
  struct Row {
    std::vector<double> values;
    int label;
    Provenance tag;
    std::optional<std::size_t> source;  // index into real-tail rows, before shuffling
    std::optional<std::size_t> dataset_row;
  };
  std::vector<Row> rows;
  rows.reserve(total);

  for (std::size_t i = 0; i < tail_rows.size(); ++i) {
    const auto src = dataset.features.row(tail_rows[i]);
    rows.push_back({std::vector<double>(src.begin(), src.end()), dataset.labels[tail_rows[i]], Provenance::real_tail,
                    std::nullopt, tail_rows[i]});
  }
  for (std::size_t i = 0; i < tail_rows.size(); ++i) {
    const int label = dataset.labels[tail_rows[i]];
    const auto& head = matched_geometry(label, match, head_geometries);
    const auto z = dataset.features.row(tail_rows[i]);
    for (std::size_t a = 0; a < cfg.n_a; ++a) {
      rows.push_back({fur_perturb(z, head, cfg, rng), label, Provenance::synthetic_tail, i, std::nullopt});
    }
  }
  const std::size_t head_draws = cfg.n_t * (1 + cfg.n_a);
  for (std::size_t i = 0; i < head_draws; ++i) {
    const std::size_t r = head_pool[rng.index(head_pool.size())];
    const auto src = dataset.features.row(r);
    rows.push_back({std::vector<double>(src.begin(), src.end()), dataset.labels[r], Provenance::real_head,
                    std::nullopt, r});
  }

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  // Unshuffled row k lands at batch position where[k].
  std::vector<std::size_t> where(rows.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) where[order[pos]] = pos;

  AugmentedBatch batch;
  batch.features = Matrix(rows.size(), p);
  batch.labels.resize(rows.size());
  batch.provenance.resize(rows.size());
  batch.source_row.resize(rows.size());
  batch.dataset_row.resize(rows.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const Row& row = rows[order[pos]];
    std::copy(row.values.begin(), row.values.end(), batch.features.row(pos).begin());
    batch.labels[pos] = row.label;
    batch.provenance[pos] = row.tag;
    batch.dataset_row[pos] = row.dataset_row;
    if (row.source) batch.source_row[pos] = where[*row.source];
  }
  return batch;
}

AugmentedFeatureSet augment_feature_set(const FeatureSet& dataset, std::span<const int> tail_classes,
                                        const std::map<int, int>& match,
                                        const std::map<int, GeometryBasis>& head_geometries, const FurConfig& cfg,
                                        Rng& rng) {
  if (dataset.size() > 0) cfg.validate(dataset.dim());
  auto is_tail = [&](int label) {
    return std::find(tail_classes.begin(), tail_classes.end(), label) != tail_classes.end();
  };
  std::size_t synthetic = 0;
  for (int label : dataset.labels)
    if (is_tail(label)) synthetic += cfg.n_a;

  const std::size_t p = dataset.dim();
  AugmentedFeatureSet out;
  out.set.num_classes = dataset.num_classes;
  out.set.features = Matrix(dataset.size() + synthetic, p);
  out.set.labels.reserve(dataset.size() + synthetic);
  out.provenance.reserve(dataset.size() + synthetic);

  std::size_t row = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i, ++row) {
    const auto src = dataset.features.row(i);
    std::copy(src.begin(), src.end(), out.set.features.row(row).begin());
    out.set.labels.push_back(dataset.labels[i]);
    out.provenance.push_back(is_tail(dataset.labels[i]) ? Provenance::real_tail : Provenance::real_head);
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int label = dataset.labels[i];
    if (!is_tail(label) || cfg.n_a == 0) continue;
    const auto& head = matched_geometry(label, match, head_geometries);
    for (std::size_t a = 0; a < cfg.n_a; ++a, ++row) {
      const auto v = fur_perturb(dataset.features.row(i), head, cfg, rng);
      std::copy(v.begin(), v.end(), out.set.features.row(row).begin());
      out.set.labels.push_back(label);
      out.provenance.push_back(Provenance::synthetic_tail);
    }
  }
  return out;
}

}  // namespace geoprior
