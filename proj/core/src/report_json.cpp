#include "geoprior/report_json.hpp"

#include <cmath>

#include <json.hpp>

namespace geoprior {

namespace {

using Json = nlohmann::ordered_json;

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json numbers(std::span<const double> v) {
  Json out = Json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

Json optional_number(const std::optional<double>& v) { return v ? number(*v) : Json(nullptr); }

Json matrix(const Matrix& m) {
  Json out = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) out.push_back(numbers(m.row(r)));
  return out;
}

Json int_map(const std::map<int, int>& m) {
  Json out = Json::object();
  for (const auto& [k, v] : m) out[std::to_string(k)] = v;
  return out;
}

Json schedule(const PhaseSchedule& s) { return Json{{"epochs", s.epochs}, {"lr", s.lr}}; }

Json config_json(const PipelineConfig& c) {
  Json model{{"input_dim", c.model.input_dim},
             {"hidden", c.model.hidden},
             {"embedding_dim", c.model.embedding_dim},
             {"num_classes", c.model.num_classes}};
  Json train{{"phase1", schedule(c.train.phase1)},
             {"phase2", schedule(c.train.phase2)},
             {"phase3", schedule(c.train.phase3)},
             {"momentum", c.train.momentum},
             {"batch_size", c.train.batch_size},
             {"lr_decay", to_string(c.train.decay)},
             {"seed", c.train.seed}};
  Json fur{{"n_t", c.fur.n_t},
           {"n_a", c.fur.n_a},
           {"k_top", c.fur.k_top ? Json(*c.fur.k_top) : Json(nullptr)},
           {"scale", c.fur.scale},
           {"scaling", to_string(c.fur.scaling)},
           {"allocation", to_string(c.fur.allocation)}};
  Json split{{"head_classes", c.split.head_classes}, {"head_min_count", c.split.head_min_count}};
  Json groups{{"head_above", c.groups.head_above},
              {"tail_below", c.groups.tail_below},
              {"factor", c.groups.factor}};
  return Json{{"model", model},
              {"train", train},
              {"fur", fur},
              {"split", split},
              {"groups", groups},
              {"score_mode", to_string(c.score_mode)},
              {"centered_geometry", c.centered_geometry},
              {"top_p", c.top_p},
              {"phase4", c.phase4}};
}

Json accuracy_json(const AccuracyReport& a) {
  Json recall = Json::array();
  for (const auto& r : a.per_class_recall) recall.push_back(optional_number(r));
  Json out{{"samples", a.samples}, {"overall", number(a.overall)}};
  // Empty groups are omitted rather than reported as zero.
  if (a.head) out["head"] = number(*a.head);
  if (a.middle) out["middle"] = number(*a.middle);
  if (a.tail) out["tail"] = number(*a.tail);
  out["per_class_recall"] = recall;
  return out;
}

std::string dump(const Json& j, int indent) { return j.dump(indent) + "\n"; }

}  // namespace

std::string to_string(ScoreMode mode) { return mode == ScoreMode::probabilities ? "probabilities" : "logits"; }

std::string to_string(LrDecay decay) {
  switch (decay) {
    case LrDecay::cosine: return "cosine";
    case LrDecay::linear: return "linear";
    case LrDecay::none: return "none";
  }
  return "none";
}

std::string to_string(FurScaling scaling) {
  return scaling == FurScaling::eigenvalue ? "eigenvalue" : "sqrt_eigenvalue";
}

std::string to_string(TailAllocation allocation) {
  return allocation == TailAllocation::per_sample ? "per_sample" : "per_class";
}

std::string to_string(ClassGroup group) {
  switch (group) {
    case ClassGroup::head: return "head";
    case ClassGroup::middle: return "middle";
    case ClassGroup::tail: return "tail";
  }
  return "tail";
}

std::string to_json(const PipelineConfig& config, int indent) { return dump(config_json(config), indent); }

std::string to_json(const SynthConfig& c, int indent) {
  Json spectrum = Json::array();
  for (const auto& s : c.spectrum) spectrum.push_back(numbers(s));
  Json j{{"classes", c.classes},
         {"dim", c.dim},
         {"imbalance_factor", c.imbalance_factor},
         {"max_count", c.max_count},
         {"basis_groups", c.basis_groups},
         {"spectrum", spectrum},
         {"top_eigenvalue", c.top_eigenvalue},
         {"spectrum_decay", c.spectrum_decay},
         {"mean_scale", c.mean_scale},
         {"group_pull", c.group_pull},
         {"seed", c.seed}};
  return dump(j, indent);
}

std::string to_json(const RunReport& r, int indent) {
  Json groups = Json::array();
  for (ClassGroup g : r.groups) groups.push_back(to_string(g));
  Json table = Json::array();
  for (const auto& row : r.class_similarity.rows) {
    Json entries = Json::array();
    for (const auto& e : row) entries.push_back(Json{{"class", e.label}, {"score", number(e.score)}});
    table.push_back(entries);
  }
  Json phases = Json::array();
  for (const auto& p : r.phases) {
    phases.push_back(Json{{"name", p.name},
                          {"epochs", p.epochs},
                          {"loss_curve", numbers(p.loss_curve)},
                          {"accuracy", accuracy_json(p.accuracy)},
                          {"tail_recall", optional_number(p.tail_recall)}});
  }
  Json methods = Json::object();
  methods["ERM"] = optional_number(r.erm().tail_recall);
  if (const auto* p = r.phase("phase2")) methods["FUR-Decoupled"] = optional_number(p->tail_recall);
  if (const auto* p = r.phase("phase3")) methods["FUR"] = optional_number(p->tail_recall);
  Json shift = Json::object();
  for (const auto& [t, s] : r.tail_shift) shift[std::to_string(t)] = number(s);

  Json j{{"config", config_json(r.config)},
         {"train_counts", r.train_counts},
         {"groups", groups},
         {"split", Json{{"head", r.split.head}, {"tail", r.split.tail}}},
         {"class_similarity", table},
         {"match", int_map(r.match)},
         {"geometry",
          Json{{"top_k_ratio", numbers(r.geometry.top_k_ratio)}, {"similarity", matrix(r.geometry.similarity)}}},
         {"phases", phases},
         {"tail_recall", methods},
         {"tail_shift", shift},
         {"phase_isolation",
          Json{{"phase2_feature_unchanged", r.phase2_feature_unchanged},
               {"phase3_classifier_unchanged", r.phase3_classifier_unchanged}}}};
  return dump(j, indent);
}

std::string to_json(const PhenomenaReport& r, int indent) {
  const auto& c = r.config;
  Json config{{"top_k", c.top_k},
              {"top_p", c.top_p},
              {"centered", c.centered},
              {"score_mode", to_string(c.score_mode)},
              {"head_classes", c.split.head_classes},
              {"head_min_count", c.split.head_min_count},
              {"baseline_trials", c.baseline_trials},
              {"dominance_threshold", c.dominance_threshold},
              {"seed", c.seed}};
  Json spectral{{"ratio", numbers(r.spectral.ratio)},
                {"mean_ratio", number(r.spectral.mean_ratio)},
                {"min_ratio", number(r.spectral.min_ratio)},
                {"isotropic_control", number(r.spectral.isotropic_control)},
                {"above_control", r.spectral.above_control},
                {"dominant", r.spectral.dominant}};
  Json rank{{"per_class", numbers(r.rank_correlation.per_class)},
            {"mean", number(r.rank_correlation.mean)},
            {"positive", r.rank_correlation.positive}};
  Json cross{{"status", r.cross_model.status == CheckStatus::ok ? "ok" : "InsufficientModels"}};
  if (r.cross_model.status == CheckStatus::ok) {
    cross["baseline"] = Json{{"mean", number(r.cross_model.baseline.mean)},
                             {"stddev", number(r.cross_model.baseline.stddev)},
                             {"trials", r.cross_model.baseline.trials}};
    Json pairs = Json::array();
    for (const auto& p : r.cross_model.pairs) {
      pairs.push_back(Json{{"a", p.a},
                           {"b", p.b},
                           {"per_class", numbers(p.per_class)},
                           {"mean", number(p.mean)},
                           {"z_score", number(p.z_score)},
                           {"within_two_sigma", p.within_two_sigma}});
    }
    cross["pairs"] = pairs;
    cross["near_random"] = r.cross_model.near_random;
  }
  const auto& h = r.head_affinity;
  Json affinity{{"tail", h.tail},
                {"most_similar", int_map(h.most_similar)},
                {"head_fraction", number(h.head_fraction)},
                {"top1_agreement", optional_number(h.top1_agreement)},
                {"rank_correlation", optional_number(h.rank_correlation)}};
  Json j{{"config", config},
         {"spectral_concentration", spectral},
         {"similarity_rank_correlation", rank},
         {"cross_model_similarity", cross},
         {"tail_head_affinity", affinity}};
  return dump(j, indent);
}

}  // namespace geoprior
