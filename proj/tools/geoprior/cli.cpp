#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geoprior/dataio.hpp"
#include "geoprior/error.hpp"
#include "geoprior/fur.hpp"
#include "geoprior/geometry.hpp"
#include "geoprior/model.hpp"
#include "geoprior/phenomena.hpp"
#include "geoprior/pipeline.hpp"
#include "geoprior/randvec.hpp"
#include "geoprior/report_json.hpp"

namespace geoprior::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Formatting and files

std::string shortest(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string sig6(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string optional_cell(const std::optional<double>& v) { return v ? shortest(*v) : ""; }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::IoError, "cannot create output directory '" + dir.string() + "': " + ec.message());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

/// CSV file whose first line is `# config: <effective config>`.
class Csv {
 public:
  Csv(const fs::path& path, const Json& config) : path_(path) {
    text_ << "# config: " << config.dump() << "\n";
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) text_ << (i ? "," : "") << cells[i];
    text_ << "\n";
  }
  void close() { write_text(path_, text_.str()); }

 private:
  fs::path path_;
  std::ostringstream text_;
};

void write_json(const fs::path& path, const Json& config, const std::string& body_key, const std::string& body) {
  Json doc;
  doc["config"] = config;
  doc[body_key] = Json::parse(body);
  write_text(path, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Config handling

Json typed_value(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  long long i = 0;
  auto ri = std::from_chars(s.data(), s.data() + s.size(), i);
  if (ri.ec == std::errc() && ri.ptr == s.data() + s.size()) return i;
  double d = 0;
  auto rd = std::from_chars(s.data(), s.data() + s.size(), d);
  if (rd.ec == std::errc() && rd.ptr == s.data() + s.size()) return d;
  return s;
}

// Options that are locations or aliases and so stay out of the echo.
bool echo_excluded(const std::string& name) {
  static const std::vector<std::string> skip = {"help", "config", "out", "erm", "no-phase3"};
  return std::find(skip.begin(), skip.end(), name) != skip.end();
}

Json effective_config(const CLI::App& cmd) {
  Json j;
  j["command"] = cmd.get_name();
  for (const CLI::Option* opt : cmd.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || echo_excluded(name)) continue;
    std::vector<std::string> values = opt->count() ? opt->results() : std::vector<std::string>{};
    if (values.empty() && !opt->get_default_str().empty()) values = {opt->get_default_str()};
    const bool many = opt->get_items_expected_max() > 1;
    if (many) {
      // Vector defaults are captured as "[a,b]".
      if (values.size() == 1 && values[0].size() >= 2 && (values[0].front() == '[' || values[0].front() == '{')) {
        std::string inner = values[0].substr(1, values[0].size() - 2);
        values.clear();
        std::stringstream ss(inner);
        for (std::string item; std::getline(ss, item, ',');)
          if (!item.empty()) values.push_back(item);
      }
      Json arr = Json::array();
      for (const auto& v : values) arr.push_back(typed_value(v));
      j[name] = arr;
    } else {
      j[name] = values.empty() ? Json(nullptr) : typed_value(values.back());
    }
  }
  return j;
}

void set_option(CLI::Option* opt, const Json& value) {
  auto to_str = [](const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  opt->clear();
  if (value.is_array()) {
    std::vector<std::string> items;
    for (const auto& v : value) items.push_back(to_str(v));
    opt->add_result(items);
  } else {
    opt->add_result(to_str(value));
  }
  opt->run_callback();
}

// Flags win over the config file; the config file wins over GEOPRIOR_SEED.
void apply_config(CLI::App& cmd, const std::string& path) {
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config file '" + path + "'");
    Json doc;
    try {
      doc = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, "config file '" + path + "' is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "config file must hold a JSON object");
    auto apply = [&](const Json& section, bool strict) {
      for (const auto& [key, value] : section.items()) {
        if (value.is_object()) continue;  // another command's section
        CLI::Option* opt = cmd.get_option_no_throw("--" + key);
        if (!opt || key == "config") {
          if (strict) throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "' for command " + cmd.get_name());
          continue;
        }
        if (opt->count() == 0) set_option(opt, value);
      }
    };
    if (doc.contains(cmd.get_name()) && doc[cmd.get_name()].is_object()) apply(doc[cmd.get_name()], true);
    apply(doc, false);
  }
  CLI::Option* seed = cmd.get_option_no_throw("--seed");
  if (seed && seed->count() == 0) {
    if (const char* env = std::getenv("GEOPRIOR_SEED"); env && *env) set_option(seed, Json(std::string(env)));
  }
}

// ---------------------------------------------------------------------------
// Parsing helpers

std::map<int, int> parse_pairs(const std::vector<std::string>& items, const char* what) {
  std::map<int, int> out;
  for (const auto& item : items) {
    const auto colon = item.find(':');
    int a = 0;
    int b = 0;
    const bool ok = colon != std::string::npos &&
                    std::from_chars(item.data(), item.data() + colon, a).ec == std::errc() &&
                    std::from_chars(item.data() + colon + 1, item.data() + item.size(), b).ec == std::errc();
    if (!ok) throw Error(ErrorCode::InvalidConfig, std::string(what) + ": expected A:B, got '" + item + "'");
    out[a] = b;
  }
  return out;
}

std::vector<int> parse_groups(const std::string& text, std::size_t classes) {
  if (text == "paired") return paired_basis_groups(classes);
  if (text == "independent") return {};
  std::vector<int> groups;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    int g = 0;
    if (std::from_chars(item.data(), item.data() + item.size(), g).ec != std::errc()) {
      throw Error(ErrorCode::InvalidConfig, "--groups: expected paired, independent or a comma list, got '" + text + "'");
    }
    groups.push_back(g);
  }
  if (groups.size() != classes) {
    throw Error(ErrorCode::InvalidConfig, "--groups lists " + std::to_string(groups.size()) + " entries for " +
                                              std::to_string(classes) + " classes");
  }
  return groups;
}

FurScaling parse_scaling(const std::string& s) {
  return s == "sqrt_eigenvalue" ? FurScaling::sqrt_eigenvalue : FurScaling::eigenvalue;
}

ScoreMode parse_score_mode(const std::string& s) { return s == "logits" ? ScoreMode::logits : ScoreMode::probabilities; }

LrDecay parse_decay(const std::string& s) {
  if (s == "linear") return LrDecay::linear;
  if (s == "none") return LrDecay::none;
  return LrDecay::cosine;
}

FeatureSet load_data(const std::string& path) {
  FeatureSet set = load_features(path);
  set.validate();
  return set;
}

Model load_model_for(const std::string& path, const FeatureSet& data) {
  Model m = Model::load(path);
  if (m.input_dim() != data.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "model '" + path + "' expects dimension " + std::to_string(m.input_dim()) +
                                                  ", data has " + std::to_string(data.dim()));
  }
  if (m.num_classes() < data.num_classes) {
    throw Error(ErrorCode::ShapeMismatch, "model '" + path + "' has " + std::to_string(m.num_classes()) +
                                              " classes, data has " + std::to_string(data.num_classes));
  }
  return m;
}

FeatureSet with_classes(FeatureSet set, std::size_t classes) {
  set.num_classes = std::max(set.num_classes, classes);
  return set;
}

std::vector<int> present_classes(const FeatureSet& set) {
  std::vector<int> out;
  const auto counts = set.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] > 0) out.push_back(static_cast<int>(c));
  return out;
}

// ---------------------------------------------------------------------------
// Commands

// Boolean flag whose default shows up in the config echo.
CLI::Option* add_switch(CLI::App* cmd, const std::string& name, bool& value, const std::string& help) {
  return cmd->add_flag(name, value, help)->default_str(value ? "true" : "false");
}

struct Common {
  std::uint64_t seed = 0;
  std::string config;
  std::string out = ".";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed (fallback: GEOPRIOR_SEED)");
  cmd->add_option("--config", c.config, "JSON config file; flags take precedence");
  cmd->add_option("--out", c.out, "Output directory");
}

struct SynthArgs {
  Common common;
  std::size_t classes = 10;
  std::size_t dim = 16;
  double imbalance = 100.0;
  std::size_t max_count = 1000;
  std::string groups = "paired";
  double mean_scale = 3.0;
  double group_pull = 0.5;
  double top_eig = 4.0;
  double decay = 0.7;
  std::size_t test_per_class = 100;
};

void cmd_synth(const CLI::App& cmd, const SynthArgs& a) {
  const Json config = effective_config(cmd);
  SynthConfig sc;
  sc.classes = a.classes;
  sc.dim = a.dim;
  sc.imbalance_factor = a.imbalance;
  sc.max_count = a.max_count;
  sc.basis_groups = parse_groups(a.groups, a.classes);
  sc.mean_scale = a.mean_scale;
  sc.group_pull = a.group_pull;
  sc.top_eigenvalue = a.top_eig;
  sc.spectrum_decay = a.decay;
  sc.seed = a.common.seed;
  sc.validate();
  const Benchmark bm = make_benchmark(sc, a.test_per_class);

  const fs::path dir = a.common.out;
  ensure_dir(dir);
  const SaveOptions opts{.comment = "config: " + config.dump(), .provenance = {}};
  save_features(bm.train.data, dir / "train.fgeo", FileFormat::binary);
  save_features(bm.train.data, dir / "train.csv", FileFormat::csv, opts);
  save_features(bm.test, dir / "test.fgeo", FileFormat::binary);
  save_features(bm.test, dir / "test.csv", FileFormat::csv, opts);

  Json generators = Json::array();
  for (std::size_t c = 0; c < bm.train.generators.size(); ++c) {
    const auto& g = bm.train.generators[c];
    Json basis = Json::array();
    for (std::size_t i = 0; i < g.basis.cols(); ++i) basis.push_back(g.basis.column(i));
    generators.push_back(Json{{"class", c},
                              {"basis_group", g.basis_group},
                              {"mean", g.mean},
                              {"spectrum", g.spectrum},
                              {"eigenvectors", basis}});
  }
  Json manifest;
  manifest["config"] = config;
  manifest["synth"] = Json::parse(to_json(sc));
  manifest["train_counts"] = bm.train.counts;
  manifest["test_per_class"] = a.test_per_class;
  manifest["files"] = {"train.fgeo", "train.csv", "test.fgeo", "test.csv"};
  manifest["generators"] = generators;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

struct AnalyzeArgs {
  Common common;
  std::string input;
  std::size_t top = 5;
  bool centered = false;
  std::vector<std::string> pairs;
};

void cmd_analyze(const CLI::App& cmd, const AnalyzeArgs& a) {
  const Json config = effective_config(cmd);
  const FeatureSet data = load_data(a.input);
  if (a.top < 1 || a.top > data.dim()) {
    throw Error(ErrorCode::InvalidArgument, "--top must be in [1, " + std::to_string(data.dim()) + "]");
  }
  const auto pairs = parse_pairs(a.pairs, "--pairs");
  for (const auto& [x, y] : pairs) {
    for (int c : {x, y})
      if (c < 0 || static_cast<std::size_t>(c) >= data.num_classes)
        throw Error(ErrorCode::UnknownClass, "class " + std::to_string(c) + " not in feature set");
  }

  const auto classes = present_classes(data);
  std::vector<GeometryBasis> geoms;
  for (int c : classes) geoms.push_back(geometry_of(data, c, a.centered));

  const fs::path dir = a.common.out;
  ensure_dir(dir);
  Csv eig(dir / "eigenvalues.csv", config);
  eig.row({"class", "index", "eigenvalue"});
  for (const auto& g : geoms)
    for (std::size_t i = 0; i < g.dim(); ++i) eig.row({std::to_string(g.class_id), std::to_string(i), shortest(g.eigenvalues[i])});
  eig.close();

  Csv ratio(dir / "top_ratio.csv", config);
  ratio.row({"class", "count", "top_k_ratio"});
  Json ratios = Json::object();
  for (const auto& g : geoms) {
    const double total = std::accumulate(g.eigenvalues.begin(), g.eigenvalues.end(), 0.0);
    const double r = total > 0.0 ? top_k_eigenvalue_ratio(g, a.top) : std::nan("");
    ratio.row({std::to_string(g.class_id), std::to_string(g.sample_count), shortest(r)});
    ratios[std::to_string(g.class_id)] = std::isfinite(r) ? Json(r) : Json(nullptr);
  }
  ratio.close();

  const Matrix sim = similarity_matrix(geoms, a.top);
  Csv simcsv(dir / "similarity.csv", config);
  std::vector<std::string> header{"class"};
  for (int c : classes) header.push_back(std::to_string(c));
  simcsv.row(header);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    std::vector<std::string> cells{std::to_string(classes[i])};
    for (std::size_t j = 0; j < classes.size(); ++j) cells.push_back(sig6(sim(i, j)));
    simcsv.row(cells);
  }
  simcsv.close();

  for (const auto& [x, y] : pairs) {
    const Matrix m = alignment_matrix(geometry_of(data, x, a.centered), geometry_of(data, y, a.centered));
    Csv csv(dir / ("alignment_" + std::to_string(x) + "_" + std::to_string(y) + ".csv"), config);
    std::vector<std::string> head{"row"};
    for (std::size_t j = 0; j < m.cols(); ++j) head.push_back("eta" + std::to_string(j));
    csv.row(head);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      std::vector<std::string> cells{"xi" + std::to_string(i)};
      for (std::size_t j = 0; j < m.cols(); ++j) cells.push_back(sig6(m(i, j)));
      csv.row(cells);
    }
    csv.close();
  }

  Json summary;
  summary["config"] = config;
  summary["classes"] = classes;
  summary["top_k_ratio"] = ratios;
  summary["isotropic_control"] = static_cast<double>(a.top) / static_cast<double>(data.dim());
  Json simj = Json::array();
  for (std::size_t i = 0; i < sim.rows(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < sim.cols(); ++j) row.push_back(std::stod(sig6(sim(i, j))));
    simj.push_back(row);
  }
  summary["similarity"] = simj;
  write_text(dir / "analyze.json", summary.dump(2) + "\n");
}

struct SimilarityArgs {
  Common common;
  std::string input;
  std::string model;
  std::string mode = "probabilities";
};

void cmd_similarity(const CLI::App& cmd, const SimilarityArgs& a) {
  const Json config = effective_config(cmd);
  FeatureSet data = load_data(a.input);
  Matrix scores;
  if (!a.model.empty()) {
    const Model m = load_model_for(a.model, data);
    data = with_classes(std::move(data), m.num_classes());
    scores = class_scores(m, data.features, parse_score_mode(a.mode));
  } else {
    scores = centroid_scores(data);
  }
  const ClassSimilarityTable table = class_similarity_table(scores, data.labels);

  const fs::path dir = a.common.out;
  ensure_dir(dir);
  Csv csv(dir / "class_similarity.csv", config);
  csv.row({"class", "rank", "other", "score"});
  Json rows = Json::array();
  for (std::size_t c = 0; c < table.num_classes(); ++c) {
    Json row = Json::array();
    const auto& ranking = table.ranking(static_cast<int>(c));
    for (std::size_t r = 0; r < ranking.size(); ++r) {
      csv.row({std::to_string(c), std::to_string(r + 1), std::to_string(ranking[r].label), sig6(ranking[r].score)});
      row.push_back(Json{{"class", ranking[r].label}, {"score", std::stod(sig6(ranking[r].score))}});
    }
    rows.push_back(row);
  }
  csv.close();
  Json doc;
  doc["config"] = config;
  doc["score_source"] = a.model.empty() ? "centroid" : "model";
  doc["rankings"] = rows;
  write_text(dir / "class_similarity.json", doc.dump(2) + "\n");
}

struct RandvecArgs {
  Common common;
  std::size_t dim = 64;
  std::size_t grid = 101;
  std::size_t draws = 100000;
  std::size_t bins = 50;
};

void cmd_randvec(const CLI::App& cmd, const RandvecArgs& a) {
  const Json config = effective_config(cmd);
  if (a.dim < 2) throw Error(ErrorCode::InvalidArgument, "--dim must be >= 2");
  if (a.grid < 2) throw Error(ErrorCode::InvalidArgument, "--grid must be >= 2");
  const fs::path dir = a.common.out;
  ensure_dir(dir);

  Csv ip(dir / "inner_product.csv", config);
  ip.row({"x", "analytic", "cdf"});
  for (std::size_t i = 0; i < a.grid; ++i) {
    const double x = std::clamp(-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(a.grid - 1), -1.0, 1.0);
    ip.row({shortest(x), shortest(inner_product_pdf(a.dim, x)), shortest(inner_product_cdf(a.dim, x))});
  }
  ip.close();

  Csv ang(dir / "angle.csv", config);
  ang.row({"x", "analytic", "cdf"});
  for (std::size_t i = 0; i < a.grid; ++i) {
    const double t = std::min(std::numbers::pi, std::numbers::pi * static_cast<double>(i) / static_cast<double>(a.grid - 1));
    ang.row({shortest(t), shortest(angle_pdf(a.dim, t)), shortest(angle_cdf(a.dim, t))});
  }
  ang.close();

  Json summary;
  summary["config"] = config;
  summary["probability_abs_below_0.3"] = inner_product_probability(a.dim, -0.3, 0.3);
  if (a.draws > 0) {
    if (a.bins < 1) throw Error(ErrorCode::InvalidArgument, "--bins must be >= 1");
    Rng rng = Rng::stream(a.common.seed, 1);
    const HistogramReport h = mc_validate_pdf(a.dim, a.draws, a.bins, rng);
    Csv hist(dir / "histogram.csv", config);
    hist.row({"x", "analytic", "empirical"});
    for (std::size_t b = 0; b < h.bin_centers.size(); ++b)
      hist.row({shortest(h.bin_centers[b]), shortest(h.analytic_bin_mean[b]), shortest(h.empirical[b])});
    hist.close();
    summary["histogram_max_abs_deviation"] = h.max_abs_deviation;
  }
  write_text(dir / "randvec.json", summary.dump(2) + "\n");
}

struct AugmentArgs {
  Common common;
  std::string input;
  std::string output;
  std::size_t na = 3;
  double scale = 1.0;
  std::string scaling = "eigenvalue";
  std::size_t k_top = 0;
  std::vector<std::string> match;
  std::string model;
  std::size_t head_min = 100;
  std::vector<int> head;
  bool centered = false;
};

void cmd_augment(const CLI::App& cmd, const AugmentArgs& a) {
  const Json config = effective_config(cmd);
  const FeatureSet data = load_data(a.input);
  const auto counts = data.class_counts();
  const HeadTailSplit split = split_head_tail(counts, SplitConfig{a.head, a.head_min});

  FurConfig fur;
  fur.n_a = a.na;
  fur.scale = a.scale;
  fur.scaling = parse_scaling(a.scaling);
  if (a.k_top > 0) fur.k_top = a.k_top;
  fur.validate(data.dim());

  std::vector<int> tail;
  for (int t : split.tail)
    if (counts[static_cast<std::size_t>(t)] > 0) tail.push_back(t);
  std::vector<int> head;
  for (int h : split.head)
    if (counts[static_cast<std::size_t>(h)] > 0) head.push_back(h);

  std::map<int, int> match;
  if (!a.match.empty()) {
    match = parse_pairs(a.match, "--match");
  } else if (!tail.empty()) {
    if (head.empty()) throw Error(ErrorCode::NoHeadClass, "no head class with samples to match tail classes to");
    Matrix scores;
    FeatureSet scored = data;
    if (!a.model.empty()) {
      const Model m = load_model_for(a.model, data);
      scored = with_classes(std::move(scored), m.num_classes());
      scores = class_scores(m, scored.features, ScoreMode::probabilities);
    } else {
      scores = centroid_scores(scored);
    }
    // Classes without samples have no averaged score row; rank only present ones.
    FeatureSet present = scored;
    std::vector<int> remap(scored.num_classes, -1);
    const auto labels = present_classes(scored);
    for (std::size_t i = 0; i < labels.size(); ++i) remap[static_cast<std::size_t>(labels[i])] = static_cast<int>(i);
    Matrix reduced(scores.rows(), labels.size());
    for (std::size_t r = 0; r < scores.rows(); ++r)
      for (std::size_t j = 0; j < labels.size(); ++j) reduced(r, j) = scores(r, static_cast<std::size_t>(labels[j]));
    for (int& y : present.labels) y = remap[static_cast<std::size_t>(y)];
    const ClassSimilarityTable table = class_similarity_table(reduced, present.labels);
    std::vector<int> head_local;
    for (int h : head) head_local.push_back(remap[static_cast<std::size_t>(h)]);
    for (int t : tail) match[t] = labels[static_cast<std::size_t>(most_similar_head(remap[static_cast<std::size_t>(t)], table, head_local))];
  }

  std::map<int, GeometryBasis> geometries;
  for (const auto& [t, h] : match) {
    if (h < 0 || static_cast<std::size_t>(h) >= data.num_classes || counts[static_cast<std::size_t>(h)] == 0) {
      throw Error(ErrorCode::UnmatchedTail, "matched head class " + std::to_string(h) + " has no samples");
    }
    if (!geometries.contains(h)) geometries.emplace(h, geometry_of(data, h, a.centered));
  }

  Rng rng = Rng::stream(a.common.seed, 1);
  const AugmentedFeatureSet out = augment_feature_set(data, tail, match, geometries, fur, rng);
  const fs::path path = a.output;
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  const FileFormat format = format_from_path(path);
  save_features(out.set, path, format, SaveOptions{.comment = "config: " + config.dump(), .provenance = out.provenance});

  Json side;
  side["config"] = config;
  side["tail"] = tail;
  side["head"] = head;
  Json m = Json::object();
  for (const auto& [t, h] : match) m[std::to_string(t)] = h;
  side["match"] = m;
  side["rows"] = out.set.size();
  side["synthetic_rows"] = std::count(out.provenance.begin(), out.provenance.end(), Provenance::synthetic_tail);
  write_text(fs::path(path.string() + ".json"), side.dump(2) + "\n");
}

struct TrainArgs {
  Common common;
  std::string train;
  std::string test;
  std::size_t m1 = 30, m2 = 30, m3 = 5;
  double lr1 = 0.05, lr2 = 0.05, lr3 = 0.001;
  double momentum = 0.9;
  std::size_t batch = 64;
  std::string decay = "cosine";
  std::vector<std::size_t> hidden{64};
  std::size_t embedding = 32;
  std::size_t nt = 32, na = 3, k_top = 0;
  double scale = 0.5;
  std::string scaling = "eigenvalue";
  std::string allocation = "per_sample";
  std::size_t head_min = 100;
  std::vector<int> head;
  double group_factor = 1.0;
  std::string score_mode = "probabilities";
  bool centered_geometry = true;
  std::size_t top_p = 5;
  bool phase4 = false;
  bool erm = false;
  bool no_phase3 = false;
};

void cmd_train(CLI::App& cmd, TrainArgs& a) {
  // Aliases rewrite the options they stand for, so the echo matches an explicit run.
  if (a.erm || a.no_phase3) {
    for (const char* name : a.erm ? std::vector<const char*>{"--m2", "--m3"} : std::vector<const char*>{"--m3"})
      set_option(cmd.get_option(name), Json(0));
  }
  const Json config = effective_config(cmd);

  FeatureSet train;
  FeatureSet test;
  if (a.train.empty()) {
    Benchmark bm = make_benchmark(standard_synth_config(a.common.seed));
    train = std::move(bm.train.data);
    test = std::move(bm.test);
  } else {
    if (a.test.empty()) throw Error(ErrorCode::InvalidConfig, "--train needs a matching --test file");
    train = load_data(a.train);
    test = load_data(a.test);
    const std::size_t classes = std::max(train.num_classes, test.num_classes);
    train.num_classes = test.num_classes = classes;
  }

  PipelineConfig pc;
  pc.model.input_dim = train.dim();
  pc.model.hidden = a.hidden;
  pc.model.embedding_dim = a.embedding;
  pc.model.num_classes = train.num_classes;
  pc.train.phase1 = {a.m1, a.lr1};
  pc.train.phase2 = {a.m2, a.lr2};
  pc.train.phase3 = {a.m3, a.lr3};
  pc.train.momentum = a.momentum;
  pc.train.batch_size = a.batch;
  pc.train.decay = parse_decay(a.decay);
  pc.train.seed = a.common.seed;
  pc.fur.n_t = a.nt;
  pc.fur.n_a = a.na;
  if (a.k_top > 0) pc.fur.k_top = a.k_top;
  pc.fur.scale = a.scale;
  pc.fur.scaling = parse_scaling(a.scaling);
  pc.fur.allocation = a.allocation == "per_class" ? TailAllocation::per_class : TailAllocation::per_sample;
  pc.split = SplitConfig{a.head, a.head_min};
  pc.groups.factor = a.group_factor;
  pc.score_mode = parse_score_mode(a.score_mode);
  pc.centered_geometry = a.centered_geometry;
  pc.top_p = a.top_p;
  pc.phase4 = a.phase4;

  Model model;
  const RunReport report = run_three_stage(train, test, pc, &model);

  const fs::path dir = a.common.out;
  ensure_dir(dir);
  write_json(dir / "report.json", config, "report", to_json(report));
  Csv loss(dir / "loss_curves.csv", config);
  loss.row({"phase", "epoch", "loss"});
  for (const auto& p : report.phases)
    for (std::size_t e = 0; e < p.loss_curve.size(); ++e) loss.row({p.name, std::to_string(e + 1), shortest(p.loss_curve[e])});
  loss.close();
  Csv acc(dir / "accuracy.csv", config);
  acc.row({"phase", "overall", "head", "middle", "tail", "tail_recall"});
  for (const auto& p : report.phases) {
    acc.row({p.name, shortest(p.accuracy.overall), optional_cell(p.accuracy.head), optional_cell(p.accuracy.middle),
             optional_cell(p.accuracy.tail), optional_cell(p.tail_recall)});
  }
  acc.close();
  model.save(dir / "model.gpmd");
}

struct PhenomenaArgs {
  Common common;
  std::string input;
  std::vector<std::string> models;
  std::string balanced;
  std::string balanced_model;
  std::size_t top_k = 5, top_p = 5;
  bool centered = false;
  std::string score_mode = "probabilities";
  std::size_t head_min = 100;
  std::size_t trials = 2000;
};

void cmd_phenomena(const CLI::App& cmd, const PhenomenaArgs& a) {
  const Json config = effective_config(cmd);
  FeatureSet data;
  std::optional<FeatureSet> balanced;
  if (a.input.empty()) {
    Benchmark bm = make_benchmark(standard_synth_config(a.common.seed));
    data = std::move(bm.train.data);
    balanced = std::move(bm.test);
  } else {
    data = load_data(a.input);
  }
  if (!a.balanced.empty()) balanced = load_data(a.balanced);

  std::vector<Model> models;
  for (const auto& path : a.models) models.push_back(load_model_for(path, data));
  std::optional<Model> bmodel;
  if (!a.balanced_model.empty()) {
    if (!balanced) throw Error(ErrorCode::InvalidConfig, "--balanced-model needs balanced data");
    bmodel = load_model_for(a.balanced_model, *balanced);
  }
  std::size_t classes = data.num_classes;
  for (const auto& m : models) classes = std::max(classes, m.num_classes());
  if (balanced) classes = std::max(classes, balanced->num_classes);
  data.num_classes = classes;
  if (balanced) balanced->num_classes = classes;

  PhenomenaInput input;
  input.data = &data;
  for (const auto& m : models) input.models.push_back(&m);
  if (balanced) input.balanced = &*balanced;
  if (bmodel) input.balanced_model = &*bmodel;
  PhenomenaConfig pc;
  pc.top_k = a.top_k;
  pc.top_p = a.top_p;
  pc.centered = a.centered;
  pc.score_mode = parse_score_mode(a.score_mode);
  pc.split.head_min_count = a.head_min;
  pc.baseline_trials = a.trials;
  pc.seed = a.common.seed;
  const PhenomenaReport report = validate_phenomena(input, pc);

  const fs::path dir = a.common.out;
  ensure_dir(dir);
  write_json(dir / "phenomena.json", config, "phenomena", to_json(report));
}

struct ProjectArgs {
  Common common;
  std::string input;
  std::string model;
};

void cmd_project(const CLI::App& cmd, const ProjectArgs& a) {
  const Json config = effective_config(cmd);
  const FeatureSet data = load_data(a.input);
  if (data.size() == 0) throw Error(ErrorCode::EmptyInput, "no samples to project");
  Matrix z = data.features;
  if (!a.model.empty()) z = load_model_for(a.model, data).embed(data.features);
  if (z.cols() < 2) throw Error(ErrorCode::InvalidArgument, "projection needs at least 2 feature dimensions");

  EigenDecomposition eig = sym_eigen(covariance_of_rows(z, true));
  std::vector<double> mean(z.cols(), 0.0);
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t j = 0; j < z.cols(); ++j) mean[j] += z(r, j);
  for (double& m : mean) m /= static_cast<double>(z.rows());

  const fs::path dir = a.common.out;
  ensure_dir(dir);
  Csv csv(dir / "projection.csv", config);
  csv.row({"label", "pc1", "pc2"});
  for (std::size_t r = 0; r < z.rows(); ++r) {
    double p1 = 0.0;
    double p2 = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) {
      const double c = z(r, j) - mean[j];
      p1 += c * eig.eigenvectors(j, 0);
      p2 += c * eig.eigenvectors(j, 1);
    }
    csv.row({std::to_string(data.labels[r]), shortest(p1), shortest(p2)});
  }
  csv.close();
}

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::config: return kConfigError;
    case ErrorCategory::numeric: return kNumericError;
    case ErrorCategory::data: return kDataError;
  }
  return kDataError;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Class-geometry priors for long-tailed classification", "geoprior"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic long-tailed dataset");
  add_common(c_synth, synth.common);
  c_synth->add_option("--classes", synth.classes, "Number of classes");
  c_synth->add_option("--dim", synth.dim, "Feature dimension");
  c_synth->add_option("--if", synth.imbalance, "Imbalance factor (max count / min count)");
  c_synth->add_option("--max", synth.max_count, "Samples in the largest class");
  c_synth->add_option("--groups", synth.groups, "Basis sharing: paired, independent, or a comma list");
  c_synth->add_option("--mean-scale", synth.mean_scale, "Distance of class means from the origin");
  c_synth->add_option("--group-pull", synth.group_pull, "Pull of class means toward their group centroid");
  c_synth->add_option("--top-eig", synth.top_eig, "Largest covariance eigenvalue");
  c_synth->add_option("--decay", synth.decay, "Geometric decay of the spectrum");
  c_synth->add_option("--test-per-class", synth.test_per_class, "Balanced test samples per class");

  AnalyzeArgs analyze;
  auto* c_analyze = app.add_subcommand("analyze", "Per-class geometry, spectral ratios and similarity");
  add_common(c_analyze, analyze.common);
  c_analyze->add_option("--input", analyze.input, "Feature file")->required();
  c_analyze->add_option("--top", analyze.top, "Eigenvectors compared / spectral ratio k");
  add_switch(c_analyze, "--centered", analyze.centered, "Mean-center class features");
  c_analyze->add_option("--pairs", analyze.pairs, "Class pairs A:B for alignment matrices");

  SimilarityArgs similarity;
  auto* c_sim = app.add_subcommand("similarity", "Class similarity rankings from averaged scores");
  add_common(c_sim, similarity.common);
  c_sim->add_option("--input", similarity.input, "Feature file")->required();
  c_sim->add_option("--model", similarity.model, "Model checkpoint; nearest-centroid scores when absent");
  c_sim->add_option("--mode", similarity.mode, "probabilities or logits")
      ->check(CLI::IsMember({"probabilities", "logits"}));

  RandvecArgs randvec;
  auto* c_rand = app.add_subcommand("randvec", "Random unit-vector angle and inner-product distributions");
  add_common(c_rand, randvec.common);
  c_rand->add_option("--dim", randvec.dim, "Dimension P");
  c_rand->add_option("--grid", randvec.grid, "Grid points for the pdf/cdf tables");
  c_rand->add_option("--draws", randvec.draws, "Monte-Carlo pairs for the histogram (0: none)");
  c_rand->add_option("--bins", randvec.bins, "Histogram bins");

  AugmentArgs augment;
  auto* c_aug = app.add_subcommand("augment", "Add FUR perturbations of tail features");
  add_common(c_aug, augment.common);
  c_aug->add_option("--input", augment.input, "Feature file")->required();
  c_aug->add_option("--output", augment.output, "Augmented feature file (format from extension)")->required();
  c_aug->add_option("--na", augment.na, "Perturbations per tail sample");
  c_aug->add_option("--scale", augment.scale, "Noise scale");
  c_aug->add_option("--scaling", augment.scaling, "eigenvalue or sqrt_eigenvalue")
      ->check(CLI::IsMember({"eigenvalue", "sqrt_eigenvalue"}));
  c_aug->add_option("--k-top", augment.k_top, "Eigenvectors used (0: all)");
  c_aug->add_option("--match", augment.match, "Explicit tail:head matches");
  c_aug->add_option("--model", augment.model, "Checkpoint used to rank class similarity");
  c_aug->add_option("--head-min", augment.head_min, "Minimum count of a head class");
  c_aug->add_option("--head", augment.head, "Explicit head classes");
  add_switch(c_aug, "--centered", augment.centered, "Mean-center head features for geometry");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Three-stage training with FUR");
  add_common(c_train, train.common);
  c_train->add_option("--train", train.train, "Training feature file (default: synthetic benchmark)");
  c_train->add_option("--test", train.test, "Test feature file");
  c_train->add_option("--m1", train.m1, "Phase-1 epochs");
  c_train->add_option("--m2", train.m2, "Phase-2 epochs");
  c_train->add_option("--m3", train.m3, "Phase-3 epochs");
  c_train->add_option("--lr1", train.lr1, "Phase-1 learning rate");
  c_train->add_option("--lr2", train.lr2, "Phase-2 learning rate");
  c_train->add_option("--lr3", train.lr3, "Phase-3 learning rate");
  c_train->add_option("--momentum", train.momentum, "SGD momentum");
  c_train->add_option("--batch", train.batch, "Mini-batch size for Phases 1 and 3");
  c_train->add_option("--decay", train.decay, "cosine, linear or none")
      ->check(CLI::IsMember({"cosine", "linear", "none"}));
  c_train->add_option("--hidden", train.hidden, "Hidden layer widths");
  c_train->add_option("--embedding", train.embedding, "Feature dimension of the network");
  c_train->add_option("--nt", train.nt, "Real tail samples per balanced batch");
  c_train->add_option("--na", train.na, "Perturbations per tail sample");
  c_train->add_option("--k-top", train.k_top, "Eigenvectors used (0: all)");
  c_train->add_option("--scale", train.scale, "FUR noise scale");
  c_train->add_option("--scaling", train.scaling, "eigenvalue or sqrt_eigenvalue")
      ->check(CLI::IsMember({"eigenvalue", "sqrt_eigenvalue"}));
  c_train->add_option("--allocation", train.allocation, "per_sample or per_class")
      ->check(CLI::IsMember({"per_sample", "per_class"}));
  c_train->add_option("--head-min", train.head_min, "Minimum count of a head class");
  c_train->add_option("--head", train.head, "Explicit head classes");
  c_train->add_option("--group-factor", train.group_factor, "Scale of the head/middle/tail report thresholds");
  c_train->add_option("--score-mode", train.score_mode, "probabilities or logits")
      ->check(CLI::IsMember({"probabilities", "logits"}));
  c_train->add_option("--centered-geometry", train.centered_geometry, "Mean-center features for head geometry")
      ->default_str("true");
  c_train->add_option("--top-p", train.top_p, "Eigenvectors in geometry diagnostics");
  add_switch(c_train, "--phase4", train.phase4, "Re-match and re-balance after Phase 3");
  add_switch(c_train, "--erm", train.erm, "Phase 1 only (same as --m2 0 --m3 0)");
  add_switch(c_train, "--no-phase3", train.no_phase3, "Decoupled variant (same as --m3 0)");

  PhenomenaArgs phen;
  auto* c_phen = app.add_subcommand("phenomena", "Checks of the four geometry phenomena");
  add_common(c_phen, phen.common);
  c_phen->add_option("--input", phen.input, "Feature file (default: synthetic benchmark)");
  c_phen->add_option("--models", phen.models, "Model checkpoints");
  c_phen->add_option("--balanced", phen.balanced, "Balanced counterpart feature file");
  c_phen->add_option("--balanced-model", phen.balanced_model, "Checkpoint trained on the balanced data");
  c_phen->add_option("--top-k", phen.top_k, "Spectral ratio k");
  c_phen->add_option("--top-p", phen.top_p, "Eigenvectors compared");
  add_switch(c_phen, "--centered", phen.centered, "Mean-center class features");
  c_phen->add_option("--score-mode", phen.score_mode, "probabilities or logits")
      ->check(CLI::IsMember({"probabilities", "logits"}));
  c_phen->add_option("--head-min", phen.head_min, "Minimum count of a head class");
  c_phen->add_option("--trials", phen.trials, "Random-basis Monte-Carlo trials");

  ProjectArgs project;
  auto* c_proj = app.add_subcommand("project", "2-D PCA coordinates of features");
  add_common(c_proj, project.common);
  c_proj->add_option("--input", project.input, "Feature file")->required();
  c_proj->add_option("--model", project.model, "Project the model's features instead of the inputs");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    auto configure = [](CLI::App& cmd, const Common& c) { apply_config(cmd, c.config); };
    if (c_synth->parsed()) {
      configure(*c_synth, synth.common);
      cmd_synth(*c_synth, synth);
    } else if (c_analyze->parsed()) {
      configure(*c_analyze, analyze.common);
      cmd_analyze(*c_analyze, analyze);
    } else if (c_sim->parsed()) {
      configure(*c_sim, similarity.common);
      cmd_similarity(*c_sim, similarity);
    } else if (c_rand->parsed()) {
      configure(*c_rand, randvec.common);
      cmd_randvec(*c_rand, randvec);
    } else if (c_aug->parsed()) {
      configure(*c_aug, augment.common);
      cmd_augment(*c_aug, augment);
    } else if (c_train->parsed()) {
      configure(*c_train, train.common);
      cmd_train(*c_train, train);
    } else if (c_phen->parsed()) {
      configure(*c_phen, phen.common);
      cmd_phenomena(*c_phen, phen);
    } else if (c_proj->parsed()) {
      configure(*c_proj, project.common);
      cmd_project(*c_proj, project);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}

}  // namespace geoprior::cli
