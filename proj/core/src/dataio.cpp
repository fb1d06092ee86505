#include "geoprior/dataio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>

#include "geoprior/error.hpp"
#include "geoprior/randvec.hpp"

namespace geoprior {

namespace {

constexpr char kMagic[4] = {'F', 'G', 'E', 'O'};
constexpr char kProvMagic[4] = {'P', 'R', 'O', 'V'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xFF));
    u = static_cast<U>(u >> 8);
  }
}

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  std::string_view take(std::size_t n) {
    need(n);
    std::string_view out(bytes_.data() + pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t offset() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::ParseError, "unexpected end of file at byte offset " + std::to_string(pos_));
    }
  }

  std::string bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

void append_number(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string save_csv(const FeatureSet& set, const SaveOptions& options) {
  std::string out;
  if (!options.comment.empty()) {
    std::istringstream lines(options.comment);
    std::string line;
    while (std::getline(lines, line)) out += "# " + line + "\n";
  }
  out += "label";
  for (std::size_t d = 0; d < set.dim(); ++d) out += ",f" + std::to_string(d);
  const bool with_prov = !options.provenance.empty();
  if (with_prov) out += ",provenance";
  out += '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    out += std::to_string(set.labels[i]);
    for (double v : set.features.row(i)) {
      out += ',';
      append_number(out, v);
    }
    if (with_prov) {
      out += ',';
      out += to_string(options.provenance[i]);
    }
    out += '\n';
  }
  return out;
}

std::string save_binary(const FeatureSet& set, const SaveOptions& options) {
  std::string out(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, set.size());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.dim()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.num_classes));
  for (int label : set.labels) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(label));
  for (double v : set.features.data()) {
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (!options.provenance.empty()) {
    out.append(kProvMagic, 4);
    for (Provenance p : options.provenance) out.push_back(static_cast<char>(p));
  }
  return out;
}

FeatureSet load_csv(const std::string& text, std::vector<Provenance>* provenance) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> header;
  std::string header_line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    header_line = std::string(t);
    break;
  }
  if (header_line.empty()) throw Error(ErrorCode::ParseError, "missing CSV header");
  header = split_commas(header_line);
  if (trim(header[0]) != "label") {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": header must start with 'label'");
  }
  const bool with_prov = header.size() >= 2 && trim(header.back()) == "provenance";
  const std::size_t p = header.size() - 1 - (with_prov ? 1 : 0);
  for (std::size_t d = 0; d < p; ++d) {
    if (trim(header[d + 1]) != "f" + std::to_string(d)) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected column f" + std::to_string(d));
    }
  }

  std::vector<int> labels;
  std::vector<double> values;
  std::vector<Provenance> tags;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    ++row;
    const auto fields = split_commas(t);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + " (line " + std::to_string(line_no) +
                                             "): expected " + std::to_string(header.size()) + " fields, got " +
                                             std::to_string(fields.size()));
    }
    const auto lf = trim(fields[0]);
    int label = -1;
    auto lres = std::from_chars(lf.data(), lf.data() + lf.size(), label);
    if (lres.ec != std::errc() || lres.ptr != lf.data() + lf.size() || label < 0) {
      throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + " (line " + std::to_string(line_no) +
                                             "): invalid label '" + std::string(lf) + "'");
    }
    labels.push_back(label);
    for (std::size_t d = 0; d < p; ++d) {
      const auto f = trim(fields[d + 1]);
      double v = 0.0;
      auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + " (line " + std::to_string(line_no) +
                                               "): invalid value '" + std::string(f) + "' in column f" +
                                               std::to_string(d));
      }
      values.push_back(v);
    }
    if (with_prov) tags.push_back(provenance_from_string(trim(fields.back())));
  }

  Matrix features(labels.size(), p);
  std::copy(values.begin(), values.end(), features.data().begin());
  std::size_t classes = 0;
  for (int l : labels) classes = std::max(classes, static_cast<std::size_t>(l) + 1);
  if (provenance) *provenance = std::move(tags);
  return make_feature_set(std::move(features), std::move(labels), classes);
}

FeatureSet load_binary(std::string bytes, std::vector<Provenance>* provenance) {
  const std::size_t total = bytes.size();
  ByteReader in(std::move(bytes));
  if (in.take(4) != std::string_view(kMagic, 4)) {
    throw Error(ErrorCode::ParseError, "byte offset 0: bad magic, expected FGEO");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) {
    throw Error(ErrorCode::ParseError, "byte offset 4: unsupported version " + std::to_string(version));
  }
  const auto n = in.get<std::uint64_t>();
  const auto p = in.get<std::uint32_t>();
  const auto c = in.get<std::uint32_t>();
  const std::uint64_t body = n * 4ULL + n * static_cast<std::uint64_t>(p) * 4ULL;
  if (in.remaining() < body) {
    throw Error(ErrorCode::DimensionInconsistent, "header declares N=" + std::to_string(n) + ", P=" +
                                                      std::to_string(p) + " but file has " + std::to_string(total) +
                                                      " bytes");
  }
  std::vector<int> labels(n);
  for (auto& l : labels) {
    const auto raw = in.get<std::uint32_t>();
    if (raw >= c) {
      throw Error(ErrorCode::ParseError, "byte offset " + std::to_string(in.offset() - 4) + ": label " +
                                             std::to_string(raw) + " >= C=" + std::to_string(c));
    }
    l = static_cast<int>(raw);
  }
  Matrix features(n, p);
  for (double& v : features.data()) v = static_cast<double>(std::bit_cast<float>(in.get<std::uint32_t>()));

  std::vector<Provenance> tags;
  if (in.remaining() > 0) {
    if (in.remaining() != 4 + n || in.take(4) != std::string_view(kProvMagic, 4)) {
      throw Error(ErrorCode::DimensionInconsistent,
                  "byte offset " + std::to_string(in.offset()) + ": unexpected trailing data");
    }
    tags.resize(n);
    for (auto& t : tags) {
      const auto code = in.get<std::uint8_t>();
      if (code > 2) throw Error(ErrorCode::ParseError, "invalid provenance code " + std::to_string(code));
      t = static_cast<Provenance>(code);
    }
  }
  if (provenance) *provenance = std::move(tags);
  return make_feature_set(std::move(features), std::move(labels), c);
}

}  // namespace

FileFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".csv" ? FileFormat::csv : FileFormat::binary;
}

void save_features(const FeatureSet& set, const std::filesystem::path& path, FileFormat format,
                   const SaveOptions& options) {
  set.validate();
  if (!options.provenance.empty() && options.provenance.size() != set.size()) {
    throw Error(ErrorCode::ShapeMismatch, "provenance length differs from row count");
  }
  write_file(path, format == FileFormat::csv ? save_csv(set, options) : save_binary(set, options));
}

FeatureSet load_features(const std::filesystem::path& path, FileFormat format, std::vector<Provenance>* provenance) {
  auto bytes = read_file(path);
  return format == FileFormat::csv ? load_csv(bytes, provenance) : load_binary(std::move(bytes), provenance);
}

FeatureSet load_features(const std::filesystem::path& path) { return load_features(path, format_from_path(path)); }

// Synthetic data

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (classes < 2) fail("classes must be >= 2");
  if (dim < 2) fail("dim must be >= 2");
  if (!(imbalance_factor >= 1.0) || !std::isfinite(imbalance_factor)) fail("imbalance factor must be >= 1");
  if (max_count < 1) fail("max_count must be >= 1");
  if (static_cast<double>(max_count) / imbalance_factor < 0.5) fail("imbalance factor leaves the last class empty");
  if (!basis_groups.empty() && basis_groups.size() != classes) fail("basis_groups must have one entry per class");
  if (!spectrum.empty()) {
    if (spectrum.size() != classes) fail("spectrum must have one profile per class");
    for (const auto& s : spectrum) {
      if (s.size() != dim) fail("each spectrum profile needs dim eigenvalues");
      for (double v : s)
        if (!(v >= 0.0) || !std::isfinite(v)) fail("spectrum values must be finite and >= 0");
    }
  }
  if (!(top_eigenvalue > 0.0)) fail("top_eigenvalue must be > 0");
  if (!(spectrum_decay > 0.0 && spectrum_decay <= 1.0)) fail("spectrum_decay must be in (0, 1]");
  if (!(mean_scale >= 0.0)) fail("mean_scale must be >= 0");
  if (!(group_pull >= 0.0 && group_pull < 1.0)) fail("group_pull must be in [0, 1)");
}

int SynthConfig::group_of(std::size_t c) const {
  return basis_groups.empty() ? static_cast<int>(c) : basis_groups[c];
}

std::vector<int> paired_basis_groups(std::size_t classes) {
  const std::size_t half = (classes + 1) / 2;
  std::vector<int> groups(classes);
  for (std::size_t c = 0; c < classes; ++c) groups[c] = static_cast<int>(c % half);
  return groups;
}

std::vector<std::size_t> longtailed_counts(std::size_t classes, std::size_t max_count, double imbalance_factor) {
  std::vector<std::size_t> counts(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    const double frac = classes == 1 ? 0.0 : static_cast<double>(c) / static_cast<double>(classes - 1);
    counts[c] = static_cast<std::size_t>(std::llround(static_cast<double>(max_count) * std::pow(imbalance_factor, -frac)));
  }
  return counts;
}

FeatureSet sample_classes(std::span<const ClassGenerator> generators, std::span<const std::size_t> counts, Rng& rng) {
  if (generators.size() != counts.size()) {
    throw Error(ErrorCode::ShapeMismatch, "sample_classes: one count per generator required");
  }
  std::size_t total = 0;
  for (auto n : counts) total += n;
  const std::size_t p = generators.empty() ? 0 : generators.front().mean.size();
  Matrix features(total, p);
  std::vector<int> labels;
  labels.reserve(total);
  std::vector<double> z(p);
  std::size_t row = 0;
  for (std::size_t c = 0; c < generators.size(); ++c) {
    const auto& g = generators[c];
    std::vector<double> sd(p);
    for (std::size_t i = 0; i < p; ++i) sd[i] = std::sqrt(g.spectrum[i]);
    for (std::size_t k = 0; k < counts[c]; ++k, ++row) {
      for (std::size_t i = 0; i < p; ++i) z[i] = rng.normal() * sd[i];
      auto out = features.row(row);
      for (std::size_t r = 0; r < p; ++r) {
        double v = g.mean[r];
        for (std::size_t i = 0; i < p; ++i) v += g.basis(r, i) * z[i];
        out[r] = static_cast<double>(static_cast<float>(v));
      }
      labels.push_back(static_cast<int>(c));
    }
  }
  return make_feature_set(std::move(features), std::move(labels), generators.size());
}

SyntheticDataset generate_longtailed(const SynthConfig& config, Rng& rng) {
  config.validate();
  const std::size_t classes = config.classes;
  const std::size_t p = config.dim;

  SyntheticDataset out;
  out.config = config;
  out.counts = longtailed_counts(classes, config.max_count, config.imbalance_factor);

  std::map<int, Matrix> bases;
  for (std::size_t c = 0; c < classes; ++c) bases.emplace(config.group_of(c), Matrix());
  for (auto& [group, basis] : bases) basis = sample_orthonormal_basis(p, rng);

  // Unit anchor per class: coordinate axes when they fit, random directions otherwise.
  std::vector<std::vector<double>> anchors(classes, std::vector<double>(p, 0.0));
  for (std::size_t c = 0; c < classes; ++c) {
    if (classes <= p) {
      anchors[c][c] = 1.0;
    } else {
      anchors[c] = sample_unit_vector(p, rng);
    }
  }
  std::map<int, std::vector<double>> centroids;
  std::map<int, std::size_t> members;
  for (std::size_t c = 0; c < classes; ++c) {
    auto& centroid = centroids.try_emplace(config.group_of(c), std::vector<double>(p, 0.0)).first->second;
    for (std::size_t i = 0; i < p; ++i) centroid[i] += anchors[c][i];
    ++members[config.group_of(c)];
  }
  for (auto& [group, centroid] : centroids)
    for (double& v : centroid) v /= static_cast<double>(members[group]);

  out.generators.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    auto& g = out.generators[c];
    g.basis_group = config.group_of(c);
    g.basis = bases.at(g.basis_group);
    g.mean.resize(p);
    const auto& centroid = centroids.at(g.basis_group);
    for (std::size_t i = 0; i < p; ++i) {
      g.mean[i] = config.mean_scale * ((1.0 - config.group_pull) * anchors[c][i] + config.group_pull * centroid[i]);
    }
    if (config.spectrum.empty()) {
      g.spectrum.resize(p);
      for (std::size_t i = 0; i < p; ++i) g.spectrum[i] = config.top_eigenvalue * std::pow(config.spectrum_decay, static_cast<double>(i));
    } else {
      g.spectrum = config.spectrum[c];
    }
  }
  out.data = sample_classes(out.generators, out.counts, rng);
  return out;
}

}  // namespace geoprior
