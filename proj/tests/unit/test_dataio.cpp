#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "geoprior/dataio.hpp"
#include "geoprior/error.hpp"
#include "geoprior/geometry.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace geoprior;
using testing_helpers::TempDir;

namespace {

FeatureSet small_set() {
  return make_feature_set(Matrix::from_rows({{0.5, -1.25}, {3.0, 0.1}, {-2.0, 1e-3}}), {0, 2, 1});
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

ErrorCode load_error(const std::filesystem::path& p) {
  try {
    load_features(p);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::EmptyInput;
}

}  // namespace

TEST(FeatureSet, CountsRowsAndValidation) {
  const FeatureSet s = small_set();
  EXPECT_EQ(s.num_classes, 3u);
  EXPECT_EQ(s.class_counts(), (std::vector<std::size_t>{1, 1, 1}));
  EXPECT_EQ(s.rows_of_class(2), (std::vector<std::size_t>{1}));
  const Matrix c = s.class_samples(1);
  EXPECT_EQ(c.rows(), 2u);
  EXPECT_EQ(c(0, 0), -2.0);
  EXPECT_THROW(make_feature_set(Matrix(2, 2), {0}), Error);
  FeatureSet bad = s;
  bad.labels[0] = 7;
  EXPECT_THROW(bad.validate(), Error);
  bad = s;
  bad.features(0, 0) = NAN;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Provenance, NamesRoundTrip) {
  for (Provenance p : {Provenance::real_tail, Provenance::synthetic_tail, Provenance::real_head})
    EXPECT_EQ(provenance_from_string(to_string(p)), p);
  EXPECT_THROW(provenance_from_string("other"), Error);
}

TEST(Csv, RoundTripIsExact) {
  TempDir dir("csv");
  const FeatureSet s = small_set();
  save_features(s, dir / "a.csv", FileFormat::csv, {.comment = "hello\nworld", .provenance = {}});
  const std::string text = slurp(dir / "a.csv");
  EXPECT_EQ(text.rfind("# hello\n# world\nlabel,f0,f1\n", 0), 0u);
  EXPECT_EQ(load_features(dir / "a.csv"), s);
}

TEST(Csv, ProvenanceColumn) {
  TempDir dir("csvprov");
  const FeatureSet s = small_set();
  const std::vector<Provenance> prov{Provenance::real_head, Provenance::synthetic_tail, Provenance::real_tail};
  save_features(s, dir / "p.csv", FileFormat::csv, {.comment = "", .provenance = prov});
  std::vector<Provenance> back;
  EXPECT_EQ(load_features(dir / "p.csv", FileFormat::csv, &back), s);
  EXPECT_EQ(back, prov);
}

TEST(Csv, ParseErrors) {
  TempDir dir("csverr");
  spit(dir / "empty.csv", "# only a comment\n");
  EXPECT_EQ(load_error(dir / "empty.csv"), ErrorCode::ParseError);
  spit(dir / "hdr.csv", "lab,f0\n0,1\n");
  EXPECT_EQ(load_error(dir / "hdr.csv"), ErrorCode::ParseError);
  spit(dir / "fields.csv", "label,f0,f1\n0,1\n");
  EXPECT_EQ(load_error(dir / "fields.csv"), ErrorCode::ParseError);
  spit(dir / "value.csv", "label,f0\n0,abc\n");
  EXPECT_EQ(load_error(dir / "value.csv"), ErrorCode::ParseError);
  spit(dir / "label.csv", "label,f0\n-1,0.5\n");
  EXPECT_EQ(load_error(dir / "label.csv"), ErrorCode::ParseError);
  EXPECT_EQ(load_error(dir / "missing.csv"), ErrorCode::IoError);
  try {
    load_features(dir / "value.csv");
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Binary, LayoutAndRoundTrip) {
  TempDir dir("bin");
  // Values exactly representable in float survive the f32 storage.
  const FeatureSet s = small_set();
  save_features(s, dir / "a.fgeo", FileFormat::binary);
  const std::string bytes = slurp(dir / "a.fgeo");
  ASSERT_EQ(bytes.size(), 4 + 4 + 8 + 4 + 4 + 3 * 4 + 6 * 4u);
  EXPECT_EQ(bytes.substr(0, 4), "FGEO");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3u);   // N
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 2u);  // P
  EXPECT_EQ(static_cast<unsigned char>(bytes[20]), 3u);  // C
  const FeatureSet back = load_features(dir / "a.fgeo");
  EXPECT_EQ(back.labels, s.labels);
  for (std::size_t i = 0; i < s.features.data().size(); ++i)
    EXPECT_EQ(back.features.data()[i], static_cast<double>(static_cast<float>(s.features.data()[i])));
}

TEST(Binary, ProvenanceAndCorruption) {
  TempDir dir("binerr");
  const FeatureSet s = small_set();
  const std::vector<Provenance> prov{Provenance::real_head, Provenance::synthetic_tail, Provenance::real_tail};
  save_features(s, dir / "p.fgeo", FileFormat::binary, {.comment = "", .provenance = prov});
  std::vector<Provenance> back;
  load_features(dir / "p.fgeo", FileFormat::binary, &back);
  EXPECT_EQ(back, prov);

  const std::string bytes = slurp(dir / "p.fgeo");
  spit(dir / "trunc.fgeo", bytes.substr(0, 30));
  EXPECT_EQ(load_error(dir / "trunc.fgeo"), ErrorCode::DimensionInconsistent);
  spit(dir / "header.fgeo", bytes.substr(0, 10));
  EXPECT_EQ(load_error(dir / "header.fgeo"), ErrorCode::ParseError);
  spit(dir / "magic.fgeo", "XGEO" + bytes.substr(4));
  EXPECT_EQ(load_error(dir / "magic.fgeo"), ErrorCode::ParseError);
  std::string version = bytes;
  version[4] = 9;
  spit(dir / "ver.fgeo", version);
  EXPECT_EQ(load_error(dir / "ver.fgeo"), ErrorCode::ParseError);
  std::string label = bytes;
  label[24] = 5;  // first label beyond C = 3
  spit(dir / "label.fgeo", label);
  EXPECT_EQ(load_error(dir / "label.fgeo"), ErrorCode::ParseError);
  std::string extra = bytes.substr(0, 24 + 12 + 24) + "junk";
  spit(dir / "extra.fgeo", extra);
  EXPECT_EQ(load_error(dir / "extra.fgeo"), ErrorCode::DimensionInconsistent);
}

TEST(Format, FromExtension) {
  EXPECT_EQ(format_from_path("x.csv"), FileFormat::csv);
  EXPECT_EQ(format_from_path("x.fgeo"), FileFormat::binary);
  EXPECT_EQ(format_from_path("x"), FileFormat::binary);
}

TEST(Synth, LongTailedCountsMatchOracle) {
  for (std::size_t classes : {2u, 5u, 10u, 100u}) {
    for (double f : {1.0, 10.0, 100.0}) {
      const auto counts = longtailed_counts(classes, 1000, f);
      for (std::size_t c = 0; c < classes; ++c) EXPECT_EQ(counts[c], oracle::longtail_count(c, classes, 1000, f));
      EXPECT_EQ(counts.front(), 1000u);
      EXPECT_EQ(counts.back(), static_cast<std::size_t>(std::llround(1000 / f)));
      EXPECT_TRUE(std::is_sorted(counts.rbegin(), counts.rend()));
    }
  }
}

TEST(Synth, PairedGroups) {
  EXPECT_EQ(paired_basis_groups(10), (std::vector<int>{0, 1, 2, 3, 4, 0, 1, 2, 3, 4}));
  EXPECT_EQ(paired_basis_groups(5), (std::vector<int>{0, 1, 2, 0, 1}));
}

TEST(Synth, ValidationErrors) {
  SynthConfig c;
  c.classes = 1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.imbalance_factor = 0.5;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.max_count = 10;
  c.imbalance_factor = 100;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.basis_groups = {0, 1};
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.group_pull = 1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Synth, GeneratedDataHasPlantedGeometry) {
  SynthConfig c;
  c.classes = 4;
  c.dim = 6;
  c.max_count = 4000;
  c.imbalance_factor = 2;
  c.basis_groups = {0, 1, 0, 1};
  Rng rng(3);
  const auto d = generate_longtailed(c, rng);
  EXPECT_EQ(d.data.class_counts(), d.counts);
  EXPECT_EQ(d.generators[0].basis, d.generators[2].basis);
  EXPECT_NE(d.generators[0].basis, d.generators[1].basis);
  for (double v : d.data.features.data()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
  // Sample covariance recovers the planted leading eigenvector.
  const auto g = geometry_of(d.data, 0, true);
  const auto planted = d.generators[0].basis.column(0);
  EXPECT_GT(std::abs(dot(g.axis(0), planted)), 0.98);
  EXPECT_NEAR(g.eigenvalues[0], c.top_eigenvalue, 0.15 * c.top_eigenvalue);
  Rng again(3);
  EXPECT_EQ(generate_longtailed(c, again).data, d.data);
}

TEST(Synth, CsvAndBinaryCopiesAgree) {
  TempDir dir("synthio");
  SynthConfig c;
  c.max_count = 50;
  c.imbalance_factor = 10;
  Rng rng(1);
  const auto d = generate_longtailed(c, rng);
  save_features(d.data, dir / "a.csv", FileFormat::csv);
  save_features(d.data, dir / "a.fgeo", FileFormat::binary);
  EXPECT_EQ(load_features(dir / "a.csv"), load_features(dir / "a.fgeo"));
  EXPECT_EQ(load_features(dir / "a.csv"), d.data);
}
