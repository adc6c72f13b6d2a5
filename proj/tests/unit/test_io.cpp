#include "doctest.h"

#include "generators.hpp"

#include "mlem/io.hpp"

#include <filesystem>
#include <fstream>

using namespace mlem;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mlem_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("feature CSV: kind inference and missing tokens") {
  const FeatureTable t = parse_feature_csv(
      "stimulus_id,gender,freq,animate\n"
      "s1,A,4.0,yes\n"
      "s2,B,4.5,NaN\n"
      "s3,A,5.0,\n",
      {});
  CHECK(t.num_stimuli() == 3);
  CHECK(t.feature(0).kind == FeatureKind::Nominal);
  CHECK(t.feature(1).kind == FeatureKind::Ordinal);
  CHECK(t.feature(2).kind == FeatureKind::Nominal);
  CHECK(t.feature(2).missing(1));
  CHECK(t.feature(2).missing(2));
  CHECK(feature_distance(t, 1, 0, 2) == 1.0);
}

TEST_CASE("feature CSV: schema overrides inference") {
  const std::string csv = "stimulus_id,level\ns1,1\ns2,2\ns3,3\n";
  CHECK(parse_feature_csv(csv, {}).feature(0).kind == FeatureKind::Ordinal);
  const FeatureTable t = parse_feature_csv(csv, {{"level", FeatureKind::Nominal}});
  CHECK(t.feature(0).kind == FeatureKind::Nominal);
  CHECK(feature_distance(t, 0, 0, 2) == 1.0);
  CHECK_THROWS_AS(parse_feature_csv("stimulus_id,x\ns1,a\ns2,1\n", {{"x", FeatureKind::Ordinal}}),
                  InputError);
}

TEST_CASE("feature CSV: malformed input") {
  CHECK_THROWS_AS(parse_feature_csv("", {}), InputError);
  CHECK_THROWS_AS(parse_feature_csv("stimulus_id\ns1\ns2\n", {}), InputError);
  CHECK_THROWS_AS(parse_feature_csv("stimulus_id,a\ns1,A,B\ns2,A\n", {}), InputError);
  CHECK_THROWS_AS(parse_feature_csv("stimulus_id,a,a\ns1,A,B\ns2,A,B\n", {}), InputError);
  CHECK_THROWS_AS(parse_feature_csv("stimulus_id,a\ns1,\"A\n", {}), InputError);
}

TEST_CASE("CSV records: quotes, doubled quotes, CRLF, BOM") {
  const auto r = parse_csv_records("\xEF\xBB\xBFid,\"x, y\"\r\n1,\"say \"\"hi\"\"\"\r\n");
  REQUIRE(r.size() == 2);
  CHECK(r[0][0] == "id");
  CHECK(r[0][1] == "x, y");
  CHECK(r[1][1] == "say \"hi\"");
}

TEST_CASE("feature CSV round trip through format and the sidecar schema") {
  Rng rng(3);
  const FeatureTable t = gen::mixed_table(rng, 12, 5, 0.2);
  const fs::path dir = scratch_dir("features");
  write_file_atomic(dir / "features.csv", format_feature_csv(t));
  write_file_atomic(dir / "features.schema.json", format_schema_json(t));
  CHECK(schema_sidecar_path(dir / "features.csv") == dir / "features.schema.json");
  const FeatureTable back = load_feature_table(dir / "features.csv");
  REQUIRE(back.num_features() == t.num_features());
  for (Index k = 0; k < t.num_features(); ++k) {
    CHECK(back.feature(k).kind == t.feature(k).kind);
    for (Index i = 0; i < t.num_stimuli(); ++i) {
      for (Index j = 0; j < t.num_stimuli(); ++j) {
        CHECK(feature_distance(back, k, i, j) == feature_distance(t, k, i, j));
      }
    }
  }
  CHECK(format_feature_csv(back) == format_feature_csv(t));
}

TEST_CASE("schema JSON errors") {
  CHECK_THROWS_AS(parse_schema_json("{"), InputError);
  CHECK_THROWS_AS(parse_schema_json("[1]"), InputError);
  CHECK_THROWS_AS(parse_schema_json("{\"a\": 3}"), InputError);
  CHECK_THROWS_AS(parse_schema_json("{\"a\": \"interval\"}"), InputError);
  CHECK(parse_schema_json("{\"a\": \"Ordinal\"}").at("a") == FeatureKind::Ordinal);
}

TEST_CASE("representations: binary and CSV round trips") {
  Rng rng(4);
  const RepresentationSet r(gen::normal_matrix(rng, 7, 3));
  const std::string bin = format_representations_binary(r);
  CHECK(bin.substr(0, 8) == "MLEMREPR");
  CHECK(bin.size() == 8 + 4 + 8 + 8 + 7 * 3 * 8);
  CHECK(parse_representations_binary(bin).matrix() == r.matrix());
  CHECK(parse_representations_csv(format_representations_csv(r)).matrix() == r.matrix());

  const fs::path dir = scratch_dir("reps");
  write_file_atomic(dir / "r.bin", bin);
  write_file_atomic(dir / "r.csv", format_representations_csv(r));
  CHECK(load_representations(dir / "r.bin").matrix() == r.matrix());
  CHECK(load_representations(dir / "r.csv").matrix() == r.matrix());
}

TEST_CASE("representations: malformed input") {
  CHECK_THROWS_AS(parse_representations_binary("MLEMREP"), InputError);
  std::string bin = format_representations_binary(RepresentationSet(Eigen::MatrixXd::Ones(2, 2)));
  CHECK_THROWS_AS(parse_representations_binary(bin.substr(0, bin.size() - 1)), InputError);
  bin[8] = 2;
  CHECK_THROWS_AS(parse_representations_binary(bin), InputError);
  CHECK_THROWS_AS(parse_representations_csv("1,2\n3\n"), InputError);
  CHECK_THROWS_AS(parse_representations_csv("1,x\n"), InputError);
  CHECK_THROWS_AS(parse_representations_csv(""), InputError);
  CHECK_THROWS_AS(read_file("/nonexistent/mlem/file"), InputError);
}
