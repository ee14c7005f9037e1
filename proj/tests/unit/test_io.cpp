#include "support.hpp"

#include <filesystem>

#include "multiref/io.hpp"

using namespace multiref;
using multiref::test::policy;
using multiref::test::rows;
namespace io = multiref::io;

TEST_SUITE("io") {

TEST_CASE("fnv-1a known values") {
  CHECK(io::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(io::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(io::hex64(0xabcULL) == "0000000000000abc");
  CHECK(io::csv_header_line(1) == "# multiref-align 0.1.0 config_hash=0000000000000001\n");
}

TEST_CASE("doubles round-trip") {
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.6201145069582775}) {
    CHECK(std::stod(io::format_double(v)) == v);
    CHECK(io::parse_json(io::dump(io::Json(v)), "x").get<double>() == v);
  }
}

TEST_CASE("ensemble and reward round-trip") {
  const ReferenceEnsemble ens({policy({{0.9, 0.1}, {0.3, 0.7}}), policy({{0.5, 0.5}, {0.25, 0.75}})},
                              SimplexWeights{0.4, 0.6});
  const ReferenceEnsemble back = io::ensemble_from_json(io::parse_json(io::dump(io::ensemble_to_json(ens)), "e"));
  CHECK(back.member(0) == ens.member(0));
  CHECK(back.member(1) == ens.member(1));
  CHECK(back.weights().weights() == ens.weights().weights());
  const RewardTable r(rows({{1.0, 0.5}, {0.0, 0.25}}), 1.0);
  CHECK(io::reward_from_json(io::reward_to_json(r)) == r);
}

TEST_CASE("ensemble weights default to uniform") {
  const auto j = io::parse_json(R"({"members": [[[0.5, 0.5]], [[0.9, 0.1]]]})", "e");
  CHECK(io::ensemble_from_json(j).weights().weights() == Eigen::Vector2d(0.5, 0.5));
}

TEST_CASE("parse errors name the field") {
  const auto bad = io::parse_json(R"({"members": [[[0.5, 0.5]], [[0.9, 0.1]]], "weights": [0.5, 0.4]})", "e");
  try {
    io::ensemble_from_json(bad);
    FAIL("expected ConfigParse");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigParse);
    CHECK(std::string(e.what()).find("weights") != std::string::npos);
  }
  CHECK_ERROR_KIND(io::parse_json("{not json", "cfg"), ErrorKind::ConfigParse);
  CHECK_ERROR_KIND(io::reward_from_json(io::parse_json(R"({"values": [[0.1]]})", "r")), ErrorKind::ConfigParse);
  CHECK_ERROR_KIND(io::matrix_from_json(io::parse_json("[[1, 2], [3]]", "m"), "m"), ErrorKind::ConfigParse);
}

TEST_CASE("dataset csv round-trip") {
  PreferenceDataset d{2, 3, {{0, 1, 2, 1, 2, 0.3}, {1, 0, 0, 0, 0, 0.9}}};
  const std::string text = io::dataset_to_csv(d, 42);
  CHECK(text.rfind("# multiref-align", 0) == 0);
  const PreferenceDataset back = io::dataset_from_csv(text, 2, 3);
  REQUIRE(back.size() == 2);
  CHECK(back.triples[0].prompt == 0);
  CHECK(back.triples[0].chosen == 1);
  CHECK(back.triples[0].rejected == 2);
  CHECK(back.triples[1].prompt == 1);
  CHECK_ERROR_KIND(io::dataset_from_csv("i,x,y_w,y_l\n0,0,5,1\n", 2, 3), ErrorKind::ConfigParse);
  CHECK_ERROR_KIND(io::dataset_from_csv("a,b\n", 2, 3), ErrorKind::ConfigParse);
}

TEST_CASE("sweep config round-trip") {
  SweepConfig c;
  c.mode = KlMode::Forward;
  c.n_values = {10, 20, 40};
  c.trials = 3;
  c.weights = SimplexWeights{0.25, 0.75};
  const SweepConfig back = io::sweep_config_from_json(io::sweep_config_to_json(c));
  CHECK(back.mode == c.mode);
  CHECK(back.n_values == c.n_values);
  CHECK(back.trials == 3);
  CHECK(back.seed == c.seed);
  REQUIRE(back.weights.has_value());
  CHECK(back.weights->weights() == c.weights->weights());
}

TEST_CASE("file helpers") {
  CHECK_ERROR_KIND(io::read_text_file("/nonexistent/dir/file.json"), ErrorKind::Io);
  const auto dir = std::filesystem::temp_directory_path() / "multiref_io_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  io::write_text_file(dir / "a.txt", "hello\n");
  CHECK(io::read_text_file(dir / "a.txt") == "hello\n");
  std::filesystem::remove_all(dir.parent_path());
}

}  // TEST_SUITE
