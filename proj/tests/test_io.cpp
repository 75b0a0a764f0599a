#include <doctest.h>

#include <sstream>

#include "fbounds/error.hpp"
#include "fbounds/io.hpp"
#include "support.hpp"

using namespace fbounds;

namespace {

std::string parse_error(const std::string& csv, const CsvOptions& options = {}) {
  std::istringstream in(csv);
  try {
    read_dataset_csv(in, options);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parse_error);
    return e.what();
  }
  return {};
}

ObservedDataset parse(const std::string& csv, const CsvOptions& options = {}) {
  std::istringstream in(csv);
  return read_dataset_csv(in, options);
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("CSV reading") {
  const ObservedDataset d = parse("z1,z2,d1,d2,y\n1,-1,1,-1,0.5\n\n-1,-1,1,-1,1\n");
  REQUIRE(d.size() == 2);
  CHECK(d.design.factors() == 2);
  CHECK(d.rows[0].arm == d.design.index_of({{1, -1}}));
  CHECK(d.rows[0].uptake == std::vector<int>{1, -1});
  CHECK(d.rows[1].outcome == 1.0);
}

TEST_CASE("CSV errors carry line and column") {
  CHECK(parse_error("") .find("missing header") != std::string::npos);
  CHECK(parse_error("z1,d2,y\n").find("line 1, column 2") != std::string::npos);
  CHECK(parse_error("z1,d1,y\n1,1,0.5\n1,2,0.5\n").find("line 3, column 2") != std::string::npos);
  CHECK(parse_error("z1,d1,y\n1,1,0.5,3\n").find("line 2") != std::string::npos);
  CHECK(parse_error("z1,d1,y\n1,1,abc\n").find("line 2, column 3") != std::string::npos);
  CHECK(parse_error("z1,d1,y\n1,1,1.5\n").find("outside [0,1]") != std::string::npos);
  CHECK(parse_error("z1,d1,y\n0,1,0.5\n").find("line 2, column 1") != std::string::npos);
}

TEST_CASE("binary coding and rescaling") {
  CsvOptions binary;
  binary.binary_coding = true;
  const ObservedDataset d = parse("z1,d1,y\n0,0,0\n1,1,1\n", binary);
  CHECK(d.rows[0].arm == 0);
  CHECK(d.rows[0].uptake == std::vector<int>{-1});
  CHECK(d.rows[1].uptake == std::vector<int>{1});
  CHECK_FALSE(parse_error("z1,d1,y\n-1,1,0\n", binary).empty());

  CsvOptions scaled;
  scaled.rescale = std::pair{1.0, 5.0};
  const ObservedDataset s = parse("z1,d1,y\n1,1,2\n-1,-1,5\n", scaled);
  CHECK(s.rows[0].outcome == 0.25);
  CHECK(s.rows[1].outcome == 1.0);
  CHECK(parse_error("z1,d1,y\n1,1,6\n", scaled).find("rescale") != std::string::npos);
  scaled.rescale = std::pair{1.0, 1.0};
  CHECK_THROWS_AS(parse("z1,d1,y\n1,1,1\n", scaled), Error);
}

TEST_CASE("CSV round trip is exact") {
  ObservedDataset d{FactorialDesign(2)};
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    Observation o;
    o.arm = rng.below(4);
    o.uptake = {rng.bernoulli(0.5) ? 1 : -1, rng.bernoulli(0.5) ? 1 : -1};
    o.outcome = rng.uniform();
    d.rows.push_back(o);
  }
  std::ostringstream out;
  write_dataset_csv(out, d);
  const ObservedDataset back = parse(out.str());
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(back.rows[i].arm == d.rows[i].arm);
    CHECK(back.rows[i].uptake == d.rows[i].uptake);
    CHECK(back.rows[i].outcome == d.rows[i].outcome);
  }
}

TEST_CASE("population JSON round trip") {
  const Population p = fbounds::testing::make_p4();
  const Population back = population_from_json(Json::parse(population_to_json(p).dump()));
  CHECK(back.uptake_table() == p.uptake_table());
  CHECK(back.outcome_table() == p.outcome_table());

  Json bad = population_to_json(p);
  bad["uptake"][0][0][0] = 0;
  CHECK_THROWS_AS(population_from_json(bad), Error);
  bad = population_to_json(p);
  bad["extra"] = 1;
  CHECK_THROWS_AS(population_from_json(bad), Error);
}

TEST_CASE("levels") {
  CHECK(parse_levels("-1,1").levels == std::vector<int>{-1, 1});
  CHECK(parse_levels("+,-").levels == std::vector<int>{1, -1});
  CHECK(parse_levels("").levels.empty());
  CHECK(format_levels({{1, -1}}) == "1,-1");
  CHECK_THROWS_AS(parse_levels("1,0"), Error);
}

TEST_CASE("scenario config parsing") {
  const Json j = Json::parse(R"({
    "_comment": "ignored",
    "factors": 2, "units": 40, "seed": 9,
    "compliance": [{"constant_complier": 0.8, "never_taker": 0.2, "one_sided": true,
                    "worst_context": [-1]}],
    "outcome": {"model": "m2", "baseline": [0.1, 0.2], "effects": [[0.3, 0.5]]},
    "assumptions": {"monotonicity": "force", "least_compliant": ["force", "free"]},
    "targets": [{"factor": 2, "method": "prop1", "profile": "declared:1"}]
  })");
  const ScenarioConfig c = config_from_json(j);
  CHECK(c.factors == 2);
  CHECK(c.seed == 9);
  CHECK(c.compliance.size() == 2);
  CHECK(c.compliance[1].one_sided);
  CHECK(c.compliance[1].worst_context->levels == std::vector<int>{-1});
  CHECK(c.outcome.kind == OutcomeModel::Kind::bernoulli);
  CHECK(c.outcome.effects.size() == 2);
  CHECK(c.assumptions.monotonicity.size() == 2);
  CHECK(c.assumptions.least_compliant[1] == Toggle::free);
  REQUIRE(c.targets.size() == 1);
  CHECK(c.targets[0].profile == "declared");
  CHECK(c.targets[0].declared.levels == std::vector<int>{1});

  const ScenarioConfig again = config_from_json(config_to_json(c));
  CHECK(config_to_json(again).dump() == config_to_json(c).dump());

  Json typo = j;
  typo["unit"] = 3;
  CHECK_THROWS_AS(config_from_json(typo), Error);
  Json bad_toggle = j;
  bad_toggle["assumptions"]["monotonicity"] = "sometimes";
  CHECK_THROWS_AS(config_from_json(bad_toggle), Error);
}

TEST_CASE("content hash") {
  CHECK(content_hash("") == "cbf29ce484222325");
  CHECK(content_hash("a") != content_hash("b"));
  CHECK(content_hash("abc").size() == 16);
}

}  // TEST_SUITE
