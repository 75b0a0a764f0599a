#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "fbounds/io.hpp"

namespace {

const std::string kCli = FBOUNDS_CLI;
const std::string kData = FBOUNDS_DATA_DIR;
const std::string kTmp = FBOUNDS_TMP_DIR;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("exit codes") {
  CHECK(run("analyze " + kData + "/p4_census.csv --profile declared:-1 --factor 1") == 0);
  CHECK(run("analyze /nonexistent.csv") == 2);
  CHECK(run("analyze") == 2);
  CHECK(run("frobnicate") == 2);

  const std::string bad_csv = kTmp + "/bad.csv";
  write(bad_csv, "z1,d1,y\n1,1,7\n");
  CHECK(run("analyze " + bad_csv) == 2);

  // Nobody takes treatment: no compliers.
  const std::string flat = kTmp + "/flat.csv";
  write(flat, "z1,d1,y\n1,-1,0\n1,-1,1\n-1,-1,0\n-1,-1,1\n");
  CHECK(run("analyze " + flat) == 3);

  const std::string infeasible = kTmp + "/infeasible.json";
  write(infeasible, R"({"factors": 1, "units": 10, "assumptions": {"least_compliant": "violate"}})");
  CHECK(run("simulate " + infeasible + " -R 2") == 3);

  CHECK(run("oracle " + kData + "/p4.json --profile declared:-1") == 0);
}

TEST_CASE("plotdata reproduces analysis endpoints bit for bit") {
  const std::string report = kTmp + "/analysis.json";
  const std::string csv = kTmp + "/plot.csv";
  REQUIRE(run("analyze " + kData + "/p4_census.csv --profile declared:-1 --method prop1,prop2 --out " +
              report) == 0);
  REQUIRE(run("plotdata " + report + " --out " + csv) == 0);
  const auto j = fbounds::Json::parse(slurp(report));
  std::istringstream lines(slurp(csv));
  std::string line;
  std::getline(lines, line);
  CHECK(line == "label,lower,upper,ci_lower,ci_upper,point");
  std::size_t i = 0;
  while (std::getline(lines, line)) {
    REQUIRE(i < j.at("estimates").size());
    const auto& est = j.at("estimates")[i++];
    std::istringstream fields(line);
    std::string label, lower, upper;
    std::getline(fields, label, ',');
    std::getline(fields, lower, ',');
    std::getline(fields, upper, ',');
    CHECK(std::strtod(lower.c_str(), nullptr) == est.at("clipped_lower").get<double>());
    CHECK(std::strtod(upper.c_str(), nullptr) == est.at("clipped_upper").get<double>());
  }
  CHECK(i == j.at("estimates").size());
}

TEST_CASE("simulate honors seed precedence") {
  const std::string config = kTmp + "/seeded.json";
  write(config, R"({"factors": 1, "units": 20, "seed": 1})");
  const std::string a = kTmp + "/a.json", b = kTmp + "/b.json", c = kTmp + "/c.json";
  REQUIRE(run("simulate " + config + " -R 5 --out " + a) == 0);
  REQUIRE(run("simulate " + config + " -R 5 --seed 2 --out " + b) == 0);
  const std::string env = "FB_SEED=2 ";
  REQUIRE(std::system((env + kCli + " simulate " + config + " -R 5 --out " + c + " >/dev/null").c_str()) == 0);
  CHECK(slurp(b) == slurp(c));
  CHECK(slurp(a) != slurp(b));
}

}  // TEST_SUITE
