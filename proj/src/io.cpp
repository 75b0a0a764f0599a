#include "fbounds/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "fbounds/error.hpp"

namespace fbounds {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void fail_at(std::size_t line, std::size_t column, const std::string& what) {
  throw Error(ErrorKind::parse_error, "line " + std::to_string(line) + ", column " +
                                          std::to_string(column) + ": " + what);
}

double parse_number(const std::string& field, std::size_t line, std::size_t column) {
  if (field.empty()) fail_at(line, column, "empty field");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size() || errno == ERANGE || !std::isfinite(v)) {
    fail_at(line, column, "'" + field + "' is not a finite number");
  }
  return v;
}

int parse_code(const std::string& field, bool binary, std::size_t line, std::size_t column) {
  if (field == "1" || field == "+1") return 1;
  if (field == "-1" && !binary) return -1;
  if (field == "0" && binary) return -1;
  fail_at(line, column, "'" + field + "' is not a valid code (expected " +
                            (binary ? std::string("0 or 1") : std::string("-1 or 1")) + ")");
}

}  // namespace

ObservedDataset read_dataset_csv(std::istream& in, const CsvOptions& options) {
  if (options.rescale && !(options.rescale->first < options.rescale->second)) {
    throw Error(ErrorKind::invalid_input, "rescale needs min < max");
  }
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split(line);
      break;
    }
  }
  if (header.empty()) throw Error(ErrorKind::parse_error, "empty input: missing header row");
  if (header.size() < 3 || header.size() % 2 == 0) {
    fail_at(line_no, 1, "header must be z1..zK,d1..dK,y");
  }
  const int K = static_cast<int>((header.size() - 1) / 2);
  for (int k = 1; k <= K; ++k) {
    const auto zi = static_cast<std::size_t>(k - 1);
    const auto di = static_cast<std::size_t>(K + k - 1);
    if (header[zi] != "z" + std::to_string(k)) {
      fail_at(line_no, zi + 1, "expected column 'z" + std::to_string(k) + "', got '" +
                                   header[zi] + "'");
    }
    if (header[di] != "d" + std::to_string(k)) {
      fail_at(line_no, di + 1, "expected column 'd" + std::to_string(k) + "', got '" +
                                   header[di] + "'");
    }
  }
  if (header.back() != "y") fail_at(line_no, header.size(), "last column must be 'y'");

  ObservedDataset data{FactorialDesign(K)};
  const std::size_t width = header.size();
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split(line);
    if (fields.size() != width) {
      fail_at(line_no, std::min(fields.size(), width) + 1,
              "expected " + std::to_string(width) + " fields, got " +
                  std::to_string(fields.size()));
    }
    Assignment z;
    Observation row;
    for (int k = 0; k < K; ++k) {
      const auto c = static_cast<std::size_t>(k);
      z.levels.push_back(parse_code(fields[c], options.binary_coding, line_no, c + 1));
      row.uptake.push_back(parse_code(fields[c + static_cast<std::size_t>(K)],
                                      options.binary_coding, line_no,
                                      c + static_cast<std::size_t>(K) + 1));
    }
    row.arm = data.design.index_of(z);
    double y = parse_number(fields.back(), line_no, width);
    if (options.rescale) {
      const auto [lo, hi] = *options.rescale;
      if (y < lo || y > hi) {
        fail_at(line_no, width, "y = " + fields.back() + " outside the rescale range");
      }
      y = (y - lo) / (hi - lo);
    }
    if (y < 0.0 || y > 1.0) {
      fail_at(line_no, width, "y = " + fields.back() + " outside [0,1] (see --rescale)");
    }
    row.outcome = y;
    data.rows.push_back(std::move(row));
  }
  return data;
}

ObservedDataset read_dataset_csv_file(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot open " + path);
  return read_dataset_csv(in, options);
}

void write_dataset_csv(std::ostream& out, const ObservedDataset& data) {
  const int K = data.design.factors();
  for (int k = 1; k <= K; ++k) out << 'z' << k << ',';
  for (int k = 1; k <= K; ++k) out << 'd' << k << ',';
  out << "y\n";
  char buf[32];
  for (const Observation& row : data.rows) {
    const Assignment z = data.design.assignment(row.arm);
    for (int v : z.levels) out << v << ',';
    for (int v : row.uptake) out << v << ',';
    std::snprintf(buf, sizeof buf, "%.17g", row.outcome);
    out << buf << '\n';
  }
}

Json population_to_json(const Population& pop) {
  Json j;
  j["K"] = pop.factors();
  j["N"] = pop.units();
  Json uptake = Json::array();
  Json outcome = Json::array();
  for (std::size_t i = 0; i < pop.units(); ++i) {
    Json du = Json::array();
    Json yu = Json::array();
    for (std::size_t a = 0; a < pop.arms(); ++a) {
      Json d = Json::array();
      for (int k = 1; k <= pop.factors(); ++k) d.push_back(pop.uptake(i, a, k));
      du.push_back(std::move(d));
      yu.push_back(pop.outcome(i, a));
    }
    uptake.push_back(std::move(du));
    outcome.push_back(std::move(yu));
  }
  j["uptake"] = std::move(uptake);
  j["outcome"] = std::move(outcome);
  return j;
}

namespace {

void schema(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::parse_error, what);
}

/// Rejects unknown keys; keys starting with '_' are comments.
void allow_keys(const Json& j, std::initializer_list<const char*> keys, const std::string& where) {
  schema(j.is_object(), where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items()) {
    if (!key.empty() && key[0] == '_') continue;
    schema(allowed.count(key) > 0, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, where + "." + key + ": " + e.what());
  }
}

Range get_range(const Json& j, const std::string& where) {
  schema(j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number(),
         where + " must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<Toggle> toggles(const Json& j, const std::string& where) {
  std::vector<Toggle> out;
  if (j.is_string()) {
    out.push_back(parse_toggle(j.get<std::string>()));
  } else {
    schema(j.is_array(), where + " must be a toggle or a list of toggles");
    for (const auto& t : j) {
      schema(t.is_string(), where + " entries must be strings");
      out.push_back(parse_toggle(t.get<std::string>()));
    }
  }
  return out;
}

Json toggle_list(const std::vector<Toggle>& v) {
  Json out = Json::array();
  for (Toggle t : v) out.push_back(to_string(t));
  return out;
}

}  // namespace

Population population_from_json(const Json& j) {
  allow_keys(j, {"K", "N", "uptake", "outcome", "labels"}, "population");
  const int K = get<int>(j, "K", "population");
  const auto N = get<std::size_t>(j, "N", "population");
  const FactorialDesign design(K);
  const Json& uptake = j.at("uptake");
  const Json& outcome = j.at("outcome");
  schema(uptake.is_array() && uptake.size() == N, "uptake must list N units");
  schema(outcome.is_array() && outcome.size() == N, "outcome must list N units");
  std::vector<std::int8_t> d;
  std::vector<double> y;
  for (std::size_t i = 0; i < N; ++i) {
    const std::string unit = "unit " + std::to_string(i);
    schema(uptake[i].is_array() && uptake[i].size() == design.arms(),
           unit + ": uptake needs one row per arm");
    schema(outcome[i].is_array() && outcome[i].size() == design.arms(),
           unit + ": outcome needs one value per arm");
    for (std::size_t a = 0; a < design.arms(); ++a) {
      const Json& row = uptake[i][a];
      schema(row.is_array() && row.size() == static_cast<std::size_t>(K),
             unit + ", arm " + std::to_string(a) + ": uptake needs K entries");
      for (const auto& v : row) {
        schema(v.is_number_integer(), unit + ": uptake entries must be integers");
        d.push_back(static_cast<std::int8_t>(v.get<int>() == 1 ? 1 : v.get<int>() == -1 ? -1 : 0));
        schema(d.back() != 0, unit + ": uptake entries must be -1 or 1");
      }
      schema(outcome[i][a].is_number(), unit + ": outcome entries must be numbers");
      y.push_back(outcome[i][a].get<double>());
    }
  }
  return Population(design, N, std::move(d), std::move(y));
}

Assignment parse_levels(const std::string& text) {
  Assignment z;
  if (trim(text).empty()) return z;
  std::istringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) {
    field = trim(field);
    if (field == "1" || field == "+1" || field == "+") {
      z.levels.push_back(1);
    } else if (field == "-1" || field == "-") {
      z.levels.push_back(-1);
    } else {
      throw Error(ErrorKind::parse_error, "level '" + field + "' must be -1 or 1");
    }
  }
  return z;
}

std::string format_levels(const Assignment& z) {
  std::string out;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (i) out += ',';
    out += z[i] > 0 ? "1" : "-1";
  }
  return out;
}

ScenarioConfig config_from_json(const Json& j) {
  allow_keys(j, {"factors", "units", "clone", "seed", "redraw_population", "alpha",
                 "compliance", "outcome", "assumptions", "arm_sizes", "targets"},
             "config");
  ScenarioConfig c;
  c.factors = get<int>(j, "factors", "config");
  if (j.contains("units")) c.units = get<std::size_t>(j, "units", "config");
  if (j.contains("clone")) c.clone = get<std::size_t>(j, "clone", "config");
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed", "config");
  if (j.contains("redraw_population")) {
    c.redraw_population = get<bool>(j, "redraw_population", "config");
  }
  if (j.contains("alpha")) c.alpha = get<double>(j, "alpha", "config");
  if (j.contains("arm_sizes")) {
    c.arm_sizes = get<std::vector<std::size_t>>(j, "arm_sizes", "config");
  }

  if (j.contains("compliance")) {
    const Json& list = j.at("compliance");
    schema(list.is_array(), "compliance must be a list (one entry per factor)");
    for (const Json& f : list) {
      allow_keys(f, {"constant_complier", "conditional_complier", "always_taker",
                     "never_taker", "one_sided", "worst_context"},
                 "compliance");
      FactorCompliance fc;
      fc.constant_complier = f.value("constant_complier", 0.0);
      fc.conditional_complier = f.value("conditional_complier", 0.0);
      fc.always_taker = f.value("always_taker", 0.0);
      fc.never_taker = f.value("never_taker", 0.0);
      fc.one_sided = f.value("one_sided", false);
      if (f.contains("worst_context")) {
        fc.worst_context = Assignment{get<std::vector<int>>(f, "worst_context", "compliance")};
      }
      c.compliance.push_back(std::move(fc));
    }
  }

  if (j.contains("outcome")) {
    const Json& o = j.at("outcome");
    allow_keys(o, {"model", "baseline", "effects", "interaction"}, "outcome");
    const std::string model = o.value("model", std::string("m1"));
    if (model == "m1") {
      c.outcome.kind = OutcomeModel::Kind::uptake_driven;
    } else if (model == "m2") {
      c.outcome.kind = OutcomeModel::Kind::bernoulli;
    } else {
      throw Error(ErrorKind::parse_error, "outcome.model must be m1 or m2, got '" + model + "'");
    }
    if (o.contains("baseline")) c.outcome.baseline = get_range(o.at("baseline"), "baseline");
    if (o.contains("interaction")) {
      c.outcome.interaction = get_range(o.at("interaction"), "interaction");
    }
    if (o.contains("effects")) {
      schema(o.at("effects").is_array(), "effects must be a list of [lo, hi]");
      for (const Json& r : o.at("effects")) c.outcome.effects.push_back(get_range(r, "effects"));
    }
  }

  if (j.contains("assumptions")) {
    const Json& a = j.at("assumptions");
    allow_keys(a, {"monotonicity", "least_compliant", "weak_exclusion",
                   "joint_least_compliant", "conditional_exclusion"},
               "assumptions");
    if (a.contains("monotonicity")) c.assumptions.monotonicity = toggles(a["monotonicity"], "monotonicity");
    if (a.contains("least_compliant")) {
      c.assumptions.least_compliant = toggles(a["least_compliant"], "least_compliant");
    }
    if (a.contains("weak_exclusion")) {
      c.assumptions.weak_exclusion = toggles(a["weak_exclusion"], "weak_exclusion");
    }
    if (a.contains("joint_least_compliant")) {
      c.assumptions.joint_least_compliant =
          parse_toggle(get<std::string>(a, "joint_least_compliant", "assumptions"));
    }
    if (a.contains("conditional_exclusion")) {
      c.assumptions.conditional_exclusion =
          parse_toggle(get<std::string>(a, "conditional_exclusion", "assumptions"));
    }
  }

  if (j.contains("targets")) {
    schema(j.at("targets").is_array(), "targets must be a list");
    for (const Json& t : j.at("targets")) {
      allow_keys(t, {"factor", "method", "profile"}, "target");
      Target target;
      target.factor = get<int>(t, "factor", "target");
      target.method = Method::parse(t.value("method", std::string("prop2")));
      const std::string profile = t.value("profile", std::string("true"));
      if (profile.rfind("declared:", 0) == 0) {
        target.profile = "declared";
        target.declared = parse_levels(profile.substr(9));
      } else {
        target.profile = profile;
      }
      c.targets.push_back(std::move(target));
    }
  }
  c.normalize();
  return c;
}

Json config_to_json(const ScenarioConfig& c) {
  Json j;
  j["factors"] = c.factors;
  j["units"] = c.units;
  j["clone"] = c.clone;
  j["seed"] = c.seed;
  j["redraw_population"] = c.redraw_population;
  j["alpha"] = c.alpha;
  Json compliance = Json::array();
  for (const FactorCompliance& f : c.compliance) {
    Json e;
    e["constant_complier"] = f.constant_complier;
    e["conditional_complier"] = f.conditional_complier;
    e["always_taker"] = f.always_taker;
    e["never_taker"] = f.never_taker;
    e["one_sided"] = f.one_sided;
    if (f.worst_context) e["worst_context"] = f.worst_context->levels;
    compliance.push_back(std::move(e));
  }
  j["compliance"] = std::move(compliance);
  Json o;
  o["model"] = c.outcome.kind == OutcomeModel::Kind::bernoulli ? "m2" : "m1";
  o["baseline"] = {c.outcome.baseline.lo, c.outcome.baseline.hi};
  Json effects = Json::array();
  for (const Range& r : c.outcome.effects) effects.push_back({r.lo, r.hi});
  o["effects"] = std::move(effects);
  o["interaction"] = {c.outcome.interaction.lo, c.outcome.interaction.hi};
  j["outcome"] = std::move(o);
  Json a;
  a["monotonicity"] = toggle_list(c.assumptions.monotonicity);
  a["least_compliant"] = toggle_list(c.assumptions.least_compliant);
  a["weak_exclusion"] = toggle_list(c.assumptions.weak_exclusion);
  a["joint_least_compliant"] = to_string(c.assumptions.joint_least_compliant);
  a["conditional_exclusion"] = to_string(c.assumptions.conditional_exclusion);
  j["assumptions"] = std::move(a);
  j["arm_sizes"] = c.arm_sizes;
  Json targets = Json::array();
  for (const Target& t : c.targets) {
    Json e;
    e["factor"] = t.factor;
    e["method"] = t.method.name();
    e["profile"] = t.profile == "declared" ? "declared:" + format_levels(t.declared) : t.profile;
    targets.push_back(std::move(e));
  }
  j["targets"] = std::move(targets);
  return j;
}

Json estimate_to_json(const BoundsEstimate& est, const ConfidenceInterval& ci) {
  Json j;
  j["method"] = est.method.name();
  j["factor"] = est.factor;
  j["contexts"] = est.contexts;
  j["nu_hat"] = est.nu_hat;
  j["center"] = est.bounds.center;
  j["half_width_lower"] = est.bounds.half_width_lower;
  j["half_width_upper"] = est.bounds.half_width_upper;
  j["raw_lower"] = est.bounds.interval.raw_lower;
  j["raw_upper"] = est.bounds.interval.raw_upper;
  j["clipped_lower"] = est.bounds.interval.lower;
  j["clipped_upper"] = est.bounds.interval.upper;
  j["se_lower"] = est.se_lower;
  j["se_upper"] = est.se_upper;
  j["ci_level"] = ci.level;
  j["ci_lower"] = ci.lower;
  j["ci_upper"] = ci.upper;
  j["critical_value"] = ci.critical_value;
  j["profile_policy"] = est.profile_policy;
  j["profile_context"] = est.profile_context.levels;
  j["profile_index"] = est.profile_index;
  return j;
}

namespace {

Json summary_json(const Summary& s) {
  Json j;
  j["mean"] = s.mean;
  j["sd"] = s.sd;
  j["mc_se"] = s.mc_se;
  j["n"] = s.n;
  return j;
}

}  // namespace

Json coverage_to_json(const CoverageReport& report, const ScenarioConfig& config) {
  Json j;
  j["kind"] = "coverage";
  j["K"] = config.factors;
  j["replications"] = report.replications;
  j["seed"] = report.seed;
  Json targets = Json::array();
  for (const TargetReport& t : report.targets) {
    Json e;
    e["label"] = t.label;
    e["completed"] = t.completed;
    e["failed"] = t.failed;
    if (!t.first_error.empty()) e["first_error"] = t.first_error;
    e["bounds_coverage"] = summary_json(t.bounds_coverage);
    e["ci_coverage"] = summary_json(t.ci_coverage);
    e["width"] = summary_json(t.width);
    e["lower"] = summary_json(t.lower);
    e["upper"] = summary_json(t.upper);
    e["ci_lower"] = summary_json(t.ci_lower);
    e["ci_upper"] = summary_json(t.ci_upper);
    e["raw_lower"] = summary_json(t.raw_lower);
    e["raw_upper"] = summary_json(t.raw_upper);
    e["se_lower"] = summary_json(t.se_lower);
    e["se_upper"] = summary_json(t.se_upper);
    e["ci_width"] = summary_json(t.ci_width);
    e["bias_lower"] = summary_json(t.bias_lower);
    e["bias_upper"] = summary_json(t.bias_upper);
    e["truth"] = summary_json(t.truth);
    targets.push_back(std::move(e));
  }
  j["targets"] = std::move(targets);
  const Json echo = config_to_json(config);
  j["config"] = echo;
  j["provenance"] = {{"config_hash", content_hash(echo.dump())}};
  return j;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::parse_error, path + ": " + e.what());
  }
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fbounds
