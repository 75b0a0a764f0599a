// fbounds: bounds on constant-complier factorial effects from the command line.
//
//   fbounds analyze data.csv --factor 1 --method prop1,prop2 --profile min
//   fbounds oracle population.json --factor 1
//   fbounds simulate scenario.json -R 1000 --out report.json
//   fbounds plotdata a.json b.json --out bounds.csv
//   fbounds sample scenario.json --out data.csv
//
// Exit codes: 0 success, 2 input error, 3 assumption/estimation error, 4 internal.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fbounds/error.hpp"
#include "fbounds/estimate.hpp"
#include "fbounds/io.hpp"
#include "fbounds/oracle.hpp"
#include "fbounds/simulate.hpp"

using namespace fbounds;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitModel = 3;
constexpr int kExitInternal = 4;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::monotonicity_violation:
    case ErrorKind::assumption_violation:
    case ErrorKind::no_compliers:
    case ErrorKind::empty_group:
    case ErrorKind::weak_first_stage:
    case ErrorKind::generation_failure:
      return kExitModel;
    default:
      return kExitInput;
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::invalid_input, "cannot write " + path);
  out << text;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fixed(double x, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

struct ProfileFlag {
  bool min = true;
  Assignment declared;
};

ProfileFlag parse_profile(const std::string& text) {
  if (text == "min") return {};
  if (text.rfind("declared:", 0) == 0) return {false, parse_levels(text.substr(9))};
  throw Error(ErrorKind::parse_error,
              "--profile must be 'min' or 'declared:<levels>', got '" + text + "'");
}

/// The declared z_{-k} applies as is, or with the partner dropped for joint methods.
ProfilePolicy policy_for(const ProfileFlag& flag, const FactorialDesign& design, int k,
                         const Method& method) {
  if (flag.min) return ProfilePolicy::minimum();
  const auto K = static_cast<std::size_t>(design.factors());
  if (method.kind == Method::Kind::joint && flag.declared.size() == K - 1) {
    const int partner = method.partner;
    return ProfilePolicy::declared(
        strip_factor(flag.declared, partner < k ? partner : partner - 1));
  }
  return ProfilePolicy::declared(flag.declared);
}

std::vector<int> default_factors(const std::vector<int>& factors, int K) {
  if (!factors.empty()) return factors;
  std::vector<int> all;
  for (int k = 1; k <= K; ++k) all.push_back(k);
  return all;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string input;
  std::vector<int> factors;
  std::vector<std::string> methods{"prop2"};
  std::string profile = "min";
  double alpha = 0.05;
  std::string out;
  bool binary_coding = false;
  std::vector<double> rescale;
};

int cmd_analyze(const AnalyzeArgs& args) {
  CsvOptions options;
  options.binary_coding = args.binary_coding;
  if (!args.rescale.empty()) {
    if (args.rescale.size() != 2) {
      throw Error(ErrorKind::invalid_input, "--rescale takes min,max");
    }
    options.rescale = std::make_pair(args.rescale[0], args.rescale[1]);
  }
  if (!(args.alpha > 0.0 && args.alpha < 1.0)) {
    throw Error(ErrorKind::invalid_input, "--alpha must lie in (0,1)");
  }
  const std::string text = read_text_file(args.input);
  std::istringstream in(text);
  const ObservedDataset data = read_dataset_csv(in, options);
  data.validate();
  const int K = data.design.factors();
  const ProfileFlag profile = parse_profile(args.profile);
  const std::vector<int> factors = default_factors(args.factors, K);
  for (int k : factors) data.design.require_factor(k);

  Json estimates = Json::array();
  Json walds = Json::array();
  std::printf("%-16s %3s %10s %10s %10s %10s %10s %10s\n", "method", "k", "center", "lower",
              "upper", "ci_lower", "ci_upper", "profile");
  for (int k : factors) {
    for (const std::string& name : args.methods) {
      const Method method = Method::parse(name);
      const BoundsEstimate est =
          estimate_bounds(data, k, method, policy_for(profile, data.design, k, method));
      const ConfidenceInterval ci = imbens_manski_ci(est, args.alpha);
      estimates.push_back(estimate_to_json(est, ci));
      std::printf("%-16s %3d %10s %10s %10s %10s %10s %10s\n", est.method.name().c_str(), k,
                  fixed(est.bounds.center).c_str(), fixed(est.bounds.interval.lower).c_str(),
                  fixed(est.bounds.interval.upper).c_str(), fixed(ci.lower).c_str(),
                  fixed(ci.upper).c_str(), format_levels(est.profile_context).c_str());
    }
    try {
      const WaldEstimate w = wald_reference(data, k);
      walds.push_back({{"factor", k},
                       {"estimate", w.estimate},
                       {"se", w.se},
                       {"note", "requires strong treatment exclusion"}});
    } catch (const Error& e) {
      walds.push_back({{"factor", k}, {"error", e.what()}});
    }
  }

  Json report;
  report["kind"] = "analysis";
  report["K"] = K;
  report["input"] = {{"path", args.input},
                     {"rows", data.size()},
                     {"arm_counts", data.arm_counts()},
                     {"hash", content_hash(text)}};
  Json opts;
  opts["alpha"] = args.alpha;
  opts["profile"] = args.profile;
  opts["binary_coding"] = args.binary_coding;
  opts["rescale"] = options.rescale ? Json{options.rescale->first, options.rescale->second}
                                    : Json(nullptr);
  report["options"] = std::move(opts);
  report["estimates"] = std::move(estimates);
  report["wald"] = std::move(walds);
  if (!args.out.empty()) write_output(args.out, report.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------- oracle

struct OracleArgs {
  std::string input;
  std::vector<int> factors;
  std::vector<std::string> methods{"prop1", "remark1", "prop2"};
  std::string profile = "min";
  std::string out;
};

Json violations_json(const CheckResult& r) {
  Json list = Json::array();
  for (const Violation& v : r.violations) {
    Json e{{"unit", v.unit}, {"context", v.context}};
    if (v.factor) e["factor"] = v.factor;
    list.push_back(std::move(e));
  }
  return {{"passed", r.passed()}, {"violations", std::move(list)}};
}

Json bounds_json(const Bounds& b) {
  return {{"center", b.center},
          {"half_width_lower", b.half_width_lower},
          {"half_width_upper", b.half_width_upper},
          {"raw_lower", b.interval.raw_lower},
          {"raw_upper", b.interval.raw_upper},
          {"clipped_lower", b.interval.lower},
          {"clipped_upper", b.interval.upper}};
}

int cmd_oracle(const OracleArgs& args) {
  const Population pop = population_from_json(read_json_file(args.input));
  const FactorialDesign& design = pop.design();
  const int K = pop.factors();
  const ProfileFlag profile = parse_profile(args.profile);
  bool failed = false;

  Json factors = Json::array();
  for (int k : default_factors(args.factors, K)) {
    design.require_factor(k);
    Json f;
    f["factor"] = k;
    const CheckResult mono = check_conditional_monotonicity(pop, k);
    const std::vector<std::size_t> valid = check_least_compliant_profile(pop, k);
    f["checks"] = {{"monotonicity", violations_json(mono)},
                   {"least_compliant", {{"valid_contexts", valid}}},
                   {"weak_exclusion", violations_json(check_weak_treatment_exclusion(pop, k))}};
    const FirstStage fs = first_stage(pop, k);
    f["first_stage"] = {{"nu_plus", fs.nu_plus}, {"nu_minus", fs.nu_minus}, {"nu", fs.nu}};

    std::size_t chosen = 0;
    if (!profile.min) {
      chosen = canonical_index(profile.declared);
      if (profile.declared.size() != static_cast<std::size_t>(K - 1)) {
        throw Error(ErrorKind::invalid_input, "declared profile needs K-1 levels");
      }
    } else if (!valid.empty()) {
      chosen = valid.front();
    }
    f["profile_context"] = from_canonical_index(chosen, static_cast<std::size_t>(K - 1)).levels;

    try {
      f["delta"] = true_delta_main(pop, k);
    } catch (const Error& e) {
      f["delta_error"] = e.what();
      failed = true;
    }
    try {
      const GroupShares s = group_shares(pop, k, chosen);
      f["shares"] = {{"rho_c", s.rho_c}, {"rho_cc", s.rho_cc}, {"rho_cn", s.rho_cn},
                     {"rho_a", s.rho_a}, {"rho_n", s.rho_n}};
      const ITTReport itt = itt_report(pop, k);
      Json rows = Json::array();
      for (const ContextITT& c : itt.contexts) {
        rows.push_back({{"gamma", c.gamma},
                        {"constant_part", c.constant_part},
                        {"conditional_complier_part", c.conditional_complier_part},
                        {"conditional_noncomplier_part", c.conditional_noncomplier_part}});
      }
      f["itt"] = std::move(rows);
    } catch (const Error& e) {
      f["shares_error"] = e.what();
      failed = true;
    }

    Json intervals = Json::object();
    for (const std::string& name : args.methods) {
      const Method m = Method::parse(name);
      try {
        switch (m.kind) {
          case Method::Kind::prop1: intervals[name] = bounds_json(bounds_prop1(pop, k, chosen)); break;
          case Method::Kind::remark1: intervals[name] = bounds_json(bounds_remark1(pop, k, chosen)); break;
          case Method::Kind::prop2: intervals[name] = bounds_json(bounds_prop2(pop, k, chosen)); break;
          case Method::Kind::interaction_fk: {
            Json b = bounds_json(bounds_interaction_fk(pop, k, m.factors, chosen));
            b["delta"] = true_delta_interaction(pop, m.factors, ComplierScope::on_factor(k));
            intervals[name] = std::move(b);
            break;
          }
          case Method::Kind::joint: {
            const auto joint = check_joint_least_compliant(pop, k, m.partner);
            if (joint.empty()) {
              throw Error(ErrorKind::assumption_violation, "no valid joint profile");
            }
            Json b = bounds_json(bounds_joint_interaction(pop, k, m.partner, joint.front()));
            b["delta"] = true_delta_interaction(pop, {k, m.partner},
                                                ComplierScope::joint_on(k, m.partner));
            intervals[name] = std::move(b);
            break;
          }
        }
      } catch (const Error& e) {
        intervals[name] = {{"error", e.what()}, {"kind", to_string(e.kind())}};
        failed = true;
      }
    }
    f["intervals"] = std::move(intervals);
    factors.push_back(std::move(f));
  }

  Json report;
  report["kind"] = "oracle";
  report["K"] = K;
  report["N"] = pop.units();
  report["factors"] = std::move(factors);
  const std::string text = report.dump(2) + "\n";
  write_output(args.out.empty() ? "-" : args.out, text);
  if (failed) std::fprintf(stderr, "fbounds: one or more oracle quantities are not defined\n");
  return failed ? kExitModel : 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  std::size_t replications = 100;
  std::optional<std::uint64_t> seed;
  std::string out;
};

std::uint64_t parse_seed(const std::string& text, const std::string& source) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::invalid_input, source + " is not an unsigned integer: " + text);
  }
}

/// Seed precedence: --seed, then FB_SEED, then the config.
ScenarioConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
  ScenarioConfig config = config_from_json(read_json_file(path));
  if (seed) {
    config.seed = *seed;
  } else if (const char* env = std::getenv("FB_SEED"); env && *env) {
    config.seed = parse_seed(env, "FB_SEED");
  }
  return config;
}

int cmd_simulate(const SimulateArgs& args) {
  const ScenarioConfig config = load_config(args.config, args.seed);
  const CoverageReport report = monte_carlo(config, args.replications);
  std::printf("%-28s %6s %16s %16s %10s\n", "target", "ok", "bounds cover", "CI cover",
              "width");
  for (const TargetReport& t : report.targets) {
    std::printf("%-28s %6zu %8s+-%6s %8s+-%6s %10s\n", t.label.c_str(), t.completed,
                fixed(t.bounds_coverage.mean, 3).c_str(), fixed(t.bounds_coverage.mc_se, 3).c_str(),
                fixed(t.ci_coverage.mean, 3).c_str(), fixed(t.ci_coverage.mc_se, 3).c_str(),
                fixed(t.width.mean).c_str());
    if (t.failed) {
      std::printf("  %zu replications failed; first: %s\n", t.failed, t.first_error.c_str());
    }
  }
  if (!args.out.empty()) write_output(args.out, coverage_to_json(report, config).dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------- plotdata

int cmd_plotdata(const std::vector<std::string>& inputs, const std::string& out) {
  if (inputs.empty()) throw Error(ErrorKind::invalid_input, "plotdata needs at least one report");
  std::ostringstream csv;
  csv << "label,lower,upper,ci_lower,ci_upper,point\n";
  std::optional<int> K;
  for (const std::string& path : inputs) {
    const Json r = read_json_file(path);
    if (!r.contains("kind") || !r.contains("K")) {
      throw Error(ErrorKind::parse_error, path + ": not an fbounds report");
    }
    const int k = r.at("K").get<int>();
    if (K && *K != k) {
      throw Error(ErrorKind::incompatible, path + " has K=" + std::to_string(k) +
                                               " but earlier reports have K=" +
                                               std::to_string(*K));
    }
    K = k;
    const std::string kind = r.at("kind").get<std::string>();
    if (kind == "analysis") {
      std::map<int, double> wald;
      for (const Json& w : r.at("wald")) {
        if (w.contains("estimate")) wald[w.at("factor").get<int>()] = w.at("estimate").get<double>();
      }
      for (const Json& e : r.at("estimates")) {
        const int factor = e.at("factor").get<int>();
        csv << e.at("method").get<std::string>() << " k" << factor << ','
            << fmt(e.at("clipped_lower").get<double>()) << ','
            << fmt(e.at("clipped_upper").get<double>()) << ','
            << fmt(e.at("ci_lower").get<double>()) << ','
            << fmt(e.at("ci_upper").get<double>()) << ',';
        if (wald.count(factor)) csv << fmt(wald[factor]);
        csv << '\n';
      }
    } else if (kind == "coverage") {
      for (const Json& t : r.at("targets")) {
        auto mean = [&](const char* key) { return fmt(t.at(key).at("mean").get<double>()); };
        csv << t.at("label").get<std::string>() << ',' << mean("lower") << ',' << mean("upper")
            << ',' << mean("ci_lower") << ',' << mean("ci_upper") << ',' << mean("truth") << '\n';
      }
    } else {
      throw Error(ErrorKind::incompatible, path + ": cannot plot a '" + kind + "' report");
    }
  }
  write_output(out, csv.str());
  return 0;
}

// ---------------------------------------------------------------- sample

struct SampleArgs {
  std::string input;
  std::optional<std::uint64_t> seed;
  std::uint64_t replication = 0;
  bool census_rows = false;
  std::string out;
  std::string population_out;
};

int cmd_sample(const SampleArgs& args) {
  const Json j = read_json_file(args.input);
  std::optional<Population> pop;
  std::vector<std::size_t> arm_sizes;
  std::uint64_t seed = 1;
  if (j.contains("uptake")) {
    pop = population_from_json(j);
    const std::size_t J = pop->arms();
    arm_sizes.assign(J, pop->units() / J);
    for (std::size_t a = 0; a < pop->units() % J; ++a) ++arm_sizes[a];
    if (args.seed) seed = *args.seed;
  } else {
    const ScenarioConfig config = load_config(args.input, args.seed);
    pop = generate_population(config, 0).population;
    arm_sizes = config.arm_sizes;
    seed = config.seed;
  }
  if (!args.population_out.empty()) {
    write_output(args.population_out, population_to_json(*pop).dump(2) + "\n");
  }
  std::ostringstream csv;
  if (args.census_rows) {
    write_dataset_csv(csv, census(*pop));
  } else {
    Rng rng = Rng::substream(seed, Rng::Stream::allocation, args.replication);
    write_dataset_csv(csv, observe(*pop, complete_randomization(*pop, arm_sizes, rng)));
  }
  write_output(args.out, csv.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bounds on constant-complier factorial effects under noncompliance"};
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* a = app.add_subcommand("analyze", "Estimate bounds and confidence intervals from a CSV");
  a->add_option("input", analyze.input, "CSV with header z1..zK,d1..dK,y")->required();
  a->add_option("--factor", analyze.factors, "Factors of interest (default: all)")->delimiter(',');
  a->add_option("--method", analyze.methods,
                "prop1, remark1, prop2, interaction:1+2, joint:<k'>")
      ->delimiter(',');
  a->add_option("--profile", analyze.profile, "min or declared:<levels of the other factors>");
  a->add_option("--alpha", analyze.alpha, "Confidence level is 1 - alpha");
  a->add_option("--out", analyze.out, "JSON report path");
  a->add_flag("--binary-coding", analyze.binary_coding, "z and d are coded 0/1");
  a->add_option("--rescale", analyze.rescale, "min,max of the outcome scale")->delimiter(',');

  OracleArgs oracle;
  auto* o = app.add_subcommand("oracle", "Exact bounds and checks for a population file");
  o->add_option("input", oracle.input, "Population JSON")->required();
  o->add_option("--factor", oracle.factors)->delimiter(',');
  o->add_option("--method", oracle.methods)->delimiter(',');
  o->add_option("--profile", oracle.profile, "min (first valid profile) or declared:<levels>");
  o->add_option("--out", oracle.out, "JSON report path (default: stdout)");

  SimulateArgs simulate;
  std::uint64_t sim_seed = 0;
  auto* s = app.add_subcommand("simulate", "Monte Carlo coverage study");
  s->add_option("config", simulate.config, "Scenario JSON")->required();
  s->add_option("-R,--replications", simulate.replications);
  auto* seed_opt = s->add_option("--seed", sim_seed, "Overrides FB_SEED and the config seed");
  s->add_option("--out", simulate.out, "Coverage report path");

  std::vector<std::string> plot_inputs;
  std::string plot_out;
  auto* p = app.add_subcommand("plotdata", "Bound summaries as CSV for plotting");
  p->add_option("reports", plot_inputs, "analysis or coverage reports")->required();
  p->add_option("--out", plot_out, "CSV path (default: stdout)");

  SampleArgs sample;
  std::uint64_t sample_seed = 0;
  auto* d = app.add_subcommand("sample", "Draw one observed dataset as CSV");
  d->add_option("input", sample.input, "Scenario or population JSON")->required();
  auto* sample_seed_opt = d->add_option("--seed", sample_seed);
  d->add_option("--replication", sample.replication, "Allocation stream index");
  d->add_flag("--census", sample.census_rows, "Every unit in every arm");
  d->add_option("--out", sample.out, "CSV path (default: stdout)");
  d->add_option("--population-out", sample.population_out, "Also write the population JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*a) return cmd_analyze(analyze);
    if (*o) return cmd_oracle(oracle);
    if (*s) {
      if (*seed_opt) simulate.seed = sim_seed;
      return cmd_simulate(simulate);
    }
    if (*p) return cmd_plotdata(plot_inputs, plot_out);
    if (*d) {
      if (*sample_seed_opt) sample.seed = sample_seed;
      return cmd_sample(sample);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "fbounds: %s error: %s\n", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fbounds: internal error: %s\n", e.what());
    return kExitInternal;
  }
  return kExitInternal;
}
