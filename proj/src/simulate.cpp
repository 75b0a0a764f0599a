#include "fbounds/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "fbounds/error.hpp"
#include "fbounds/oracle.hpp"

namespace fbounds {

const char* to_string(Toggle toggle) {
  switch (toggle) {
    case Toggle::free: return "free";
    case Toggle::force: return "force";
    case Toggle::violate: return "violate";
  }
  return "?";
}

Toggle parse_toggle(const std::string& text) {
  if (text == "free") return Toggle::free;
  if (text == "force") return Toggle::force;
  if (text == "violate") return Toggle::violate;
  throw Error(ErrorKind::parse_error,
              "unknown toggle '" + text + "' (expected free, force or violate)");
}

std::string Target::label() const {
  std::string out = method.name() + "/k" + std::to_string(factor) + "/" + profile;
  if (profile == "declared") {
    out += ":";
    for (int v : declared.levels) out += v > 0 ? '+' : '-';
  }
  return out;
}

namespace {

std::string factor_name(int k) { return "factor " + std::to_string(k); }

void require_range(const Range& r, const std::string& what) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
    throw Error(ErrorKind::invalid_input, what + " range must satisfy lo <= hi");
  }
}

template <typename T>
void resize_per_factor(std::vector<T>& v, int K, const T& fill, const std::string& what) {
  if (v.empty()) {
    v.assign(static_cast<std::size_t>(K), fill);
  } else if (v.size() == 1 && K > 1) {
    v.assign(static_cast<std::size_t>(K), v.front());
  } else if (v.size() != static_cast<std::size_t>(K)) {
    throw Error(ErrorKind::invalid_input, what + " needs one entry per factor (" +
                                              std::to_string(K) + "), got " +
                                              std::to_string(v.size()));
  }
}

}  // namespace

void ScenarioConfig::normalize() {
  if (factors < 1 || factors > kMaxFactors) {
    throw Error(ErrorKind::invalid_design,
                "factors must lie in 1.." + std::to_string(kMaxFactors));
  }
  if (units < 1) throw Error(ErrorKind::invalid_input, "units must be >= 1");
  if (clone < 1) throw Error(ErrorKind::invalid_input, "clone must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorKind::invalid_input, "alpha must lie in (0,1)");
  }

  resize_per_factor(compliance, factors, FactorCompliance{}, "compliance");
  const FactorialDesign design(factors);
  for (int k = 1; k <= factors; ++k) {
    const FactorCompliance& c = compliance[static_cast<std::size_t>(k - 1)];
    const double probs[] = {c.constant_complier, c.conditional_complier, c.always_taker,
                            c.never_taker};
    double total = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw Error(ErrorKind::invalid_share,
                    factor_name(k) + ": type probabilities must be non-negative");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw Error(ErrorKind::invalid_share,
                  factor_name(k) + ": type probabilities sum to " + std::to_string(total) +
                      ", not 1");
    }
    if (c.one_sided && c.always_taker > 0.0) {
      throw Error(ErrorKind::invalid_share,
                  factor_name(k) + ": one-sided factors cannot have always-takers");
    }
    if (c.worst_context && c.worst_context->size() != static_cast<std::size_t>(factors - 1)) {
      throw Error(ErrorKind::invalid_input,
                  factor_name(k) + ": worst context needs " + std::to_string(factors - 1) +
                      " levels");
    }
    if (c.worst_context) {
      for (int v : c.worst_context->levels) {
        if (v != 1 && v != -1) {
          throw Error(ErrorKind::invalid_input, factor_name(k) + ": levels must be +/-1");
        }
      }
    }
  }

  resize_per_factor(outcome.effects, factors, Range{0.1, 0.3}, "outcome effects");
  require_range(outcome.baseline, "baseline");
  require_range(outcome.interaction, "interaction");
  for (const Range& r : outcome.effects) require_range(r, "effect");

  resize_per_factor(assumptions.monotonicity, factors, Toggle::free, "monotonicity toggles");
  resize_per_factor(assumptions.least_compliant, factors, Toggle::free,
                    "least-compliant toggles");
  resize_per_factor(assumptions.weak_exclusion, factors, Toggle::free,
                    "weak-exclusion toggles");

  const std::size_t J = design.arms();
  const std::size_t N = population_size();
  if (arm_sizes.empty()) {
    arm_sizes.assign(J, N / J);
    for (std::size_t j = 0; j < N % J; ++j) ++arm_sizes[j];
  }
  if (arm_sizes.size() != J) {
    throw Error(ErrorKind::invalid_design, "arm_sizes needs " + std::to_string(J) +
                                               " entries, got " +
                                               std::to_string(arm_sizes.size()));
  }
  const std::size_t total = std::accumulate(arm_sizes.begin(), arm_sizes.end(), std::size_t{0});
  if (total != N) {
    throw Error(ErrorKind::invalid_design, "arm sizes sum to " + std::to_string(total) +
                                               " but the population has " +
                                               std::to_string(N) + " units");
  }
  for (std::size_t j = 0; j < J; ++j) {
    if (arm_sizes[j] < 2) {
      throw Error(ErrorKind::invalid_design,
                  "arm " + std::to_string(j) + " has fewer than 2 units");
    }
  }

  if (targets.empty()) {
    for (int k = 1; k <= factors; ++k) targets.push_back(Target{k, Method::prop2(), "true", {}});
  }
  for (const Target& t : targets) {
    design.require_factor(t.factor);
    if (t.profile != "true" && t.profile != "min" && t.profile != "declared") {
      throw Error(ErrorKind::invalid_input,
                  "target profile must be true, min or declared, got '" + t.profile + "'");
    }
    std::size_t context_size = static_cast<std::size_t>(factors - 1);
    if (t.method.kind == Method::Kind::joint) {
      design.require_factor(t.method.partner);
      if (t.method.partner == t.factor) {
        throw Error(ErrorKind::invalid_factor, "joint target needs two distinct factors");
      }
      context_size = static_cast<std::size_t>(factors - 2);
    }
    if (t.method.kind == Method::Kind::interaction_fk) {
      const auto& f = t.method.factors;
      if (std::find(f.begin(), f.end(), t.factor) == f.end()) {
        throw Error(ErrorKind::invalid_factor, "interaction target must contain its factor");
      }
      for (int j : f) design.require_factor(j);
    }
    if (t.profile == "declared" && t.declared.size() != context_size) {
      throw Error(ErrorKind::invalid_input, "declared profile of " + t.label() + " needs " +
                                                std::to_string(context_size) + " levels");
    }
  }
}

namespace {

using TypeMap = std::vector<std::vector<ComplianceType>>;  // [factor][context]

/// Removes bit `pos` (0-based) from an index.
std::size_t remove_bit(std::size_t x, int pos) {
  const std::size_t low = x & ((std::size_t{1} << pos) - 1);
  return low | ((x >> (pos + 1)) << pos);
}

/// Joint context of (k, k2) containing context c of Z_{-k}.
std::size_t joint_of(const FactorialDesign& design, int k, int k2, std::size_t c) {
  const std::size_t arm = design.arm_of(k, c, -1);
  const int hi = std::max(k, k2) - 1;
  const int lo = std::min(k, k2) - 1;
  return remove_bit(remove_bit(arm, hi), lo);
}

/// Level of factor j in context c of Z_{-k}.
int level_in_context(const FactorialDesign& design, int k, std::size_t c, int j) {
  return design.level(design.arm_of(k, c, -1), j);
}

int uptake_of(ComplianceType t, int level) {
  switch (t) {
    case ComplianceType::complier: return level;
    case ComplianceType::always_taker: return 1;
    case ComplianceType::never_taker: return -1;
    case ComplianceType::defier: return -level;
  }
  return level;
}

void write_uptake(const FactorialDesign& design, const TypeMap& types,
                  std::vector<std::int8_t>& out) {
  const int K = design.factors();
  for (std::size_t j = 0; j < design.arms(); ++j) {
    for (int k = 1; k <= K; ++k) {
      const ComplianceType t =
          types[static_cast<std::size_t>(k - 1)][design.context_of(k, j)];
      out.push_back(static_cast<std::int8_t>(uptake_of(t, design.level(j, k))));
    }
  }
}

Population single_unit(const FactorialDesign& design, const TypeMap& types) {
  std::vector<std::int8_t> d;
  d.reserve(design.arms() * static_cast<std::size_t>(design.factors()));
  write_uptake(design, types, d);
  return Population(design, 1, std::move(d), std::vector<double>(design.arms(), 0.0));
}

bool contains(const std::vector<std::size_t>& v, std::size_t x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

std::vector<ComplianceType> draw_factor_types(const FactorCompliance& c, std::size_t contexts,
                                              std::size_t worst, Rng& rng) {
  auto noncomplier = [&]() {
    const double a = c.always_taker;
    const double n = c.never_taker;
    if (a + n <= 0.0) return ComplianceType::never_taker;
    return rng.uniform() * (a + n) < a ? ComplianceType::always_taker
                                       : ComplianceType::never_taker;
  };
  const double u = rng.uniform();
  double edge = c.constant_complier;
  if (u < edge) return std::vector<ComplianceType>(contexts, ComplianceType::complier);
  edge += c.conditional_complier;
  if (u < edge && contexts > 1) {
    // A uniformly drawn nonempty subset of the contexts other than the worst.
    std::vector<bool> complies(contexts, false);
    bool any = false;
    while (!any) {
      for (std::size_t z = 0; z < contexts; ++z) {
        complies[z] = z != worst && rng.bernoulli(0.5);
        any = any || complies[z];
      }
    }
    std::vector<ComplianceType> out(contexts);
    for (std::size_t z = 0; z < contexts; ++z) {
      out[z] = complies[z] ? ComplianceType::complier : noncomplier();
    }
    return out;
  }
  if (u < edge) return std::vector<ComplianceType>(contexts, noncomplier());
  edge += c.always_taker;
  if (u < edge) return std::vector<ComplianceType>(contexts, ComplianceType::always_taker);
  return std::vector<ComplianceType>(contexts, ComplianceType::never_taker);
}

struct Worst {
  std::vector<std::size_t> context;  // per factor
  std::map<std::pair<int, int>, std::size_t> joint;
};

/// Name of the first forced toggle the unit fails, or empty if none.
std::string unit_failure(const ScenarioConfig& config, const FactorialDesign& design,
                         const Worst& worst, const TypeMap& types) {
  const Population unit = single_unit(design, types);
  const AssumptionToggles& a = config.assumptions;
  const int K = config.factors;
  for (int k = 1; k <= K; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    if (a.monotonicity[i] == Toggle::force && !check_conditional_monotonicity(unit, k).passed()) {
      return "monotonicity on " + factor_name(k);
    }
    if (a.least_compliant[i] == Toggle::force &&
        !contains(check_least_compliant_profile(unit, k), worst.context[i])) {
      return "least_compliant on " + factor_name(k);
    }
    if (a.weak_exclusion[i] == Toggle::force &&
        !check_weak_treatment_exclusion(unit, k).passed()) {
      return "weak_exclusion on " + factor_name(k);
    }
  }
  for (int k = 1; k <= K; ++k) {
    for (int k2 = k + 1; k2 <= K; ++k2) {
      if (a.conditional_exclusion == Toggle::force &&
          !check_conditional_treatment_exclusion(unit, k, k2).passed()) {
        return "conditional_exclusion on factors " + std::to_string(k) + "," +
               std::to_string(k2);
      }
      if (a.joint_least_compliant == Toggle::force &&
          !contains(check_joint_least_compliant(unit, k, k2), worst.joint.at({k, k2}))) {
        return "joint_least_compliant on factors " + std::to_string(k) + "," +
               std::to_string(k2);
      }
    }
  }
  return {};
}

TypeMap all_compliers(const FactorialDesign& design) {
  return TypeMap(static_cast<std::size_t>(design.factors()),
                 std::vector<ComplianceType>(design.contexts(), ComplianceType::complier));
}

/// Units that break one assumption, on otherwise fully compliant factors.
std::vector<TypeMap> violators(const ScenarioConfig& config, const FactorialDesign& design,
                               const Worst& worst) {
  const AssumptionToggles& a = config.assumptions;
  const int K = config.factors;
  const std::size_t C = design.contexts();
  const auto C_ = ComplianceType::complier;
  const auto N_ = ComplianceType::never_taker;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::generation_failure, "cannot violate " + what);
  };
  std::vector<TypeMap> out;
  for (int k = 1; k <= K; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    const std::size_t w = worst.context[i];
    if (a.monotonicity[i] == Toggle::violate) {
      TypeMap t = all_compliers(design);
      t[i][w] = ComplianceType::defier;
      out.push_back(std::move(t));
    }
    if (a.least_compliant[i] == Toggle::violate) {
      need(C >= 2, "least_compliant on " + factor_name(k) + " with a single context");
      TypeMap only = all_compliers(design);
      TypeMap except = all_compliers(design);
      for (std::size_t z = 0; z < C; ++z) only[i][z] = z == w ? C_ : N_;
      except[i][w] = N_;
      out.push_back(std::move(only));
      out.push_back(std::move(except));
    }
    if (a.weak_exclusion[i] == Toggle::violate) {
      need(K >= 2, "weak_exclusion on " + factor_name(k) + " with one factor");
      const int j = k == 1 ? 2 : 1;
      const auto ji = static_cast<std::size_t>(j - 1);
      TypeMap t = all_compliers(design);
      t[i].assign(C, N_);
      // Factor j follows z_k: it complies only away from its worst context's z_k.
      const int worst_level = level_in_context(design, j, worst.context[ji], k);
      for (std::size_t z = 0; z < C; ++z) {
        t[ji][z] = level_in_context(design, j, z, k) != worst_level ? C_ : N_;
      }
      out.push_back(std::move(t));
    }
  }
  if (a.conditional_exclusion == Toggle::violate) {
    need(K >= 2, "conditional_exclusion with one factor");
    TypeMap t = all_compliers(design);
    const int worst_level = level_in_context(design, 1, worst.context[0], 2);
    for (std::size_t z = 0; z < C; ++z) {
      t[0][z] = level_in_context(design, 1, z, 2) != worst_level ? C_ : N_;
    }
    out.push_back(std::move(t));
  }
  if (a.joint_least_compliant == Toggle::violate) {
    need(K >= 3, "joint_least_compliant with fewer than three factors");
    const std::size_t wj = worst.joint.at({1, 2});
    TypeMap only = all_compliers(design);
    TypeMap except = all_compliers(design);
    for (std::size_t z = 0; z < C; ++z) {
      const bool at_worst = joint_of(design, 1, 2, z) == wj;
      only[0][z] = at_worst ? C_ : N_;
      except[0][z] = at_worst ? N_ : C_;
    }
    out.push_back(std::move(only));
    out.push_back(std::move(except));
  }
  return out;
}

/// Population-level confirmation of every forced and violated toggle.
void verify(const ScenarioConfig& config, const Population& pop, const Worst& worst) {
  const AssumptionToggles& a = config.assumptions;
  const int K = config.factors;
  auto expect = [](Toggle t, bool holds, const std::string& what) {
    if (t == Toggle::force && !holds) {
      throw Error(ErrorKind::generation_failure,
                  "infeasible toggle combination: cannot force " + what);
    }
    if (t == Toggle::violate && holds) {
      throw Error(ErrorKind::generation_failure,
                  "infeasible toggle combination: cannot violate " + what);
    }
  };
  for (int k = 1; k <= K; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    expect(a.monotonicity[i], check_conditional_monotonicity(pop, k).passed(),
           "monotonicity on " + factor_name(k));
    const auto valid = check_least_compliant_profile(pop, k);
    const bool lc = a.least_compliant[i] == Toggle::violate ? !valid.empty()
                                                            : contains(valid, worst.context[i]);
    expect(a.least_compliant[i], lc, "least_compliant on " + factor_name(k));
    expect(a.weak_exclusion[i], check_weak_treatment_exclusion(pop, k).passed(),
           "weak_exclusion on " + factor_name(k));
  }
  for (int k = 1; k <= K; ++k) {
    for (int k2 = k + 1; k2 <= K; ++k2) {
      const std::string pair = "factors " + std::to_string(k) + "," + std::to_string(k2);
      const bool first = k == 1 && k2 == 2;
      if (a.conditional_exclusion == Toggle::force || first) {
        expect(a.conditional_exclusion,
               check_conditional_treatment_exclusion(pop, k, k2).passed(),
               "conditional_exclusion on " + pair);
      }
      if (a.joint_least_compliant == Toggle::force || first) {
        const auto valid = check_joint_least_compliant(pop, k, k2);
        const bool holds = a.joint_least_compliant == Toggle::violate
                               ? !valid.empty()
                               : contains(valid, worst.joint.at({k, k2}));
        expect(a.joint_least_compliant, holds, "joint_least_compliant on " + pair);
      }
    }
  }
}

struct OutcomeParams {
  double baseline = 0.0;
  std::vector<double> effects;
  std::vector<double> interactions;  // pairs k < k' in lexicographic order
  double threshold = 0.0;
};

OutcomeParams draw_outcome(const OutcomeModel& m, int K, Rng& rng) {
  OutcomeParams p;
  p.baseline = rng.uniform(m.baseline.lo, m.baseline.hi);
  for (int k = 0; k < K; ++k) p.effects.push_back(rng.uniform(m.effects[k].lo, m.effects[k].hi));
  for (int k = 0; k < K; ++k) {
    for (int k2 = k + 1; k2 < K; ++k2) {
      p.interactions.push_back(rng.uniform(m.interaction.lo, m.interaction.hi));
    }
  }
  if (m.kind == OutcomeModel::Kind::bernoulli) p.threshold = rng.uniform();
  return p;
}

double outcome_value(const OutcomeModel& m, const OutcomeParams& p, const std::int8_t* d,
                     int K) {
  double y = p.baseline;
  std::size_t pair = 0;
  for (int k = 0; k < K; ++k) {
    const double dk = (d[k] + 1) / 2.0;
    y += p.effects[static_cast<std::size_t>(k)] * dk;
    for (int k2 = k + 1; k2 < K; ++k2) {
      y += p.interactions[pair++] * dk * ((d[k2] + 1) / 2.0);
    }
  }
  y = std::clamp(y, 0.0, 1.0);
  if (m.kind == OutcomeModel::Kind::bernoulli) return p.threshold < y ? 1.0 : 0.0;
  return y;
}

}  // namespace

GeneratedPopulation generate_population(const ScenarioConfig& config, std::uint64_t stream) {
  ScenarioConfig cfg = config;
  cfg.normalize();
  const int K = cfg.factors;
  const FactorialDesign design(K);
  Rng rng = Rng::substream(cfg.seed, Rng::Stream::generation, stream);

  // One global worst arm keeps the per-factor and joint profiles consistent;
  // declared contexts override it factor by factor.
  Worst worst;
  const std::size_t star = rng.below(design.arms());
  for (int k = 1; k <= K; ++k) {
    const auto& declared = cfg.compliance[static_cast<std::size_t>(k - 1)].worst_context;
    worst.context.push_back(declared ? canonical_index(*declared)
                                     : design.context_of(k, star));
  }
  for (int k = 1; k <= K; ++k) {
    for (int k2 = k + 1; k2 <= K; ++k2) {
      worst.joint[{k, k2}] = joint_of(design, k, k2, worst.context[static_cast<std::size_t>(k - 1)]);
    }
  }

  std::vector<TypeMap> units;
  units.reserve(cfg.units);
  for (std::size_t i = 0; i < cfg.units; ++i) {
    std::string failure;
    bool accepted = false;
    for (int attempt = 0; attempt < kGenerationRetries && !accepted; ++attempt) {
      TypeMap types;
      for (int k = 1; k <= K; ++k) {
        const auto fi = static_cast<std::size_t>(k - 1);
        types.push_back(draw_factor_types(cfg.compliance[fi], design.contexts(),
                                          worst.context[fi], rng));
      }
      failure = unit_failure(cfg, design, worst, types);
      if (failure.empty()) {
        units.push_back(std::move(types));
        accepted = true;
      }
    }
    if (!accepted) {
      throw Error(ErrorKind::generation_failure,
                  "no unit satisfying forced " + failure + " after " +
                      std::to_string(kGenerationRetries) + " attempts");
    }
  }

  std::vector<TypeMap> bad = violators(cfg, design, worst);
  if (bad.size() > units.size()) {
    throw Error(ErrorKind::generation_failure,
                "violated toggles need " + std::to_string(bad.size()) + " units but only " +
                    std::to_string(units.size()) + " are generated");
  }
  std::copy(bad.begin(), bad.end(), units.end() - static_cast<std::ptrdiff_t>(bad.size()));

  std::vector<std::int8_t> uptake;
  uptake.reserve(cfg.units * design.arms() * static_cast<std::size_t>(K));
  for (const TypeMap& t : units) write_uptake(design, t, uptake);

  std::vector<double> outcome;
  outcome.reserve(cfg.units * design.arms());
  for (std::size_t i = 0; i < cfg.units; ++i) {
    const OutcomeParams p = draw_outcome(cfg.outcome, K, rng);
    for (std::size_t j = 0; j < design.arms(); ++j) {
      const std::int8_t* d = uptake.data() + (i * design.arms() + j) * static_cast<std::size_t>(K);
      outcome.push_back(outcome_value(cfg.outcome, p, d, K));
    }
  }

  Population base(design, cfg.units, std::move(uptake), std::move(outcome));
  verify(cfg, base, worst);
  GeneratedPopulation out{cfg.clone > 1 ? base.cloned(cfg.clone) : std::move(base),
                          std::move(worst.context), std::move(worst.joint)};
  return out;
}

std::vector<std::size_t> complete_randomization(const Population& pop,
                                                const std::vector<std::size_t>& arm_sizes,
                                                Rng& rng) {
  if (arm_sizes.size() != pop.arms()) {
    throw Error(ErrorKind::invalid_design, "arm_sizes needs " + std::to_string(pop.arms()) +
                                               " entries, got " +
                                               std::to_string(arm_sizes.size()));
  }
  const std::size_t total = std::accumulate(arm_sizes.begin(), arm_sizes.end(), std::size_t{0});
  if (total != pop.units()) {
    throw Error(ErrorKind::invalid_design, "arm sizes sum to " + std::to_string(total) +
                                               ", population has " +
                                               std::to_string(pop.units()) + " units");
  }
  for (std::size_t j = 0; j < arm_sizes.size(); ++j) {
    if (arm_sizes[j] < 2) {
      throw Error(ErrorKind::invalid_design,
                  "arm " + std::to_string(j) + " has fewer than 2 units");
    }
  }
  std::vector<std::size_t> allocation;
  allocation.reserve(total);
  for (std::size_t j = 0; j < arm_sizes.size(); ++j) allocation.insert(allocation.end(), arm_sizes[j], j);
  rng.shuffle(allocation);
  return allocation;
}

std::vector<std::size_t> complete_randomization(const Population& pop,
                                                const std::vector<std::size_t>& arm_sizes,
                                                std::uint64_t seed) {
  Rng rng = Rng::substream(seed, Rng::Stream::allocation, 0);
  return complete_randomization(pop, arm_sizes, rng);
}

ObservedDataset observe(const Population& pop, const std::vector<std::size_t>& allocation) {
  if (allocation.size() != pop.units()) {
    throw Error(ErrorKind::invalid_input, "allocation covers " +
                                              std::to_string(allocation.size()) + " of " +
                                              std::to_string(pop.units()) + " units");
  }
  ObservedDataset data(pop.design());
  data.rows.reserve(pop.units());
  const int K = pop.factors();
  for (std::size_t i = 0; i < pop.units(); ++i) {
    const std::size_t arm = allocation[i];
    if (arm >= pop.arms()) throw Error(ErrorKind::invalid_input, "allocation arm out of range");
    Observation row;
    row.arm = arm;
    row.uptake.resize(static_cast<std::size_t>(K));
    for (int k = 1; k <= K; ++k) row.uptake[static_cast<std::size_t>(k - 1)] = pop.uptake(i, arm, k);
    row.outcome = pop.outcome(i, arm);
    data.rows.push_back(std::move(row));
  }
  return data;
}

ObservedDataset census(const Population& pop) {
  ObservedDataset data(pop.design());
  data.rows.reserve(pop.units() * pop.arms());
  const int K = pop.factors();
  for (std::size_t arm = 0; arm < pop.arms(); ++arm) {
    for (std::size_t i = 0; i < pop.units(); ++i) {
      Observation row;
      row.arm = arm;
      row.uptake.resize(static_cast<std::size_t>(K));
      for (int k = 1; k <= K; ++k) row.uptake[static_cast<std::size_t>(k - 1)] = pop.uptake(i, arm, k);
      row.outcome = pop.outcome(i, arm);
      data.rows.push_back(std::move(row));
    }
  }
  return data;
}

namespace {

/// Profile index a target's oracle is evaluated at.
std::size_t oracle_profile(const Target& t, const GeneratedPopulation& gen) {
  if (t.profile == "declared") return canonical_index(t.declared);
  if (t.method.kind == Method::Kind::joint) {
    const int a = std::min(t.factor, t.method.partner);
    const int b = std::max(t.factor, t.method.partner);
    return gen.worst_joint_context.at({a, b});
  }
  return gen.worst_context[static_cast<std::size_t>(t.factor - 1)];
}

ProfilePolicy target_policy(const Target& t, const GeneratedPopulation& gen) {
  if (t.profile == "min") return ProfilePolicy::minimum();
  if (t.profile == "declared") return ProfilePolicy::declared(t.declared);
  const std::size_t length = static_cast<std::size_t>(
      gen.population.factors() - (t.method.kind == Method::Kind::joint ? 2 : 1));
  return ProfilePolicy::declared(from_canonical_index(oracle_profile(t, gen), length));
}

}  // namespace

std::vector<TargetTruth> target_truths(const ScenarioConfig& config,
                                       const GeneratedPopulation& gen) {
  const Population& pop = gen.population;
  std::vector<TargetTruth> out;
  for (const Target& t : config.targets) {
    TargetTruth truth;
    const int k = t.factor;
    try {
      switch (t.method.kind) {
        case Method::Kind::interaction_fk:
          truth.truth = true_delta_interaction(pop, t.method.factors, ComplierScope::on_factor(k));
          break;
        case Method::Kind::joint:
          truth.truth = true_delta_interaction(pop, {k, t.method.partner},
                                               ComplierScope::joint_on(k, t.method.partner));
          break;
        default:
          truth.truth = true_delta_main(pop, k);
      }
      truth.has_truth = true;
    } catch (const Error& e) {
      truth.error = e.what();
    }
    try {
      const std::size_t p = oracle_profile(t, gen);
      Bounds b;
      switch (t.method.kind) {
        case Method::Kind::prop1: b = bounds_prop1(pop, k, p); break;
        case Method::Kind::remark1: b = bounds_remark1(pop, k, p); break;
        case Method::Kind::prop2: b = bounds_prop2(pop, k, p); break;
        case Method::Kind::interaction_fk:
          b = bounds_interaction_fk(pop, k, t.method.factors, p);
          break;
        case Method::Kind::joint:
          b = bounds_joint_interaction(pop, k, t.method.partner, p);
          break;
      }
      truth.has_oracle = true;
      truth.oracle_lower = b.interval.raw_lower;
      truth.oracle_upper = b.interval.raw_upper;
    } catch (const Error& e) {
      if (truth.error.empty()) truth.error = e.what();
    }
    out.push_back(std::move(truth));
  }
  return out;
}

Experiment::Experiment(ScenarioConfig config)
    : config_((config.normalize(), std::move(config))),
      fixed_(generate_population(config_, 0)),
      fixed_truth_(target_truths(config_, fixed_)) {}

std::vector<ReplicationRecord> Experiment::replicate(std::uint64_t replication) const {
  std::optional<GeneratedPopulation> drawn;
  std::vector<TargetTruth> drawn_truth;
  if (config_.redraw_population) {
    drawn = generate_population(config_, replication);
    drawn_truth = target_truths(config_, *drawn);
  }
  const GeneratedPopulation& gen = drawn ? *drawn : fixed_;
  const std::vector<TargetTruth>& truths = drawn ? drawn_truth : fixed_truth_;

  Rng rng = Rng::substream(config_.seed, Rng::Stream::allocation, replication);
  const ObservedDataset data =
      observe(gen.population, complete_randomization(gen.population, config_.arm_sizes, rng));

  std::vector<ReplicationRecord> out;
  for (std::size_t i = 0; i < config_.targets.size(); ++i) {
    const Target& t = config_.targets[i];
    const TargetTruth& truth = truths[i];
    ReplicationRecord rec;
    rec.truth = truth.truth;
    rec.has_oracle = truth.has_oracle;
    rec.oracle_lower = truth.oracle_lower;
    rec.oracle_upper = truth.oracle_upper;
    if (!truth.has_truth) {
      rec.error = truth.error;
      out.push_back(std::move(rec));
      continue;
    }
    try {
      const BoundsEstimate est = estimate_bounds(data, t.factor, t.method, target_policy(t, gen));
      const ConfidenceInterval ci = imbens_manski_ci(est, config_.alpha);
      rec.ok = true;
      rec.raw_lower = est.bounds.interval.raw_lower;
      rec.raw_upper = est.bounds.interval.raw_upper;
      rec.lower = est.bounds.interval.lower;
      rec.upper = est.bounds.interval.upper;
      rec.se_lower = est.se_lower;
      rec.se_upper = est.se_upper;
      rec.ci_lower = ci.lower;
      rec.ci_upper = ci.upper;
    } catch (const Error& e) {
      rec.error = e.what();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

Summary summarize_values(const std::vector<double>& values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    s.mc_se = s.sd / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

CoverageReport monte_carlo(const ScenarioConfig& config, std::size_t replications) {
  if (replications < 1) throw Error(ErrorKind::invalid_input, "replications must be >= 1");
  const Experiment experiment(config);
  const std::size_t T = experiment.config().targets.size();

  std::vector<std::vector<ReplicationRecord>> records(T);
  for (std::size_t r = 0; r < replications; ++r) {
    std::vector<ReplicationRecord> row = experiment.replicate(r);
    for (std::size_t i = 0; i < T; ++i) records[i].push_back(std::move(row[i]));
  }

  CoverageReport report;
  report.replications = replications;
  report.seed = experiment.config().seed;
  for (std::size_t i = 0; i < T; ++i) {
    TargetReport tr;
    tr.label = experiment.config().targets[i].label();
    std::vector<double> cover, ci_cover, width, clo, chi, cilo, cihi, lo, hi, se_lo, se_hi, ci_width, bias_lo,
        bias_hi, truth;
    for (const ReplicationRecord& rec : records[i]) {
      if (!rec.ok) {
        ++tr.failed;
        if (tr.first_error.empty()) tr.first_error = rec.error;
        continue;
      }
      ++tr.completed;
      cover.push_back(rec.lower <= rec.truth && rec.truth <= rec.upper ? 1.0 : 0.0);
      ci_cover.push_back(rec.ci_lower <= rec.truth && rec.truth <= rec.ci_upper ? 1.0 : 0.0);
      width.push_back(rec.upper - rec.lower);
      clo.push_back(rec.lower);
      chi.push_back(rec.upper);
      cilo.push_back(rec.ci_lower);
      cihi.push_back(rec.ci_upper);
      lo.push_back(rec.raw_lower);
      hi.push_back(rec.raw_upper);
      se_lo.push_back(rec.se_lower);
      se_hi.push_back(rec.se_upper);
      ci_width.push_back(rec.ci_upper - rec.ci_lower);
      truth.push_back(rec.truth);
      if (rec.has_oracle) {
        bias_lo.push_back(rec.raw_lower - rec.oracle_lower);
        bias_hi.push_back(rec.raw_upper - rec.oracle_upper);
      }
    }
    tr.bounds_coverage = summarize_values(cover);
    tr.ci_coverage = summarize_values(ci_cover);
    tr.width = summarize_values(width);
    tr.lower = summarize_values(clo);
    tr.upper = summarize_values(chi);
    tr.ci_lower = summarize_values(cilo);
    tr.ci_upper = summarize_values(cihi);
    tr.raw_lower = summarize_values(lo);
    tr.raw_upper = summarize_values(hi);
    tr.se_lower = summarize_values(se_lo);
    tr.se_upper = summarize_values(se_hi);
    tr.ci_width = summarize_values(ci_width);
    tr.bias_lower = summarize_values(bias_lo);
    tr.bias_upper = summarize_values(bias_hi);
    tr.truth = summarize_values(truth);
    report.targets.push_back(std::move(tr));
  }
  return report;
}

}  // namespace fbounds
