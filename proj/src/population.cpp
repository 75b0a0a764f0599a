#include "fbounds/population.hpp"

#include <algorithm>
#include <string>

#include "fbounds/error.hpp"

namespace fbounds {

Population::Population(FactorialDesign design, std::size_t units,
                       std::vector<std::int8_t> uptake, std::vector<double> outcome)
    : design_(std::move(design)),
      units_(units),
      uptake_(std::move(uptake)),
      outcome_(std::move(outcome)) {
  if (units_ == 0) throw Error(ErrorKind::invalid_input, "population needs N >= 1");
  const std::size_t k = static_cast<std::size_t>(design_.factors());
  if (uptake_.size() != units_ * arms() * k) {
    throw Error(ErrorKind::invalid_input, "uptake table has " +
                                              std::to_string(uptake_.size()) +
                                              " entries, expected N*J*K = " +
                                              std::to_string(units_ * arms() * k));
  }
  if (outcome_.size() != units_ * arms()) {
    throw Error(ErrorKind::invalid_input, "outcome table has " +
                                              std::to_string(outcome_.size()) +
                                              " entries, expected N*J = " +
                                              std::to_string(units_ * arms()));
  }
  for (std::size_t n = 0; n < uptake_.size(); ++n) {
    if (uptake_[n] != 1 && uptake_[n] != -1) {
      throw Error(ErrorKind::invalid_input,
                  "uptake of unit " + std::to_string(n / (arms() * k)) + " is not +/-1");
    }
  }
  for (std::size_t n = 0; n < outcome_.size(); ++n) {
    if (!(outcome_[n] >= 0.0 && outcome_[n] <= 1.0)) {
      throw Error(ErrorKind::invalid_input,
                  "outcome of unit " + std::to_string(n / arms()) + " outside [0,1]");
    }
  }
}

double Population::mean_outcome(std::size_t arm) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < units_; ++i) sum += outcome(i, arm);
  return sum / static_cast<double>(units_);
}

std::vector<double> Population::mean_outcomes() const {
  std::vector<double> y(arms());
  for (std::size_t j = 0; j < arms(); ++j) y[j] = mean_outcome(j);
  return y;
}

double Population::mean_uptake(std::size_t arm, int k) const {
  long sum = 0;
  for (std::size_t i = 0; i < units_; ++i) sum += uptake(i, arm, k);
  return static_cast<double>(sum) / static_cast<double>(units_);
}

int Population::uptake_contrast(std::size_t unit, int k, std::size_t context) const {
  return uptake(unit, design_.arm_of(k, context, 1), k) -
         uptake(unit, design_.arm_of(k, context, -1), k);
}

int Population::joint_uptake_contrast(std::size_t unit, int k, int k2,
                                      std::size_t context) const {
  auto prod = [&](int lk, int lk2) {
    const std::size_t arm = design_.arm_of_joint(k, k2, context, lk, lk2);
    return uptake(unit, arm, k) * uptake(unit, arm, k2);
  };
  return prod(1, 1) - prod(-1, 1) - (prod(1, -1) - prod(-1, -1));
}

Population Population::cloned(std::size_t copies) const {
  if (copies == 0) throw Error(ErrorKind::invalid_input, "clone factor must be >= 1");
  const std::size_t row_d = arms() * static_cast<std::size_t>(factors());
  std::vector<std::int8_t> d;
  std::vector<double> y;
  d.reserve(uptake_.size() * copies);
  y.reserve(outcome_.size() * copies);
  for (std::size_t i = 0; i < units_; ++i) {
    for (std::size_t c = 0; c < copies; ++c) {
      d.insert(d.end(), uptake_.begin() + static_cast<std::ptrdiff_t>(i * row_d),
               uptake_.begin() + static_cast<std::ptrdiff_t>((i + 1) * row_d));
      y.insert(y.end(), outcome_.begin() + static_cast<std::ptrdiff_t>(i * arms()),
               outcome_.begin() + static_cast<std::ptrdiff_t>((i + 1) * arms()));
    }
  }
  return Population(design_, units_ * copies, std::move(d), std::move(y));
}

const char* to_string(ComplianceType type) {
  switch (type) {
    case ComplianceType::complier: return "complier";
    case ComplianceType::always_taker: return "always_taker";
    case ComplianceType::never_taker: return "never_taker";
    case ComplianceType::defier: return "defier";
  }
  return "unknown";
}

bool ComplianceProfile::constant_complier(std::size_t unit) const {
  for (std::size_t c = 0; c < contexts; ++c) {
    if (at(unit, c) != ComplianceType::complier) return false;
  }
  return true;
}

std::size_t ComplianceProfile::count(std::size_t context, ComplianceType type) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < units; ++i) n += at(i, context) == type;
  return n;
}

ComplianceProfile classify(const Population& pop, int k) {
  const FactorialDesign& design = pop.design();
  design.require_factor(k);
  ComplianceProfile profile;
  profile.factor = k;
  profile.units = pop.units();
  profile.contexts = design.contexts();
  profile.labels.resize(profile.units * profile.contexts);
  for (std::size_t i = 0; i < pop.units(); ++i) {
    for (std::size_t c = 0; c < design.contexts(); ++c) {
      const int plus = pop.uptake(i, design.arm_of(k, c, 1), k);
      const int minus = pop.uptake(i, design.arm_of(k, c, -1), k);
      ComplianceType type;
      if (plus == 1 && minus == -1) {
        type = ComplianceType::complier;
      } else if (plus == 1) {
        type = ComplianceType::always_taker;
      } else if (minus == -1) {
        type = ComplianceType::never_taker;
      } else {
        type = ComplianceType::defier;
      }
      profile.labels[i * profile.contexts + c] = type;
    }
  }
  return profile;
}

CheckResult check_conditional_monotonicity(const Population& pop, int k) {
  const ComplianceProfile profile = classify(pop, k);
  CheckResult result;
  for (std::size_t i = 0; i < profile.units; ++i) {
    for (std::size_t c = 0; c < profile.contexts; ++c) {
      if (profile.at(i, c) == ComplianceType::defier) result.violations.push_back({i, c, k});
    }
  }
  return result;
}

std::vector<std::size_t> check_least_compliant_profile(const Population& pop, int k) {
  const FactorialDesign& design = pop.design();
  design.require_factor(k);
  const std::size_t contexts = design.contexts();
  std::vector<bool> valid(contexts, true);
  std::vector<int> contrast(contexts);
  for (std::size_t i = 0; i < pop.units(); ++i) {
    for (std::size_t c = 0; c < contexts; ++c) contrast[c] = pop.uptake_contrast(i, k, c);
    const int lowest = *std::min_element(contrast.begin(), contrast.end());
    for (std::size_t c = 0; c < contexts; ++c) {
      if (contrast[c] != lowest) valid[c] = false;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < contexts; ++c) {
    if (valid[c]) out.push_back(c);
  }
  return out;
}

CheckResult check_weak_treatment_exclusion(const Population& pop, int k) {
  const FactorialDesign& design = pop.design();
  design.require_factor(k);
  CheckResult result;
  for (std::size_t i = 0; i < pop.units(); ++i) {
    for (std::size_t c = 0; c < design.contexts(); ++c) {
      const std::size_t plus = design.arm_of(k, c, 1);
      const std::size_t minus = design.arm_of(k, c, -1);
      if (pop.uptake(i, plus, k) != pop.uptake(i, minus, k)) continue;
      for (int j = 1; j <= pop.factors(); ++j) {
        if (pop.uptake(i, plus, j) != pop.uptake(i, minus, j)) {
          result.violations.push_back({i, c, j});
          break;
        }
      }
    }
  }
  return result;
}

namespace {

void require_pair(const Population& pop, int k, int k2) {
  pop.design().require_factor(k);
  pop.design().require_factor(k2);
  if (k == k2) {
    throw Error(ErrorKind::invalid_factor, "joint checks need two distinct factors");
  }
}

}  // namespace

std::vector<std::size_t> check_joint_least_compliant(const Population& pop, int k, int k2) {
  require_pair(pop, k, k2);
  const std::size_t contexts = pop.design().joint_contexts();
  std::vector<bool> valid(contexts, true);
  std::vector<int> contrast(contexts);
  for (std::size_t i = 0; i < pop.units(); ++i) {
    for (std::size_t c = 0; c < contexts; ++c) {
      contrast[c] = pop.joint_uptake_contrast(i, k, k2, c);
    }
    const int lowest = *std::min_element(contrast.begin(), contrast.end());
    for (std::size_t c = 0; c < contexts; ++c) {
      if (contrast[c] != lowest) valid[c] = false;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < contexts; ++c) {
    if (valid[c]) out.push_back(c);
  }
  return out;
}

CheckResult check_conditional_treatment_exclusion(const Population& pop, int k, int k2) {
  require_pair(pop, k, k2);
  const FactorialDesign& design = pop.design();
  CheckResult result;
  for (std::size_t i = 0; i < pop.units(); ++i) {
    for (std::size_t c = 0; c < design.joint_contexts(); ++c) {
      for (int level : {-1, 1}) {
        // D_k must not move with z_k' at fixed z_k, and symmetrically.
        if (pop.uptake(i, design.arm_of_joint(k, k2, c, level, 1), k) !=
            pop.uptake(i, design.arm_of_joint(k, k2, c, level, -1), k)) {
          result.violations.push_back({i, c, k});
        }
        if (pop.uptake(i, design.arm_of_joint(k, k2, c, 1, level), k2) !=
            pop.uptake(i, design.arm_of_joint(k, k2, c, -1, level), k2)) {
          result.violations.push_back({i, c, k2});
        }
      }
    }
  }
  auto last = std::unique(result.violations.begin(), result.violations.end());
  result.violations.erase(last, result.violations.end());
  return result;
}

GroupShares group_shares(const Population& pop, int k, std::size_t profile) {
  if (!check_conditional_monotonicity(pop, k).passed()) {
    throw Error(ErrorKind::monotonicity_violation,
                "factor " + std::to_string(k) + " has defiers");
  }
  const std::vector<std::size_t> valid = check_least_compliant_profile(pop, k);
  if (std::find(valid.begin(), valid.end(), profile) == valid.end()) {
    throw Error(ErrorKind::assumption_violation,
                "context " + std::to_string(profile) +
                    " is not a least compliant profile for factor " + std::to_string(k));
  }
  const ComplianceProfile types = classify(pop, k);
  const double n = static_cast<double>(pop.units());
  GroupShares shares;
  shares.factor = k;
  shares.profile = profile;
  std::size_t constant = 0;
  for (std::size_t i = 0; i < types.units; ++i) constant += types.constant_complier(i);
  shares.rho_c = static_cast<double>(constant) / n;
  for (std::size_t c = 0; c < types.contexts; ++c) {
    const std::size_t compliers = types.count(c, ComplianceType::complier);
    const std::size_t always = types.count(c, ComplianceType::always_taker);
    const std::size_t never = types.count(c, ComplianceType::never_taker);
    shares.rho_cc.push_back(static_cast<double>(compliers - constant) / n);
    shares.rho_cn.push_back(static_cast<double>(always + never) / n);
    shares.rho_a.push_back(static_cast<double>(always) / n);
    shares.rho_n.push_back(static_cast<double>(never) / n);
  }
  return shares;
}

std::vector<std::size_t> group_members(const Population& pop, int k,
                                       const GroupSelector& group) {
  const ComplianceProfile types = classify(pop, k);
  if (group.kind != GroupKind::constant_complier && group.context >= types.contexts) {
    throw Error(ErrorKind::invalid_input, "context index " + std::to_string(group.context) +
                                              " out of range");
  }
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < types.units; ++i) {
    const bool constant = types.constant_complier(i);
    bool in = false;
    switch (group.kind) {
      case GroupKind::constant_complier:
        in = constant;
        break;
      case GroupKind::conditional_complier:
        in = !constant && types.at(i, group.context) == ComplianceType::complier;
        break;
      case GroupKind::conditional_noncomplier:
        in = types.at(i, group.context) != ComplianceType::complier;
        break;
      case GroupKind::always_taker:
        in = types.at(i, group.context) == ComplianceType::always_taker;
        break;
      case GroupKind::never_taker:
        in = types.at(i, group.context) == ComplianceType::never_taker;
        break;
    }
    if (in) members.push_back(i);
  }
  return members;
}

std::vector<std::size_t> joint_constant_compliers(const Population& pop, int k, int k2) {
  require_pair(pop, k, k2);
  const ComplianceProfile a = classify(pop, k);
  const ComplianceProfile b = classify(pop, k2);
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < pop.units(); ++i) {
    if (a.constant_complier(i) && b.constant_complier(i)) members.push_back(i);
  }
  return members;
}

double mean_over(const Population& pop, const std::vector<std::size_t>& units,
                 std::size_t arm) {
  if (units.empty()) throw Error(ErrorKind::empty_group, "subgroup has no units");
  double sum = 0.0;
  for (std::size_t i : units) sum += pop.outcome(i, arm);
  return sum / static_cast<double>(units.size());
}

double subgroup_mean(const Population& pop, int k, const GroupSelector& group,
                     std::size_t arm) {
  return mean_over(pop, group_members(pop, k, group), arm);
}

}  // namespace fbounds
