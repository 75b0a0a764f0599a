#include "fbounds/oracle.hpp"

#include <algorithm>
#include <string>

#include "fbounds/error.hpp"

namespace fbounds {

Interval make_interval(double raw_lower, double raw_upper) {
  Interval out;
  out.raw_lower = raw_lower;
  out.raw_upper = raw_upper;
  out.lower = std::clamp(raw_lower, -1.0, 1.0);
  out.upper = std::clamp(raw_upper, -1.0, 1.0);
  out.lower_clipped = out.lower != raw_lower;
  out.upper_clipped = out.upper != raw_upper;
  return out;
}

Bounds make_bounds(double center, double half_width_lower, double half_width_upper) {
  Bounds b;
  b.center = center;
  b.half_width_lower = half_width_lower;
  b.half_width_upper = half_width_upper;
  b.interval = make_interval(center - half_width_lower, center + half_width_upper);
  return b;
}

namespace {

std::string factor_name(int k) { return "factor " + std::to_string(k); }

void require_monotonicity(const Population& pop, int k) {
  const CheckResult check = check_conditional_monotonicity(pop, k);
  if (!check.passed()) {
    const Violation& v = check.violations.front();
    throw Error(ErrorKind::monotonicity_violation,
                factor_name(k) + ": unit " + std::to_string(v.unit) +
                    " is a defier at context " + std::to_string(v.context));
  }
}

void require_profile(const Population& pop, int k, std::size_t profile) {
  const std::vector<std::size_t> valid = check_least_compliant_profile(pop, k);
  if (std::find(valid.begin(), valid.end(), profile) == valid.end()) {
    throw Error(ErrorKind::assumption_violation,
                factor_name(k) + ": context " + std::to_string(profile) +
                    " is not a least compliant profile");
  }
}

void require_weak_exclusion(const Population& pop, int k) {
  const CheckResult check = check_weak_treatment_exclusion(pop, k);
  if (!check.passed()) {
    const Violation& v = check.violations.front();
    throw Error(ErrorKind::assumption_violation,
                factor_name(k) + ": weak treatment exclusion fails for unit " +
                    std::to_string(v.unit) + " at context " + std::to_string(v.context));
  }
}

double require_positive_share(double share, int k) {
  if (!(share > 0.0)) {
    throw Error(ErrorKind::no_compliers,
                factor_name(k) + ": first stage at the least compliant profile is " +
                    std::to_string(share));
  }
  return share;
}

double scale(const Population& pop) {
  return static_cast<double>(pop.design().contexts());
}

double contrast_of_group(const Population& pop, const std::vector<std::size_t>& units,
                         const ContrastVector& g) {
  double sum = 0.0;
  for (std::size_t j = 0; j < pop.arms(); ++j) sum += g[j] * mean_over(pop, units, j);
  return sum;
}

}  // namespace

FirstStage first_stage(const Population& pop, int k) {
  const FactorialDesign& design = pop.design();
  design.require_factor(k);
  FirstStage fs;
  for (std::size_t c = 0; c < design.contexts(); ++c) {
    const double plus = pop.mean_uptake(design.arm_of(k, c, 1), k);
    const double minus = pop.mean_uptake(design.arm_of(k, c, -1), k);
    fs.nu_plus.push_back(0.5 * (plus + 1.0));
    fs.nu_minus.push_back(0.5 * (minus + 1.0));
    fs.nu.push_back(0.5 * (plus - minus));
  }
  return fs;
}

ITTReport itt_report(const Population& pop, int k) {
  require_monotonicity(pop, k);
  const FactorialDesign& design = pop.design();
  const ComplianceProfile types = classify(pop, k);
  const FirstStage fs = first_stage(pop, k);
  const double n = static_cast<double>(pop.units());

  ITTReport report;
  report.factor = k;
  for (std::size_t c = 0; c < design.contexts(); ++c) {
    const std::size_t plus = design.arm_of(k, c, 1);
    const std::size_t minus = design.arm_of(k, c, -1);
    ContextITT row;
    row.gamma = pop.mean_outcome(plus) - pop.mean_outcome(minus);
    for (std::size_t i = 0; i < pop.units(); ++i) {
      const double effect = (pop.outcome(i, plus) - pop.outcome(i, minus)) / n;
      if (types.constant_complier(i)) {
        row.constant_part += effect;
      } else if (types.at(i, c) == ComplianceType::complier) {
        row.conditional_complier_part += effect;
      } else {
        row.conditional_noncomplier_part += effect;
      }
    }
    row.nu_plus = fs.nu_plus[c];
    row.nu_minus = fs.nu_minus[c];
    row.nu = fs.nu[c];
    report.contexts.push_back(row);
  }
  return report;
}

double true_delta_main(const Population& pop, int k) {
  pop.design().require_factor(k);
  const std::vector<std::size_t> compliers =
      group_members(pop, k, {GroupKind::constant_complier, 0});
  if (compliers.empty()) {
    throw Error(ErrorKind::no_compliers, factor_name(k) + " has no constant compliers");
  }
  return contrast_of_group(pop, compliers, main_effect_contrast(pop.design(), k)) /
         scale(pop);
}

double true_delta_interaction(const Population& pop, const std::vector<int>& factors,
                              const ComplierScope& scope) {
  const ContrastVector g = interaction_contrast(pop.design(), factors);
  std::vector<std::size_t> members;
  if (scope.kind == ComplierScope::Kind::constant_on_factor) {
    pop.design().require_factor(scope.factor);
    members = group_members(pop, scope.factor, {GroupKind::constant_complier, 0});
  } else {
    members = joint_constant_compliers(pop, scope.factor, scope.partner);
  }
  if (members.empty()) {
    throw Error(ErrorKind::no_compliers, "interaction scope has no constant compliers");
  }
  return contrast_of_group(pop, members, g) / scale(pop);
}

Bounds bounds_prop1(const Population& pop, int k, std::size_t profile) {
  require_monotonicity(pop, k);
  require_profile(pop, k, profile);
  const FactorialDesign& design = pop.design();
  const FirstStage fs = first_stage(pop, k);
  const double nu_tilde = require_positive_share(fs.nu[profile], k);
  const double gy = dot(main_effect_contrast(design, k), pop.mean_outcomes());

  double identified = gy;
  double sum_nu = 0.0;
  double sum_always = 0.0;
  double sum_never = 0.0;
  for (std::size_t c = 0; c < design.contexts(); ++c) {
    const double never_share = 1.0 - fs.nu_plus[c];
    const double always_share = fs.nu_minus[c];
    // A zero weight is an empty group; its total contribution is zero.
    if (never_share > 0.0) {
      identified -= never_share * subgroup_mean(pop, k, {GroupKind::never_taker, c},
                                                design.arm_of(k, c, 1));
    }
    if (always_share > 0.0) {
      identified += always_share * subgroup_mean(pop, k, {GroupKind::always_taker, c},
                                                 design.arm_of(k, c, -1));
    }
    sum_nu += fs.nu[c] - nu_tilde;
    sum_always += always_share;
    sum_never += never_share;
  }
  const double denom = scale(pop) * nu_tilde;
  return make_bounds(identified / denom, (sum_nu + sum_always) / denom,
                     (sum_nu + sum_never) / denom);
}

Bounds bounds_remark1(const Population& pop, int k, std::size_t profile) {
  require_monotonicity(pop, k);
  require_profile(pop, k, profile);
  const FirstStage fs = first_stage(pop, k);
  const double nu_tilde = require_positive_share(fs.nu[profile], k);
  const double gy = dot(main_effect_contrast(pop.design(), k), pop.mean_outcomes());
  const double half = (1.0 - nu_tilde) / nu_tilde;
  return make_bounds(gy / (scale(pop) * nu_tilde), half, half);
}

namespace {

Bounds weak_exclusion_bounds(const Population& pop, int k, const ContrastVector& g,
                             double share) {
  const FirstStage fs = first_stage(pop, k);
  double excess = 0.0;
  for (double nu : fs.nu) excess += nu - share;
  const double denom = scale(pop) * share;
  const double half = excess / denom;
  return make_bounds(dot(g, pop.mean_outcomes()) / denom, half, half);
}

}  // namespace

Bounds bounds_prop2(const Population& pop, int k, std::size_t profile) {
  require_monotonicity(pop, k);
  require_profile(pop, k, profile);
  require_weak_exclusion(pop, k);
  const double nu_tilde = require_positive_share(first_stage(pop, k).nu[profile], k);
  return weak_exclusion_bounds(pop, k, main_effect_contrast(pop.design(), k), nu_tilde);
}

Bounds bounds_interaction_fk(const Population& pop, int k, const std::vector<int>& factors,
                             std::size_t profile) {
  if (std::find(factors.begin(), factors.end(), k) == factors.end()) {
    throw Error(ErrorKind::invalid_factor,
                "interaction must contain the complier factor " + std::to_string(k));
  }
  require_monotonicity(pop, k);
  require_profile(pop, k, profile);
  require_weak_exclusion(pop, k);
  const double nu_tilde = require_positive_share(first_stage(pop, k).nu[profile], k);
  return weak_exclusion_bounds(pop, k, interaction_contrast(pop.design(), factors),
                               nu_tilde);
}

std::vector<double> joint_first_stage(const Population& pop, int k, int k2) {
  const FactorialDesign& design = pop.design();
  design.require_factor(k);
  design.require_factor(k2);
  if (k == k2) throw Error(ErrorKind::invalid_factor, "joint effects need two factors");
  std::vector<double> nu;
  for (std::size_t c = 0; c < design.joint_contexts(); ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < pop.units(); ++i) {
      sum += pop.joint_uptake_contrast(i, k, k2, c);
    }
    nu.push_back(sum / (4.0 * static_cast<double>(pop.units())));
  }
  return nu;
}

Bounds bounds_joint_interaction(const Population& pop, int k, int k2,
                                std::size_t joint_profile) {
  const FactorialDesign& design = pop.design();
  for (int f : {k, k2}) {
    require_monotonicity(pop, f);
    require_weak_exclusion(pop, f);
  }
  const std::vector<std::size_t> valid = check_joint_least_compliant(pop, k, k2);
  if (std::find(valid.begin(), valid.end(), joint_profile) == valid.end()) {
    throw Error(ErrorKind::assumption_violation,
                "joint context " + std::to_string(joint_profile) +
                    " is not a joint least compliant profile");
  }
  const CheckResult exclusion = check_conditional_treatment_exclusion(pop, k, k2);
  if (!exclusion.passed()) {
    throw Error(ErrorKind::assumption_violation,
                "conditional treatment exclusion fails for unit " +
                    std::to_string(exclusion.violations.front().unit));
  }
  const std::vector<double> nu = joint_first_stage(pop, k, k2);
  const double nu_tilde = nu[joint_profile];
  if (!(nu_tilde > 0.0)) {
    throw Error(ErrorKind::no_compliers, "no joint constant compliers");
  }
  const ContrastVector g = interaction_contrast(design, {k, k2});
  std::vector<double> joint_uptake(design.arms());
  for (std::size_t j = 0; j < design.arms(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < pop.units(); ++i) {
      sum += pop.uptake(i, j, k) * pop.uptake(i, j, k2);
    }
    joint_uptake[j] = sum / static_cast<double>(pop.units());
  }
  const double gd = dot(g, joint_uptake) / static_cast<double>(design.arms());
  const double half = (gd - nu_tilde) / nu_tilde;
  return make_bounds(dot(g, pop.mean_outcomes()) / (scale(pop) * nu_tilde), half, half);
}

Bounds conservative_profile_bounds(const Population& pop, int k, double t) {
  if (!(t > 0.0)) {
    throw Error(ErrorKind::invalid_share, "share t must be positive, got " + std::to_string(t));
  }
  require_monotonicity(pop, k);
  require_weak_exclusion(pop, k);
  const std::vector<std::size_t> valid = check_least_compliant_profile(pop, k);
  if (valid.empty()) {
    throw Error(ErrorKind::assumption_violation,
                factor_name(k) + " has no least compliant profile");
  }
  const double rho = first_stage(pop, k).nu[valid.front()];
  if (t > rho + 1e-12) {
    throw Error(ErrorKind::precondition, "share t = " + std::to_string(t) +
                                             " exceeds the constant complier share " +
                                             std::to_string(rho));
  }
  return weak_exclusion_bounds(pop, k, main_effect_contrast(pop.design(), k), t);
}

}  // namespace fbounds
