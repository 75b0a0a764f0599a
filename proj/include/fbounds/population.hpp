#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fbounds/design.hpp"

namespace fbounds {

/// Finite-population ground truth: uptake D_ik(z) and outcome Y_i(z) for
/// every unit and arm. Outcomes are indexed by assignment only, so the
/// exclusion restriction holds by construction.
class Population {
 public:
  /// `uptake` is laid out unit-major as [unit][arm][factor] with entries +/-1;
  /// `outcome` as [unit][arm] with entries in [0,1].
  Population(FactorialDesign design, std::size_t units, std::vector<std::int8_t> uptake,
             std::vector<double> outcome);

  const FactorialDesign& design() const { return design_; }
  int factors() const { return design_.factors(); }
  std::size_t arms() const { return design_.arms(); }
  std::size_t units() const { return units_; }

  int uptake(std::size_t unit, std::size_t arm, int k) const {
    return uptake_[(unit * arms() + arm) * static_cast<std::size_t>(factors()) +
                   static_cast<std::size_t>(k - 1)];
  }
  double outcome(std::size_t unit, std::size_t arm) const {
    return outcome_[unit * arms() + arm];
  }

  const std::vector<std::int8_t>& uptake_table() const { return uptake_; }
  const std::vector<double>& outcome_table() const { return outcome_; }

  /// Ybar(z) for one arm, and the J-vector Y.
  double mean_outcome(std::size_t arm) const;
  std::vector<double> mean_outcomes() const;
  /// Dbar_k(z) on the +/-1 scale.
  double mean_uptake(std::size_t arm, int k) const;

  /// D_ik(z_{-k}, +) - D_ik(z_{-k}, -), one of {-2, 0, 2}.
  int uptake_contrast(std::size_t unit, int k, std::size_t context) const;
  /// The four-term interactive uptake contrast of D_{i,k}D_{i,k'} at a joint context.
  int joint_uptake_contrast(std::size_t unit, int k, int k2, std::size_t context) const;

  /// Population consisting of `copies` clones of every unit, in unit-major order.
  Population cloned(std::size_t copies) const;

 private:
  FactorialDesign design_;
  std::size_t units_;
  std::vector<std::int8_t> uptake_;
  std::vector<double> outcome_;
};

enum class ComplianceType { complier, always_taker, never_taker, defier };

const char* to_string(ComplianceType type);

/// Compliance label for every (unit, context of Z_{-k}) on one factor.
struct ComplianceProfile {
  int factor = 1;
  std::size_t units = 0;
  std::size_t contexts = 0;
  std::vector<ComplianceType> labels;

  ComplianceType at(std::size_t unit, std::size_t context) const {
    return labels[unit * contexts + context];
  }
  /// C_ik: complier in every context.
  bool constant_complier(std::size_t unit) const;
  std::size_t count(std::size_t context, ComplianceType type) const;
};

ComplianceProfile classify(const Population& pop, int k);

/// A (unit, context) pair failing a check. `factor` names the factor whose
/// uptake moved when a check covers two factors; 0 otherwise.
struct Violation {
  std::size_t unit = 0;
  std::size_t context = 0;
  int factor = 0;

  bool operator==(const Violation&) const = default;
};

struct CheckResult {
  std::vector<Violation> violations;

  bool passed() const { return violations.empty(); }
};

CheckResult check_conditional_monotonicity(const Population& pop, int k);
/// Every context index z~ of Z_{-k} satisfying the least-compliant-profile
/// inequality for all units; empty if none does.
std::vector<std::size_t> check_least_compliant_profile(const Population& pop, int k);
CheckResult check_weak_treatment_exclusion(const Population& pop, int k);
/// Valid joint profiles z~_{-(k,k')}, as indices into the joint context grid.
std::vector<std::size_t> check_joint_least_compliant(const Population& pop, int k, int k2);
CheckResult check_conditional_treatment_exclusion(const Population& pop, int k, int k2);

struct GroupShares {
  int factor = 1;
  std::size_t profile = 0;
  double rho_c = 0.0;
  std::vector<double> rho_cc;
  std::vector<double> rho_cn;
  std::vector<double> rho_a;
  std::vector<double> rho_n;
};

/// Requires conditional monotonicity and a valid least-compliant profile.
GroupShares group_shares(const Population& pop, int k, std::size_t profile);

enum class GroupKind {
  constant_complier,
  conditional_complier,
  conditional_noncomplier,
  always_taker,
  never_taker,
};

struct GroupSelector {
  GroupKind kind = GroupKind::constant_complier;
  std::size_t context = 0;  // ignored for constant compliers
};

std::vector<std::size_t> group_members(const Population& pop, int k,
                                       const GroupSelector& group);
/// Units that are constant compliers on both k and k'.
std::vector<std::size_t> joint_constant_compliers(const Population& pop, int k, int k2);

/// Mean of Y_i(z) over the selected group; throws empty_group if it has no units.
double subgroup_mean(const Population& pop, int k, const GroupSelector& group,
                     std::size_t arm);
double mean_over(const Population& pop, const std::vector<std::size_t>& units,
                 std::size_t arm);

}  // namespace fbounds
