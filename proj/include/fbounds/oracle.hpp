#pragma once

#include <cstddef>
#include <vector>

#include "fbounds/design.hpp"
#include "fbounds/population.hpp"

namespace fbounds {

/// An interval with its pre-clipping endpoints retained. Clipping to [-1,1]
/// is always the last step so nesting properties can be checked on the raw
/// endpoints.
struct Interval {
  double raw_lower = 0.0;
  double raw_upper = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool lower_clipped = false;
  bool upper_clipped = false;

  bool contains(double x) const { return lower <= x && x <= upper; }
  double raw_width() const { return raw_upper - raw_lower; }
  double width() const { return upper - lower; }
};

Interval make_interval(double raw_lower, double raw_upper);

struct Bounds {
  double center = 0.0;
  double half_width_lower = 0.0;
  double half_width_upper = 0.0;
  Interval interval;
};

Bounds make_bounds(double center, double half_width_lower, double half_width_upper);

/// Three-way split of the ITT at one context of Z_{-k}.
struct ContextITT {
  double gamma = 0.0;
  double constant_part = 0.0;
  double conditional_complier_part = 0.0;
  double conditional_noncomplier_part = 0.0;
  double nu_plus = 0.0;
  double nu_minus = 0.0;
  double nu = 0.0;
};

struct ITTReport {
  int factor = 1;
  std::vector<ContextITT> contexts;
};

/// nu^+_k, nu^-_k and nu_k per context, from population uptake means.
struct FirstStage {
  std::vector<double> nu_plus;
  std::vector<double> nu_minus;
  std::vector<double> nu;
};

FirstStage first_stage(const Population& pop, int k);

/// Requires conditional monotonicity on k.
ITTReport itt_report(const Population& pop, int k);

double true_delta_main(const Population& pop, int k);

/// Which constant compliers an interaction effect is defined over.
struct ComplierScope {
  enum class Kind { constant_on_factor, joint } kind = Kind::constant_on_factor;
  int factor = 1;
  int partner = 0;  // second factor for Kind::joint

  static ComplierScope on_factor(int k) { return {Kind::constant_on_factor, k, 0}; }
  static ComplierScope joint_on(int k, int k2) { return {Kind::joint, k, k2}; }
};

double true_delta_interaction(const Population& pop, const std::vector<int>& factors,
                              const ComplierScope& scope);

/// Least-compliant-profile bounds with the identified always/never-taker terms.
Bounds bounds_prop1(const Population& pop, int k, std::size_t profile);
/// Wald-style center with half-width (1 - nu~)/nu~.
Bounds bounds_remark1(const Population& pop, int k, std::size_t profile);
/// Bounds under weak treatment exclusion: symmetric half-width b~_k.
Bounds bounds_prop2(const Population& pop, int k, std::size_t profile);
/// Any interaction containing k, among constant compliers on k.
Bounds bounds_interaction_fk(const Population& pop, int k, const std::vector<int>& factors,
                             std::size_t profile);
/// Two-way interaction among joint constant compliers on {k, k'}.
Bounds bounds_joint_interaction(const Population& pop, int k, int k2,
                                std::size_t joint_profile);
/// Weak-exclusion bounds with a share t <= rho_{c_k} in place of nu_k(z~).
Bounds conservative_profile_bounds(const Population& pop, int k, double t);

/// nu_{k,k'} per joint context.
std::vector<double> joint_first_stage(const Population& pop, int k, int k2);

}  // namespace fbounds
