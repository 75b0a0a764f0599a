#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fbounds/dataset.hpp"
#include "fbounds/design.hpp"
#include "fbounds/oracle.hpp"

namespace fbounds {

/// Sample moments of one arm. Variances and covariances use n-1.
struct ArmSummary {
  std::size_t n = 0;
  double mean_y = 0.0;
  double var_y = 0.0;
  std::vector<double> mean_d;  // per factor, +/-1 scale
  std::vector<double> var_d;
  std::vector<double> cov_yd;
  std::vector<double> cov_dd;  // K x K, row-major

};

/// Throws insufficient_data naming the first arm with fewer than two rows.
std::vector<ArmSummary> summarize(const ObservedDataset& data);

struct Method {
  enum class Kind { prop1, remark1, prop2, interaction_fk, joint };

  Kind kind = Kind::prop2;
  std::vector<int> factors;  // interaction_fk: factors of the interaction
  int partner = 0;           // joint: the second factor k'

  static Method prop1() { return {Kind::prop1, {}, 0}; }
  static Method remark1() { return {Kind::remark1, {}, 0}; }
  static Method prop2() { return {Kind::prop2, {}, 0}; }
  static Method interaction(std::vector<int> factors) {
    return {Kind::interaction_fk, std::move(factors), 0};
  }
  static Method joint(int partner) { return {Kind::joint, {}, partner}; }

  /// "prop1", "remark1", "prop2", "interaction:1+2", "joint:2".
  std::string name() const;
  static Method parse(const std::string& text);
};

/// How the least compliant profile z~ is chosen.
struct ProfilePolicy {
  enum class Kind { declared, min } kind = Kind::min;
  Assignment context;  // declared: levels of the remaining factors

  static ProfilePolicy declared(Assignment context) {
    return {Kind::declared, std::move(context)};
  }
  static ProfilePolicy minimum() { return {Kind::min, {}}; }

  std::string name() const { return kind == Kind::declared ? "declared" : "min"; }
};

struct ProfileChoice {
  std::size_t context = 0;
  double share = 0.0;  // t^_k, the minimized first stage
};

/// nu^_k per context of Z_{-k}, on the same 1/2 scale as the population nu_k.
std::vector<double> estimated_first_stage(const ObservedDataset& data, int k);
/// nu^_{k,k'} per joint context.
std::vector<double> estimated_joint_first_stage(const ObservedDataset& data, int k, int k2);

/// Context minimizing nu^_k; ties go to the lowest canonical index.
ProfileChoice choose_profile_min(const ObservedDataset& data, int k);
ProfileChoice choose_joint_profile_min(const ObservedDataset& data, int k, int k2);

struct BoundsEstimate {
  Method method;
  int factor = 1;
  std::vector<int> contexts;  // factors of the effect
  std::vector<double> nu_hat;
  Bounds bounds;
  double se_lower = 0.0;
  double se_upper = 0.0;
  std::string profile_policy;
  std::size_t profile_index = 0;
  Assignment profile_context;
};

BoundsEstimate estimate_bounds(const ObservedDataset& data, int k, const Method& method,
                               const ProfilePolicy& policy);

struct EndpointErrors {
  double lower = 0.0;
  double upper = 0.0;
};

/// Delta-method standard errors of the raw endpoints, conditioning on the
/// chosen profile context (joint context for Method::Kind::joint).
EndpointErrors endpoint_ses(const ObservedDataset& data, int k, const Method& method,
                            std::size_t profile);

struct ConfidenceInterval {
  double level = 0.95;
  double lower = 0.0;
  double upper = 0.0;
  double raw_lower = 0.0;
  double raw_upper = 0.0;
  double critical_value = 0.0;
};

/// Solves Phi(C + width / max(se)) - Phi(-C) = 1 - alpha by bisection.
double imbens_manski_critical_value(double width, double max_se, double alpha);
ConfidenceInterval imbens_manski_ci(double raw_lower, double raw_upper, double se_lower,
                                    double se_upper, double alpha);
ConfidenceInterval imbens_manski_ci(const BoundsEstimate& est, double alpha);

struct WaldEstimate {
  double estimate = 0.0;
  double se = 0.0;
};

/// Marginal ITT on Y over marginal ITT on uptake of k. Only a point estimate
/// of the complier effect under strong treatment exclusion.
WaldEstimate wald_reference(const ObservedDataset& data, int k);

namespace detail {

/// f(theta) = (a.theta + a0) / (d.theta + d0) + shift, with theta the stacked
/// per-arm means (Y, X, W). Every endpoint estimator has this form.
struct LinearRatio {
  std::vector<double> numerator;
  double numerator_offset = 0.0;
  std::vector<double> denominator;
  double denominator_offset = 0.0;
  double shift = 0.0;

  double value(std::span<const double> theta) const;
  std::vector<double> gradient(std::span<const double> theta) const;
};

inline constexpr std::size_t kMomentsPerArm = 3;

struct EndpointModel {
  LinearRatio center;
  LinearRatio lower;
  LinearRatio upper;
};

/// Endpoint functions for a method at a fixed profile, over a K-factor design.
EndpointModel endpoint_model(const FactorialDesign& design, int k, const Method& method,
                             std::size_t profile);

/// Per-arm means and plug-in (1/n) covariances of (Y, X, W) for a method.
struct ArmMoments {
  std::vector<std::size_t> n;
  std::vector<double> theta;       // 3 per arm
  std::vector<double> covariance;  // 9 per arm, row-major
};

ArmMoments arm_moments(const ObservedDataset& data, int k, const Method& method);

double delta_method_se(const LinearRatio& f, const ArmMoments& moments);

}  // namespace detail

}  // namespace fbounds
