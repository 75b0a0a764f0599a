#include "fbounds/estimate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>

#include "fbounds/error.hpp"
#include "fbounds/normal.hpp"

namespace fbounds {

namespace {

constexpr std::size_t kY = 0;
constexpr std::size_t kX = 1;
constexpr std::size_t kW = 2;

std::size_t slot(std::size_t arm, std::size_t var) {
  return arm * detail::kMomentsPerArm + var;
}

void require_arm_sizes(const ObservedDataset& data) {
  const std::vector<std::size_t> counts = data.arm_counts();
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] < 2) {
      std::ostringstream msg;
      msg << "arm " << j << " (z = (";
      const Assignment z = data.design.assignment(j);
      for (std::size_t i = 0; i < z.size(); ++i) msg << (i ? "," : "") << z[i];
      msg << ")) has " << counts[j] << " rows; at least 2 are required";
      throw Error(ErrorKind::insufficient_data, msg.str());
    }
  }
}

std::string format_table(const std::vector<double>& values) {
  std::ostringstream out;
  out << "[";
  for (std::size_t c = 0; c < values.size(); ++c) out << (c ? ", " : "") << values[c];
  out << "]";
  return out.str();
}

void require_method(const FactorialDesign& design, int k, const Method& method) {
  design.require_factor(k);
  if (method.kind == Method::Kind::interaction_fk) {
    if (std::find(method.factors.begin(), method.factors.end(), k) == method.factors.end()) {
      throw Error(ErrorKind::invalid_factor,
                  "interaction must contain the complier factor " + std::to_string(k));
    }
    interaction_contrast(design, method.factors);
  }
  if (method.kind == Method::Kind::joint) {
    design.require_factor(method.partner);
    if (method.partner == k) {
      throw Error(ErrorKind::invalid_factor, "joint interaction needs two distinct factors");
    }
  }
}

// Arm means of the uptake variable, D_k or D_k * D_k'.
std::vector<double> arm_uptake_means(const ObservedDataset& data, int k, int k2) {
  std::vector<double> sum(data.design.arms(), 0.0);
  std::vector<std::size_t> n(data.design.arms(), 0);
  for (const Observation& row : data.rows) {
    int x = row.uptake[static_cast<std::size_t>(k - 1)];
    if (k2 > 0) x *= row.uptake[static_cast<std::size_t>(k2 - 1)];
    sum[row.arm] += x;
    ++n[row.arm];
  }
  for (std::size_t j = 0; j < sum.size(); ++j) {
    if (n[j] == 0) {
      throw Error(ErrorKind::insufficient_data, "arm " + std::to_string(j) + " is empty");
    }
    sum[j] /= static_cast<double>(n[j]);
  }
  return sum;
}

}  // namespace

std::vector<ArmSummary> summarize(const ObservedDataset& data) {
  require_arm_sizes(data);
  const std::size_t arms = data.design.arms();
  const std::size_t kf = static_cast<std::size_t>(data.design.factors());
  std::vector<ArmSummary> out(arms);
  for (ArmSummary& s : out) {
    s.mean_d.assign(kf, 0.0);
    s.var_d.assign(kf, 0.0);
    s.cov_yd.assign(kf, 0.0);
    s.cov_dd.assign(kf * kf, 0.0);
  }
  for (const Observation& row : data.rows) {
    ArmSummary& s = out[row.arm];
    ++s.n;
    s.mean_y += row.outcome;
    for (std::size_t f = 0; f < kf; ++f) s.mean_d[f] += row.uptake[f];
  }
  for (ArmSummary& s : out) {
    const double n = static_cast<double>(s.n);
    s.mean_y /= n;
    for (double& m : s.mean_d) m /= n;
  }
  for (const Observation& row : data.rows) {
    ArmSummary& s = out[row.arm];
    const double dy = row.outcome - s.mean_y;
    s.var_y += dy * dy;
    for (std::size_t f = 0; f < kf; ++f) {
      const double df = row.uptake[f] - s.mean_d[f];
      s.cov_yd[f] += dy * df;
      for (std::size_t g = 0; g < kf; ++g) {
        s.cov_dd[f * kf + g] += df * (row.uptake[g] - s.mean_d[g]);
      }
    }
  }
  for (ArmSummary& s : out) {
    const double dof = static_cast<double>(s.n - 1);
    s.var_y /= dof;
    for (std::size_t f = 0; f < kf; ++f) {
      s.cov_yd[f] /= dof;
      for (std::size_t g = 0; g < kf; ++g) s.cov_dd[f * kf + g] /= dof;
      s.var_d[f] = s.cov_dd[f * kf + f];
    }
  }
  return out;
}

std::string Method::name() const {
  switch (kind) {
    case Kind::prop1: return "prop1";
    case Kind::remark1: return "remark1";
    case Kind::prop2: return "prop2";
    case Kind::interaction_fk: {
      std::string out = "interaction:";
      for (std::size_t i = 0; i < factors.size(); ++i) {
        out += (i ? "+" : "") + std::to_string(factors[i]);
      }
      return out;
    }
    case Kind::joint: return "joint:" + std::to_string(partner);
  }
  return "unknown";
}

Method Method::parse(const std::string& text) {
  auto parse_int = [&](const std::string& s) {
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) {
      throw Error(ErrorKind::invalid_input, "bad factor index '" + s + "' in method '" + text + "'");
    }
    return value;
  };
  if (text == "prop1") return prop1();
  if (text == "remark1") return remark1();
  if (text == "prop2") return prop2();
  if (text.rfind("interaction:", 0) == 0) {
    std::vector<int> factors;
    std::stringstream ss(text.substr(12));
    std::string item;
    while (std::getline(ss, item, '+')) factors.push_back(parse_int(item));
    if (factors.empty()) throw Error(ErrorKind::invalid_input, "interaction needs factors");
    return interaction(std::move(factors));
  }
  if (text.rfind("joint:", 0) == 0) return joint(parse_int(text.substr(6)));
  throw Error(ErrorKind::invalid_input, "unknown method '" + text + "'");
}

std::vector<double> estimated_first_stage(const ObservedDataset& data, int k) {
  data.design.require_factor(k);
  const std::vector<double> d = arm_uptake_means(data, k, 0);
  std::vector<double> nu;
  for (std::size_t c = 0; c < data.design.contexts(); ++c) {
    nu.push_back(0.5 * (d[data.design.arm_of(k, c, 1)] - d[data.design.arm_of(k, c, -1)]));
  }
  return nu;
}

std::vector<double> estimated_joint_first_stage(const ObservedDataset& data, int k, int k2) {
  require_method(data.design, k, Method::joint(k2));
  const std::vector<double> d = arm_uptake_means(data, k, k2);
  std::vector<double> nu;
  for (std::size_t c = 0; c < data.design.joint_contexts(); ++c) {
    auto at = [&](int a, int b) { return d[data.design.arm_of_joint(k, k2, c, a, b)]; };
    nu.push_back(0.25 * (at(1, 1) - at(-1, 1) - (at(1, -1) - at(-1, -1))));
  }
  return nu;
}

namespace {

ProfileChoice argmin(const std::vector<double>& nu) {
  ProfileChoice choice;
  choice.context = static_cast<std::size_t>(std::min_element(nu.begin(), nu.end()) - nu.begin());
  choice.share = nu[choice.context];
  return choice;
}

}  // namespace

ProfileChoice choose_profile_min(const ObservedDataset& data, int k) {
  return argmin(estimated_first_stage(data, k));
}

ProfileChoice choose_joint_profile_min(const ObservedDataset& data, int k, int k2) {
  return argmin(estimated_joint_first_stage(data, k, k2));
}

namespace detail {

double LinearRatio::value(std::span<const double> theta) const {
  double num = numerator_offset;
  double den = denominator_offset;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    num += numerator[i] * theta[i];
    den += denominator[i] * theta[i];
  }
  return num / den + shift;
}

std::vector<double> LinearRatio::gradient(std::span<const double> theta) const {
  double num = numerator_offset;
  double den = denominator_offset;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    num += numerator[i] * theta[i];
    den += denominator[i] * theta[i];
  }
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    grad[i] = numerator[i] / den - num * denominator[i] / (den * den);
  }
  return grad;
}

EndpointModel endpoint_model(const FactorialDesign& design, int k, const Method& method,
                             std::size_t profile) {
  require_method(design, k, method);
  const std::size_t size = design.arms() * kMomentsPerArm;
  const double scale = static_cast<double>(design.contexts());
  const ContrastVector gk = main_effect_contrast(design, k);

  LinearRatio base;
  base.numerator.assign(size, 0.0);
  base.denominator.assign(size, 0.0);

  ContrastVector gy = gk;
  if (method.kind == Method::Kind::interaction_fk) {
    gy = interaction_contrast(design, method.factors);
  } else if (method.kind == Method::Kind::joint) {
    gy = interaction_contrast(design, {k, method.partner});
  }
  for (std::size_t j = 0; j < design.arms(); ++j) base.numerator[slot(j, kY)] = gy[j];

  // Denominator: 2^{K-1} times the first stage at the profile.
  if (method.kind == Method::Kind::joint) {
    if (profile >= design.joint_contexts()) {
      throw Error(ErrorKind::invalid_input, "joint profile index out of range");
    }
    for (int a : {-1, 1}) {
      for (int b : {-1, 1}) {
        const std::size_t arm = design.arm_of_joint(k, method.partner, profile, a, b);
        base.denominator[slot(arm, kX)] = scale * 0.25 * a * b;
      }
    }
  } else {
    if (profile >= design.contexts()) {
      throw Error(ErrorKind::invalid_input, "profile index out of range");
    }
    base.denominator[slot(design.arm_of(k, profile, 1), kX)] = 0.5 * scale;
    base.denominator[slot(design.arm_of(k, profile, -1), kX)] = -0.5 * scale;
  }

  EndpointModel model;
  model.center = base;
  model.lower = base;
  model.upper = base;
  model.lower.shift = 1.0;
  model.upper.shift = -1.0;

  switch (method.kind) {
    case Method::Kind::remark1:
      model.lower.numerator_offset = -scale;
      model.upper.numerator_offset = scale;
      break;
    case Method::Kind::prop2:
    case Method::Kind::interaction_fk:
    case Method::Kind::joint: {
      // Sum of first stages over contexts: g.x / 2, with g the main-effect
      // contrast of k, or the k∘k' contrast on the product uptake for joint.
      const ContrastVector& gx = method.kind == Method::Kind::joint ? gy : gk;
      for (std::size_t j = 0; j < design.arms(); ++j) {
        model.lower.numerator[slot(j, kX)] = -0.5 * gx[j];
        model.upper.numerator[slot(j, kX)] = 0.5 * gx[j];
      }
      break;
    }
    case Method::Kind::prop1: {
      // W is Y * 1(D_k = -1) on z_k = + arms and Y * 1(D_k = +1) on z_k = - arms.
      for (std::size_t j = 0; j < design.arms(); ++j) {
        const bool plus = gk[j] > 0;
        for (LinearRatio* f : {&model.center, &model.lower, &model.upper}) {
          f->numerator[slot(j, kW)] = -gk[j];
        }
        // lower: - sum nu - sum nu^-, upper: + sum nu + sum (1 - nu^+)
        model.lower.numerator[slot(j, kX)] = plus ? -0.5 : 0.0;
        model.upper.numerator[slot(j, kX)] = plus ? 0.0 : -0.5;
      }
      model.lower.numerator_offset = -0.5 * scale;
      model.upper.numerator_offset = 0.5 * scale;
      break;
    }
  }
  return model;
}

ArmMoments arm_moments(const ObservedDataset& data, int k, const Method& method) {
  require_arm_sizes(data);
  const FactorialDesign& design = data.design;
  const std::size_t arms = design.arms();
  const int k2 = method.kind == Method::Kind::joint ? method.partner : 0;

  auto values = [&](const Observation& row) {
    const int dk = row.uptake[static_cast<std::size_t>(k - 1)];
    const int x = k2 > 0 ? dk * row.uptake[static_cast<std::size_t>(k2 - 1)] : dk;
    const bool noncompliant = dk == -design.level(row.arm, k);
    return std::array<double, kMomentsPerArm>{row.outcome, static_cast<double>(x),
                                              noncompliant ? row.outcome : 0.0};
  };

  ArmMoments m;
  m.n.assign(arms, 0);
  m.theta.assign(arms * kMomentsPerArm, 0.0);
  m.covariance.assign(arms * kMomentsPerArm * kMomentsPerArm, 0.0);
  for (const Observation& row : data.rows) {
    const auto v = values(row);
    ++m.n[row.arm];
    for (std::size_t a = 0; a < kMomentsPerArm; ++a) m.theta[slot(row.arm, a)] += v[a];
  }
  for (std::size_t j = 0; j < arms; ++j) {
    for (std::size_t a = 0; a < kMomentsPerArm; ++a) {
      m.theta[slot(j, a)] /= static_cast<double>(m.n[j]);
    }
  }
  for (const Observation& row : data.rows) {
    const auto v = values(row);
    double* cov = &m.covariance[row.arm * kMomentsPerArm * kMomentsPerArm];
    for (std::size_t a = 0; a < kMomentsPerArm; ++a) {
      for (std::size_t b = 0; b < kMomentsPerArm; ++b) {
        cov[a * kMomentsPerArm + b] +=
            (v[a] - m.theta[slot(row.arm, a)]) * (v[b] - m.theta[slot(row.arm, b)]);
      }
    }
  }
  // Plug-in (1/n) moments: duplicating every row leaves them unchanged, so
  // SEs scale exactly as 1/sqrt(n).
  for (std::size_t j = 0; j < arms; ++j) {
    for (std::size_t e = 0; e < kMomentsPerArm * kMomentsPerArm; ++e) {
      m.covariance[j * kMomentsPerArm * kMomentsPerArm + e] /= static_cast<double>(m.n[j]);
    }
  }
  return m;
}

double delta_method_se(const LinearRatio& f, const ArmMoments& moments) {
  const std::vector<double> grad = f.gradient(moments.theta);
  // Arms are independent; each block is the row covariance over n_z.
  double variance = 0.0;
  for (std::size_t j = 0; j < moments.n.size(); ++j) {
    const double* cov = &moments.covariance[j * kMomentsPerArm * kMomentsPerArm];
    double block = 0.0;
    for (std::size_t a = 0; a < kMomentsPerArm; ++a) {
      for (std::size_t b = 0; b < kMomentsPerArm; ++b) {
        block += grad[slot(j, a)] * cov[a * kMomentsPerArm + b] * grad[slot(j, b)];
      }
    }
    variance += block / static_cast<double>(moments.n[j]);
  }
  return std::sqrt(std::max(variance, 0.0));
}

}  // namespace detail

namespace {

std::size_t resolve_profile(const ObservedDataset& data, int k, const Method& method,
                            const ProfilePolicy& policy) {
  const bool joint = method.kind == Method::Kind::joint;
  if (policy.kind == ProfilePolicy::Kind::min) {
    return joint ? choose_joint_profile_min(data, k, method.partner).context
                 : choose_profile_min(data, k).context;
  }
  const std::size_t expected = static_cast<std::size_t>(data.design.factors()) - (joint ? 2 : 1);
  if (policy.context.size() != expected) {
    throw Error(ErrorKind::invalid_input,
                "declared profile has " + std::to_string(policy.context.size()) +
                    " levels; expected " + std::to_string(expected));
  }
  return canonical_index(policy.context);
}

Assignment profile_levels(const FactorialDesign& design, const Method& method,
                          std::size_t profile) {
  const std::size_t length = static_cast<std::size_t>(design.factors()) -
                             (method.kind == Method::Kind::joint ? 2 : 1);
  return from_canonical_index(profile, length);
}

}  // namespace

BoundsEstimate estimate_bounds(const ObservedDataset& data, int k, const Method& method,
                               const ProfilePolicy& policy) {
  require_method(data.design, k, method);
  require_arm_sizes(data);
  const std::size_t profile = resolve_profile(data, k, method, policy);

  BoundsEstimate est;
  est.method = method;
  est.factor = k;
  if (method.kind == Method::Kind::interaction_fk) {
    est.contexts = method.factors;
  } else if (method.kind == Method::Kind::joint) {
    est.contexts = {k, method.partner};
  } else {
    est.contexts = {k};
  }
  est.nu_hat = method.kind == Method::Kind::joint
                   ? estimated_joint_first_stage(data, k, method.partner)
                   : estimated_first_stage(data, k);
  est.profile_policy = policy.name();
  est.profile_index = profile;
  est.profile_context = profile_levels(data.design, method, profile);

  if (!(est.nu_hat[profile] > 0.0)) {
    throw Error(ErrorKind::weak_first_stage,
                "estimated first stage at the chosen profile is not positive; nu_hat = " +
                    format_table(est.nu_hat));
  }

  const detail::EndpointModel model = detail::endpoint_model(data.design, k, method, profile);
  const detail::ArmMoments moments = detail::arm_moments(data, k, method);
  const double center = model.center.value(moments.theta);
  double lower = model.lower.value(moments.theta);
  double upper = model.upper.value(moments.theta);
  double se_lower = detail::delta_method_se(model.lower, moments);
  double se_upper = detail::delta_method_se(model.upper, moments);
  // A declared profile that is not the observed minimum can give negative
  // plug-in half-widths; truncate them at the center.
  if (lower > center) {
    lower = center;
    se_lower = detail::delta_method_se(model.center, moments);
  }
  if (upper < center) {
    upper = center;
    se_upper = detail::delta_method_se(model.center, moments);
  }
  est.bounds.center = center;
  est.bounds.half_width_lower = center - lower;
  est.bounds.half_width_upper = upper - center;
  est.bounds.interval = make_interval(lower, upper);
  est.se_lower = se_lower;
  est.se_upper = se_upper;
  return est;
}

EndpointErrors endpoint_ses(const ObservedDataset& data, int k, const Method& method,
                            std::size_t profile) {
  const detail::EndpointModel model = detail::endpoint_model(data.design, k, method, profile);
  const detail::ArmMoments moments = detail::arm_moments(data, k, method);
  return {detail::delta_method_se(model.lower, moments),
          detail::delta_method_se(model.upper, moments)};
}

double imbens_manski_critical_value(double width, double max_se, double alpha) {
  if (!std::isfinite(width) || !std::isfinite(max_se) || !std::isfinite(alpha)) {
    throw Error(ErrorKind::invalid_input, "Imbens-Manski inputs must be finite");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorKind::invalid_input, "alpha must lie in (0,1)");
  }
  if (width < 0.0 || max_se < 0.0) {
    throw Error(ErrorKind::invalid_input, "interval width and standard errors must be >= 0");
  }
  const double one_sided = normal_quantile(1.0 - alpha);
  const double two_sided = normal_quantile(1.0 - alpha / 2.0);
  if (width == 0.0) return two_sided;
  if (max_se == 0.0) return one_sided;
  const double ratio = width / max_se;
  double lo = one_sided - 0.1;
  double hi = two_sided + 0.1;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid + ratio) - normal_cdf(-mid) < 1.0 - alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

ConfidenceInterval imbens_manski_ci(double raw_lower, double raw_upper, double se_lower,
                                    double se_upper, double alpha) {
  if (!std::isfinite(raw_lower) || !std::isfinite(raw_upper) || !std::isfinite(se_lower) ||
      !std::isfinite(se_upper)) {
    throw Error(ErrorKind::invalid_input, "Imbens-Manski inputs must be finite");
  }
  if (raw_lower > raw_upper) {
    throw Error(ErrorKind::invalid_input, "interval lower endpoint exceeds upper endpoint");
  }
  const double max_se = std::max(se_lower, se_upper);
  ConfidenceInterval ci;
  ci.level = 1.0 - alpha;
  ci.critical_value = imbens_manski_critical_value(raw_upper - raw_lower, max_se, alpha);
  if (max_se == 0.0) {
    ci.raw_lower = raw_lower;
    ci.raw_upper = raw_upper;
  } else {
    ci.raw_lower = raw_lower - ci.critical_value * se_lower;
    ci.raw_upper = raw_upper + ci.critical_value * se_upper;
  }
  ci.lower = std::clamp(ci.raw_lower, -1.0, 1.0);
  ci.upper = std::clamp(ci.raw_upper, -1.0, 1.0);
  return ci;
}

ConfidenceInterval imbens_manski_ci(const BoundsEstimate& est, double alpha) {
  return imbens_manski_ci(est.bounds.interval.raw_lower, est.bounds.interval.raw_upper,
                          est.se_lower, est.se_upper, alpha);
}

WaldEstimate wald_reference(const ObservedDataset& data, int k) {
  data.design.require_factor(k);
  require_arm_sizes(data);
  const FactorialDesign& design = data.design;
  const ContrastVector gk = main_effect_contrast(design, k);
  detail::LinearRatio f;
  f.numerator.assign(design.arms() * detail::kMomentsPerArm, 0.0);
  f.denominator.assign(design.arms() * detail::kMomentsPerArm, 0.0);
  for (std::size_t j = 0; j < design.arms(); ++j) {
    f.numerator[slot(j, kY)] = gk[j];
    f.denominator[slot(j, kX)] = 0.5 * gk[j];
  }
  const detail::ArmMoments moments = detail::arm_moments(data, k, Method::prop2());
  double den = 0.0;
  for (std::size_t j = 0; j < design.arms(); ++j) den += 0.5 * gk[j] * moments.theta[slot(j, kX)];
  if (den == 0.0) {
    throw Error(ErrorKind::weak_first_stage,
                "pooled first stage is zero; nu_hat = " +
                    format_table(estimated_first_stage(data, k)));
  }
  return {f.value(moments.theta), detail::delta_method_se(f, moments)};
}

}  // namespace fbounds
