#include <doctest.h>

#include <cmath>

#include "fbounds/error.hpp"
#include "fbounds/estimate.hpp"
#include "fbounds/normal.hpp"
#include "fbounds/oracle.hpp"
#include "fbounds/simulate.hpp"
#include "support.hpp"

using namespace fbounds;
using fbounds::testing::make_p4;

namespace {

constexpr double kTol = 1e-12;

ObservedDataset rows(int K, const std::vector<std::tuple<Assignment, std::vector<int>, double>>& r) {
  ObservedDataset data{FactorialDesign(K)};
  for (const auto& [z, d, y] : r) data.rows.push_back({data.design.index_of(z), d, y});
  return data;
}

/// Random dataset with compliance probability q per row on every factor.
ObservedDataset noisy_dataset(int K, std::size_t per_arm, double q, std::uint64_t seed) {
  Rng rng(seed);
  ObservedDataset data{FactorialDesign(K)};
  for (std::size_t a = 0; a < data.design.arms(); ++a) {
    for (std::size_t i = 0; i < per_arm; ++i) {
      Observation o;
      o.arm = a;
      for (int k = 1; k <= K; ++k) {
        o.uptake.push_back(rng.bernoulli(q) ? data.design.level(a, k) : (rng.bernoulli(0.3) ? 1 : -1));
      }
      o.outcome = std::clamp(0.3 + 0.3 * (o.uptake[0] > 0) + 0.4 * (rng.uniform() - 0.5), 0.0, 1.0);
      data.rows.push_back(std::move(o));
    }
  }
  return data;
}

std::vector<Method> all_methods(int K) {
  std::vector<Method> m{Method::prop1(), Method::remark1(), Method::prop2()};
  if (K >= 2) {
    m.push_back(Method::interaction({1, 2}));
    m.push_back(Method::joint(2));
  }
  return m;
}

}  // namespace

TEST_SUITE("estimate") {

TEST_CASE("arm summaries") {
  const ObservedDataset d = rows(1, {{{{-1}}, {-1}, 0.0}, {{{-1}}, {-1}, 1.0},
                                     {{{1}}, {1}, 0.2}, {{{1}}, {1}, 0.2}});
  const std::vector<ArmSummary> s = summarize(d);
  CHECK(s[0].mean_y == 0.5);
  CHECK(s[0].var_y == 0.5);
  CHECK(s[1].mean_d[0] == 1.0);
  CHECK(s[1].var_d[0] == 0.0);
  CHECK(s[1].var_y == 0.0);

  const ObservedDataset thin = rows(1, {{{{-1}}, {-1}, 0.0}, {{{-1}}, {-1}, 1.0}, {{{1}}, {1}, 0.2}});
  try {
    summarize(thin);
    FAIL("singleton arm accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::insufficient_data);
    CHECK(std::string(e.what()).find("arm 1") != std::string::npos);
  }
}

TEST_CASE("census of P4 reproduces the oracle exactly") {
  const Population p = make_p4();
  const ObservedDataset data = census(p);
  const std::vector<ArmSummary> s = summarize(data);
  for (std::size_t a = 0; a < p.arms(); ++a) CHECK(s[a].mean_y == p.mean_outcome(a));

  const ProfilePolicy declared = ProfilePolicy::declared({{-1}});
  const BoundsEstimate p2 = estimate_bounds(data, 1, Method::prop2(), declared);
  CHECK(std::abs(p2.bounds.center - 1.25) < kTol);
  CHECK(std::abs(p2.bounds.half_width_lower - 0.25) < kTol);
  CHECK(p2.bounds.interval.lower == 1.0);
  CHECK(p2.bounds.interval.upper == 1.0);
  CHECK(p2.profile_policy == "declared");

  const auto same = [&](const Bounds& oracle, const BoundsEstimate& est) {
    CHECK(std::abs(oracle.interval.raw_lower - est.bounds.interval.raw_lower) < kTol);
    CHECK(std::abs(oracle.interval.raw_upper - est.bounds.interval.raw_upper) < kTol);
  };
  same(bounds_prop1(p, 1, 0), estimate_bounds(data, 1, Method::prop1(), declared));
  same(bounds_remark1(p, 1, 0), estimate_bounds(data, 1, Method::remark1(), declared));
  same(bounds_interaction_fk(p, 1, {1, 2}, 0),
       estimate_bounds(data, 1, Method::interaction({1, 2}), declared));
  CHECK(std::abs(wald_reference(data, 1).estimate - 1.0) < kTol);
}

TEST_CASE("minimum-share profile") {
  const ObservedDataset data = census(make_p4());
  const ProfileChoice c = choose_profile_min(data, 1);
  CHECK(c.context == 0);
  CHECK(std::abs(c.share - 0.5) < kTol);
  const std::vector<double> nu = estimated_first_stage(data, 1);
  CHECK(std::abs(nu[1] - 0.75) < kTol);
  // Factor 2 complies everywhere: a tie, resolved to the first context.
  CHECK(choose_profile_min(data, 2).context == 0);
  const BoundsEstimate est = estimate_bounds(data, 1, Method::prop2(), ProfilePolicy::minimum());
  CHECK(est.profile_policy == "min");
  CHECK(est.profile_context.levels == std::vector<int>{-1});
}

TEST_CASE("weak first stage is an error carrying the table") {
  // Nobody takes factor 1 anywhere.
  const ObservedDataset d = rows(1, {{{{-1}}, {-1}, 0.1}, {{{-1}}, {-1}, 0.2},
                                     {{{1}}, {-1}, 0.3}, {{{1}}, {-1}, 0.4}});
  CHECK(choose_profile_min(d, 1).share == 0.0);
  try {
    estimate_bounds(d, 1, Method::prop2(), ProfilePolicy::minimum());
    FAIL("zero first stage accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::weak_first_stage);
    CHECK(std::string(e.what()).find("nu_hat") != std::string::npos);
  }
  CHECK_THROWS_AS(wald_reference(d, 1), Error);
}

TEST_CASE("full compliance: width zero at the difference in means") {
  const ObservedDataset d = rows(1, {{{{-1}}, {-1}, 0.1}, {{{-1}}, {-1}, 0.3},
                                     {{{1}}, {1}, 0.6}, {{{1}}, {1}, 0.8}});
  for (const Method& m : all_methods(1)) {
    const BoundsEstimate e = estimate_bounds(d, 1, m, ProfilePolicy::minimum());
    CHECK(std::abs(e.bounds.center - 0.5) < kTol);
    CHECK(std::abs(e.bounds.interval.raw_width()) < kTol);
  }
  CHECK(std::abs(wald_reference(d, 1).estimate - 0.5) < kTol);

  const ObservedDataset flat = rows(1, {{{{-1}}, {-1}, 0.4}, {{{-1}}, {-1}, 0.4},
                                        {{{1}}, {1}, 0.4}, {{{1}}, {1}, 0.4}});
  const BoundsEstimate e = estimate_bounds(flat, 1, Method::prop2(), ProfilePolicy::minimum());
  CHECK(e.se_lower == 0.0);
  CHECK(e.se_upper == 0.0);
  CHECK(wald_reference(flat, 1).estimate == 0.0);
}

TEST_CASE("remark1 interval contains the prop1 interval") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const ObservedDataset d = noisy_dataset(2, 25, 0.7, seed);
    for (const ProfilePolicy& pol : {ProfilePolicy::minimum(), ProfilePolicy::declared({{1}})}) {
      const BoundsEstimate a = estimate_bounds(d, 1, Method::prop1(), pol);
      const BoundsEstimate b = estimate_bounds(d, 1, Method::remark1(), pol);
      CHECK(b.bounds.interval.raw_lower <= a.bounds.interval.raw_lower + kTol);
      CHECK(b.bounds.interval.raw_upper >= a.bounds.interval.raw_upper - kTol);
    }
  }
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(2024);
  std::size_t checked = 0;
  for (int K = 1; K <= 3; ++K) {
    const FactorialDesign design(K);
    for (const Method& m : all_methods(K)) {
      const std::size_t profiles = m.kind == Method::Kind::joint ? design.joint_contexts()
                                                                 : design.contexts();
      for (int rep = 0; rep < 100; ++rep) {
        const std::size_t profile = rng.below(profiles);
        const detail::EndpointModel model = detail::endpoint_model(design, 1, m, profile);
        std::vector<double> theta(design.arms() * detail::kMomentsPerArm);
        for (std::size_t a = 0; a < design.arms(); ++a) {
          theta[a * 3 + 0] = rng.uniform(0.05, 0.95);
          theta[a * 3 + 1] = rng.uniform(-0.95, 0.95);
          theta[a * 3 + 2] = rng.uniform(0.0, theta[a * 3 + 0]);
        }
        for (const detail::LinearRatio* f : {&model.center, &model.lower, &model.upper}) {
          double den = f->denominator_offset;
          for (std::size_t i = 0; i < theta.size(); ++i) den += f->denominator[i] * theta[i];
          if (std::abs(den) < 0.05) continue;
          const std::vector<double> g = f->gradient(theta);
          double diff = 0.0;
          double norm = 0.0;
          for (std::size_t i = 0; i < theta.size(); ++i) {
            std::vector<double> up = theta;
            std::vector<double> down = theta;
            up[i] += 1e-6;
            down[i] -= 1e-6;
            const double fd = (f->value(up) - f->value(down)) / 2e-6;
            diff += (fd - g[i]) * (fd - g[i]);
            norm += g[i] * g[i];
          }
          REQUIRE(std::sqrt(diff) <= 1e-4 * std::max(std::sqrt(norm), 1e-8));
          ++checked;
        }
      }
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("K=1 standard error is the textbook Wald delta-method SE") {
  const ObservedDataset d = noisy_dataset(1, 40, 0.6, 77);
  double sy[2] = {0, 0}, sp[2] = {0, 0};
  double n[2] = {0, 0};
  for (const Observation& o : d.rows) {
    sy[o.arm] += o.outcome;
    sp[o.arm] += (o.uptake[0] + 1) / 2.0;
    n[o.arm] += 1;
  }
  double my[2], mp[2], vy[2] = {0, 0}, vp[2] = {0, 0}, c[2] = {0, 0};
  for (int a = 0; a < 2; ++a) {
    my[a] = sy[a] / n[a];
    mp[a] = sp[a] / n[a];
  }
  for (const Observation& o : d.rows) {
    const double p = (o.uptake[0] + 1) / 2.0;
    vy[o.arm] += (o.outcome - my[o.arm]) * (o.outcome - my[o.arm]) / n[o.arm];
    vp[o.arm] += (p - mp[o.arm]) * (p - mp[o.arm]) / n[o.arm];
    c[o.arm] += (o.outcome - my[o.arm]) * (p - mp[o.arm]) / n[o.arm];
  }
  const double dy = my[1] - my[0];
  const double dp = mp[1] - mp[0];
  const double beta = dy / dp;
  const double var_dy = vy[0] / n[0] + vy[1] / n[1];
  const double var_dp = vp[0] / n[0] + vp[1] / n[1];
  const double cov = c[0] / n[0] + c[1] / n[1];
  const double se = std::sqrt(var_dy - 2 * beta * cov + beta * beta * var_dp) / std::abs(dp);

  const BoundsEstimate e = estimate_bounds(d, 1, Method::prop2(), ProfilePolicy::minimum());
  CHECK(std::abs(e.bounds.center - beta) < kTol);
  CHECK(std::abs(e.se_lower - se) < 1e-12);
  CHECK(std::abs(e.se_upper - se) < 1e-12);
  const WaldEstimate w = wald_reference(d, 1);
  CHECK(std::abs(w.se - se) < 1e-12);
}

TEST_CASE("duplicating every row shrinks SEs by sqrt(2)") {
  for (int K = 1; K <= 3; ++K) {
    const ObservedDataset d = noisy_dataset(K, 15, 0.7, 100 + static_cast<std::uint64_t>(K));
    ObservedDataset twice = d;
    twice.rows.insert(twice.rows.end(), d.rows.begin(), d.rows.end());
    for (const Method& m : all_methods(K)) {
      BoundsEstimate a, b;
      try {
        a = estimate_bounds(d, 1, m, ProfilePolicy::minimum());
      } catch (const Error&) {
        continue;  // weak joint first stage in this draw
      }
      b = estimate_bounds(twice, 1, m, ProfilePolicy::minimum());
      CHECK(std::abs(a.se_lower / std::sqrt(2.0) - b.se_lower) < 1e-9);
      CHECK(std::abs(a.se_upper / std::sqrt(2.0) - b.se_upper) < 1e-9);
    }
  }
}

TEST_CASE("Imbens-Manski critical value") {
  CHECK(std::abs(imbens_manski_critical_value(1e6, 1.0, 0.05) - 1.6448536) < 1e-3);
  CHECK(std::abs(imbens_manski_critical_value(0.0, 1.0, 0.05) - 1.9599640) < 1e-3);
  CHECK(std::abs(imbens_manski_critical_value(0.5, 0.0, 0.05) - normal_quantile(0.95)) < 1e-9);

  const double C = imbens_manski_critical_value(0.2, 0.1, 0.05);
  CHECK(std::abs(normal_cdf(C + 2.0) - normal_cdf(-C) - 0.95) < 1e-8);
  CHECK(C > normal_quantile(0.95));
  CHECK(C < normal_quantile(0.975));

  double last = imbens_manski_critical_value(0.0, 1.0, 0.05);
  for (double r : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    const double c = imbens_manski_critical_value(r, 1.0, 0.05);
    CHECK(c <= last);
    last = c;
  }

  const ConfidenceInterval ci = imbens_manski_ci(0.2, 0.4, 0.1, 0.1, 0.05);
  CHECK(ci.raw_lower <= 0.2);
  CHECK(ci.raw_upper >= 0.4);
  CHECK(ci.level == doctest::Approx(0.95));
  const ConfidenceInterval zero = imbens_manski_ci(0.2, 0.4, 0.0, 0.0, 0.05);
  CHECK(zero.lower == 0.2);
  CHECK(zero.upper == 0.4);
  const ConfidenceInterval wide = imbens_manski_ci(-0.9, 0.9, 0.5, 0.5, 0.05);
  CHECK(wide.lower == -1.0);
  CHECK(wide.upper == 1.0);

  CHECK_THROWS_AS(imbens_manski_ci(0.2, NAN, 0.1, 0.1, 0.05), Error);
  CHECK_THROWS_AS(imbens_manski_critical_value(0.1, INFINITY, 0.05), Error);
  CHECK_THROWS_AS(imbens_manski_critical_value(0.1, 0.1, 1.5), Error);
}

TEST_CASE("method names round-trip") {
  for (const std::string s : {"prop1", "remark1", "prop2", "interaction:1+2", "joint:2"}) {
    CHECK(Method::parse(s).name() == s);
  }
  CHECK_THROWS_AS(Method::parse("prop3"), Error);
  CHECK_THROWS_AS(Method::parse("joint:x"), Error);
}

}  // TEST_SUITE
