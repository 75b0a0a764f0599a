#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <vector>

#include "fbounds/design.hpp"
#include "fbounds/population.hpp"
#include "fbounds/rng.hpp"
#include "fbounds/simulate.hpp"

namespace fbounds::testing {

/// Four units, two factors. u1, u2 comply on both factors; u3 takes factor 1
/// only at (+,+); u4 never takes factor 1. D2 = z2 for all; Y = (D1 + 1) / 2.
inline Population make_p4() {
  const FactorialDesign design(2);
  std::vector<std::int8_t> d;
  std::vector<double> y;
  for (int unit = 0; unit < 4; ++unit) {
    for (std::size_t arm = 0; arm < design.arms(); ++arm) {
      const int z1 = design.level(arm, 1);
      const int z2 = design.level(arm, 2);
      int d1 = z1;
      if (unit == 2) d1 = (z1 > 0 && z2 > 0) ? 1 : -1;
      if (unit == 3) d1 = -1;
      d.push_back(static_cast<std::int8_t>(d1));
      d.push_back(static_cast<std::int8_t>(z2));
      y.push_back((d1 + 1) / 2.0);
    }
  }
  return Population(design, 4, std::move(d), std::move(y));
}

/// Population with the same uptake and outcome Y_i(z) = f_i(D_i(z)) for a
/// random per-unit table f_i over uptake patterns (exclusion holds).
inline Population with_random_outcomes(const Population& pop, Rng& rng, bool binary = false) {
  const int K = pop.factors();
  const std::size_t patterns = std::size_t{1} << K;
  std::vector<double> y;
  y.reserve(pop.units() * pop.arms());
  for (std::size_t i = 0; i < pop.units(); ++i) {
    std::vector<double> table(patterns);
    for (double& v : table) v = binary ? (rng.bernoulli(0.5) ? 1.0 : 0.0) : rng.uniform();
    for (std::size_t a = 0; a < pop.arms(); ++a) {
      std::size_t pattern = 0;
      for (int k = 1; k <= K; ++k) {
        if (pop.uptake(i, a, k) > 0) pattern |= std::size_t{1} << (k - 1);
      }
      y.push_back(table[pattern]);
    }
  }
  return Population(pop.design(), pop.units(), pop.uptake_table(), std::move(y));
}

/// Which assumptions a random population must satisfy.
struct Regime {
  bool weak_exclusion = false;  // on every factor
  bool joint = false;           // joint profile and conditional exclusion on all pairs
};

/// Random type distribution: every type has positive probability.
inline FactorCompliance random_compliance(Rng& rng) {
  double w[4];
  double total = 0.0;
  for (double& x : w) {
    x = 0.05 + rng.uniform();
    total += x;
  }
  FactorCompliance c;
  c.constant_complier = w[0] / total;
  c.conditional_complier = w[1] / total;
  c.always_taker = w[2] / total;
  c.never_taker = 1.0 - c.constant_complier - c.conditional_complier - c.always_taker;
  return c;
}

/// N must be at least 2 * 2^K. A generated population satisfying monotonicity and least-compliant
/// profiles (plus the regime's extras) with random outcome tables.
inline GeneratedPopulation random_population(int K, std::size_t N, const Regime& regime,
                                             std::uint64_t seed) {
  Rng rng = Rng::substream(seed, Rng::Stream::replication, 7);
  ScenarioConfig config;
  config.factors = K;
  config.units = N;
  config.seed = seed;
  for (int k = 0; k < K; ++k) config.compliance.push_back(random_compliance(rng));
  config.assumptions.monotonicity.assign(static_cast<std::size_t>(K), Toggle::force);
  config.assumptions.least_compliant.assign(static_cast<std::size_t>(K), Toggle::force);
  if (regime.weak_exclusion) {
    config.assumptions.weak_exclusion.assign(static_cast<std::size_t>(K), Toggle::force);
  }
  if (regime.joint) {
    config.assumptions.joint_least_compliant = Toggle::force;
    config.assumptions.conditional_exclusion = Toggle::force;
  }
  GeneratedPopulation gen = generate_population(config, 0);
  gen.population = with_random_outcomes(gen.population, rng, rng.bernoulli(0.25));
  return gen;
}

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace fbounds::testing
