#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fbounds/dataset.hpp"
#include "fbounds/estimate.hpp"
#include "fbounds/population.hpp"
#include "fbounds/rng.hpp"

namespace fbounds {

enum class Toggle { free, force, violate };

const char* to_string(Toggle toggle);
Toggle parse_toggle(const std::string& text);

/// Type distribution for one factor. A conditional complier complies on a
/// random nonempty set of contexts that excludes the factor's least
/// compliant profile; elsewhere it is an always- or never-taker in the ratio
/// always_taker : never_taker (never-taker when both are zero).
struct FactorCompliance {
  double constant_complier = 1.0;
  double conditional_complier = 0.0;
  double always_taker = 0.0;
  double never_taker = 0.0;
  /// Uptake is -1 whenever the factor is assigned -1.
  bool one_sided = false;
  /// Least compliant profile as levels of the other factors; drawn if absent.
  std::optional<Assignment> worst_context;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// m1: Y_i(z) = clamp(a_i + sum_k b_ik d_k + sum_{k<k'} h_i d_k d_k', 0, 1)
/// with d_k = (D_ik(z) + 1) / 2. m2 thresholds m1 at a per-unit uniform draw.
struct OutcomeModel {
  enum class Kind { uptake_driven, bernoulli } kind = Kind::uptake_driven;
  Range baseline{0.2, 0.4};
  std::vector<Range> effects;  // one per factor
  Range interaction{0.0, 0.0};
};

struct AssumptionToggles {
  std::vector<Toggle> monotonicity;     // per factor
  std::vector<Toggle> least_compliant;  // per factor
  std::vector<Toggle> weak_exclusion;   // per factor
  Toggle joint_least_compliant = Toggle::free;  // every factor pair
  Toggle conditional_exclusion = Toggle::free;  // every factor pair
};

/// A Monte Carlo target: one estimator for one effect.
struct Target {
  int factor = 1;
  Method method = Method::prop2();
  /// "true" uses the generator's least compliant profile; "min" the observed
  /// minimum; "declared" the levels in `declared`.
  std::string profile = "true";
  Assignment declared;

  std::string label() const;
};

struct ScenarioConfig {
  int factors = 2;
  std::size_t units = 100;  // generated units before cloning
  std::size_t clone = 1;
  std::vector<FactorCompliance> compliance;
  OutcomeModel outcome;
  AssumptionToggles assumptions;
  std::vector<std::size_t> arm_sizes;  // empty: balanced over the J arms
  std::uint64_t seed = 1;
  bool redraw_population = false;
  double alpha = 0.05;
  std::vector<Target> targets;

  std::size_t population_size() const { return units * clone; }
  /// Fills defaults (toggles, effects, arm sizes) and checks invariants.
  void normalize();
};

/// A generated population with the least compliant profiles it was built on.
struct GeneratedPopulation {
  Population population;
  std::vector<std::size_t> worst_context;        // per factor, index into Z_{-k}
  std::map<std::pair<int, int>, std::size_t> worst_joint_context;
};

/// Deterministic given (config, stream index). Throws generation_failure
/// when a toggle combination cannot be met within the retry cap.
GeneratedPopulation generate_population(const ScenarioConfig& config,
                                        std::uint64_t stream = 0);

inline constexpr int kGenerationRetries = 100;

/// Arm index per unit; arm j receives exactly arm_sizes[j] units.
std::vector<std::size_t> complete_randomization(const Population& pop,
                                                const std::vector<std::size_t>& arm_sizes,
                                                Rng& rng);
std::vector<std::size_t> complete_randomization(const Population& pop,
                                                const std::vector<std::size_t>& arm_sizes,
                                                std::uint64_t seed);

ObservedDataset observe(const Population& pop, const std::vector<std::size_t>& allocation);

/// Dataset in which every unit appears once in every arm.
ObservedDataset census(const Population& pop);

/// Outcome of one target in one replication.
struct ReplicationRecord {
  bool ok = false;
  std::string error;
  double truth = 0.0;
  double raw_lower = 0.0;
  double raw_upper = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double se_lower = 0.0;
  double se_upper = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  bool has_oracle = false;
  double oracle_lower = 0.0;  // raw oracle endpoints at the same profile
  double oracle_upper = 0.0;
};

/// Ground truth for one target on one population.
struct TargetTruth {
  double truth = 0.0;
  bool has_truth = false;
  bool has_oracle = false;
  double oracle_lower = 0.0;
  double oracle_upper = 0.0;
  std::string error;
};

/// A configured study. With a fixed population (the default) the
/// population and its oracle values are computed once; with
/// redraw_population every replication draws a fresh population.
class Experiment {
 public:
  explicit Experiment(ScenarioConfig config);

  const ScenarioConfig& config() const { return config_; }
  /// The fixed population (the first draw when redrawing).
  const GeneratedPopulation& population() const { return fixed_; }

  /// One replication: randomize, observe and estimate every target.
  std::vector<ReplicationRecord> replicate(std::uint64_t replication) const;

 private:
  ScenarioConfig config_;
  GeneratedPopulation fixed_;
  std::vector<TargetTruth> fixed_truth_;
};

std::vector<TargetTruth> target_truths(const ScenarioConfig& config,
                                       const GeneratedPopulation& gen);

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  double mc_se = 0.0;  // sd / sqrt(n)
  std::size_t n = 0;
};

struct TargetReport {
  std::string label;
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::string first_error;
  Summary bounds_coverage;
  Summary ci_coverage;
  Summary width;
  Summary lower;  // clipped
  Summary upper;
  Summary ci_lower;
  Summary ci_upper;
  Summary raw_lower;
  Summary raw_upper;
  Summary se_lower;
  Summary se_upper;
  Summary ci_width;
  Summary bias_lower;  // estimate minus oracle endpoint
  Summary bias_upper;
  Summary truth;
};

struct CoverageReport {
  std::size_t replications = 0;
  std::uint64_t seed = 0;
  std::vector<TargetReport> targets;
};

CoverageReport monte_carlo(const ScenarioConfig& config, std::size_t replications);

/// Summary of a sample; the fold runs in index order.
Summary summarize_values(const std::vector<double>& values);

}  // namespace fbounds
