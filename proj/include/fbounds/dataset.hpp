#pragma once

#include <cstddef>
#include <vector>

#include "fbounds/design.hpp"

namespace fbounds {

/// One realized row (Z_i, D_i, Y_i). The assignment is stored as its arm index.
struct Observation {
  std::size_t arm = 0;
  std::vector<int> uptake;  // length K, entries +/-1
  double outcome = 0.0;
};

struct ObservedDataset {
  FactorialDesign design;
  std::vector<Observation> rows;

  explicit ObservedDataset(FactorialDesign d) : design(std::move(d)) {}

  std::size_t size() const { return rows.size(); }
  std::vector<std::size_t> arm_counts() const;
  /// Checks row shapes, +/-1 codes and outcome range; throws invalid_input.
  void validate() const;
};

}  // namespace fbounds
