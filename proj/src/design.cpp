#include "fbounds/design.hpp"

#include <algorithm>
#include <string>

#include "fbounds/error.hpp"

namespace fbounds {

namespace {

// Inserts `bit` at position `pos` of `value`, shifting higher bits up.
std::size_t insert_bit(std::size_t value, int pos, std::size_t bit) {
  const std::size_t low = value & ((std::size_t{1} << pos) - 1);
  const std::size_t high = value >> pos;
  return low | (bit << pos) | (high << (pos + 1));
}

std::size_t remove_bit(std::size_t value, int pos) {
  const std::size_t low = value & ((std::size_t{1} << pos) - 1);
  const std::size_t high = value >> (pos + 1);
  return low | (high << pos);
}

void check_level(int level) {
  if (level != -1 && level != 1) {
    throw Error(ErrorKind::invalid_input,
                "factor level must be -1 or +1, got " + std::to_string(level));
  }
}

}  // namespace

int dot(const ContrastVector& a, const ContrastVector& b) {
  int sum = 0;
  for (std::size_t j = 0; j < a.size(); ++j) sum += a[j] * b[j];
  return sum;
}

double dot(const ContrastVector& g, const std::vector<double>& values) {
  double sum = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) sum += g[j] * values[j];
  return sum;
}

FactorialDesign::FactorialDesign(int factors) : factors_(factors) {
  if (factors < 1 || factors > kMaxFactors) {
    throw Error(ErrorKind::invalid_design,
                "factor count must be in 1.." + std::to_string(kMaxFactors) +
                    ", got " + std::to_string(factors));
  }
  assignments_.reserve(arms());
  for (std::size_t j = 0; j < arms(); ++j) {
    assignments_.push_back(from_canonical_index(j, static_cast<std::size_t>(factors)));
  }
}

std::size_t FactorialDesign::joint_contexts() const {
  return factors_ >= 2 ? arms() / 4 : 0;
}

Assignment FactorialDesign::assignment(std::size_t arm) const {
  return assignments_.at(arm);
}

std::size_t FactorialDesign::index_of(const Assignment& z) const {
  if (z.size() != static_cast<std::size_t>(factors_)) {
    throw Error(ErrorKind::invalid_input, "assignment has " + std::to_string(z.size()) +
                                              " levels, design has K=" +
                                              std::to_string(factors_));
  }
  return canonical_index(z);
}

int FactorialDesign::level(std::size_t arm, int k) const {
  return ((arm >> (k - 1)) & 1U) ? 1 : -1;
}

std::size_t FactorialDesign::arm_of(int k, std::size_t context, int level) const {
  return insert_bit(context, k - 1, level > 0 ? 1 : 0);
}

std::size_t FactorialDesign::context_of(int k, std::size_t arm) const {
  return remove_bit(arm, k - 1);
}

std::size_t FactorialDesign::arm_of_joint(int k, int k2, std::size_t context,
                                          int level_k, int level_k2) const {
  // Insert the lower position first so the higher one lands in its final place.
  if (k < k2) {
    return insert_bit(insert_bit(context, k - 1, level_k > 0), k2 - 1, level_k2 > 0);
  }
  return insert_bit(insert_bit(context, k2 - 1, level_k2 > 0), k - 1, level_k > 0);
}

void FactorialDesign::require_factor(int k) const {
  if (k < 1 || k > factors_) {
    throw Error(ErrorKind::invalid_factor, "factor index " + std::to_string(k) +
                                               " outside 1.." + std::to_string(factors_));
  }
}

FactorialDesign enumerate_assignments(int factors) { return FactorialDesign(factors); }

ContrastVector main_effect_contrast(const FactorialDesign& design, int k) {
  design.require_factor(k);
  ContrastVector g;
  g.order = 1;
  g.signs.resize(design.arms());
  for (std::size_t j = 0; j < design.arms(); ++j) g.signs[j] = design.level(j, k);
  return g;
}

ContrastVector interaction_contrast(const FactorialDesign& design,
                                    const std::vector<int>& factors) {
  if (factors.empty()) {
    throw Error(ErrorKind::invalid_factor, "interaction needs at least one factor");
  }
  std::vector<int> sorted = factors;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorKind::invalid_factor, "interaction factors must be distinct");
  }
  ContrastVector g;
  g.order = static_cast<int>(factors.size());
  g.signs.assign(design.arms(), 1);
  for (int k : factors) {
    const ContrastVector main = main_effect_contrast(design, k);
    for (std::size_t j = 0; j < design.arms(); ++j) g.signs[j] *= main[j];
  }
  return g;
}

Assignment set_factor(const Assignment& z, int k, int level) {
  if (k < 1 || static_cast<std::size_t>(k) > z.size()) {
    throw Error(ErrorKind::invalid_factor, "factor index " + std::to_string(k) +
                                               " outside 1.." + std::to_string(z.size()));
  }
  check_level(level);
  Assignment out = z;
  out.levels[static_cast<std::size_t>(k - 1)] = level;
  return out;
}

Assignment strip_factor(const Assignment& z, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > z.size()) {
    throw Error(ErrorKind::invalid_factor, "factor index " + std::to_string(k) +
                                               " outside 1.." + std::to_string(z.size()));
  }
  Assignment out = z;
  out.levels.erase(out.levels.begin() + (k - 1));
  return out;
}

Assignment insert_factor(const Assignment& context, int k, int level) {
  if (k < 1 || static_cast<std::size_t>(k) > context.size() + 1) {
    throw Error(ErrorKind::invalid_factor,
                "factor index " + std::to_string(k) + " outside 1.." +
                    std::to_string(context.size() + 1));
  }
  check_level(level);
  Assignment out = context;
  out.levels.insert(out.levels.begin() + (k - 1), level);
  return out;
}

std::size_t canonical_index(const Assignment& z) {
  std::size_t index = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    check_level(z[i]);
    if (z[i] > 0) index |= std::size_t{1} << i;
  }
  return index;
}

Assignment from_canonical_index(std::size_t index, std::size_t length) {
  Assignment z;
  z.levels.resize(length);
  for (std::size_t i = 0; i < length; ++i) z.levels[i] = ((index >> i) & 1U) ? 1 : -1;
  return z;
}

}  // namespace fbounds
