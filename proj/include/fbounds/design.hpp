#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fbounds {

/// A point of {-1,+1}^K. Also used for reduced contexts z_{-k} and z_{-(k,k')}.
struct Assignment {
  std::vector<int> levels;

  std::size_t size() const { return levels.size(); }
  int operator[](std::size_t i) const { return levels[i]; }
  bool operator==(const Assignment&) const = default;
};

/// A +/-1 contrast over the J arms of a design.
struct ContrastVector {
  std::vector<int> signs;
  int order = 1;

  std::size_t size() const { return signs.size(); }
  int operator[](std::size_t j) const { return signs[j]; }
};

int dot(const ContrastVector& a, const ContrastVector& b);
double dot(const ContrastVector& g, const std::vector<double>& values);

inline constexpr int kMaxFactors = 16;

/// The full 2^K grid in canonical order: factor 1 is the fastest-varying bit.
///
/// Factor indices are 1-based throughout the public interface. Contexts
/// (assignments with one or two factors removed) are indexed with the same
/// canonical rule applied to the remaining factors, in their original order.
class FactorialDesign {
 public:
  explicit FactorialDesign(int factors);

  int factors() const { return factors_; }
  std::size_t arms() const { return std::size_t{1} << factors_; }
  std::size_t contexts() const { return arms() / 2; }
  /// Number of z_{-(k,k')} contexts; 1 when K = 2.
  std::size_t joint_contexts() const;

  Assignment assignment(std::size_t arm) const;
  const std::vector<Assignment>& assignments() const { return assignments_; }
  std::size_t index_of(const Assignment& z) const;

  /// Level (+/-1) of factor k in the given arm.
  int level(std::size_t arm, int k) const;

  /// Arm index of (z_{-k}, z_k = level) for context index `context` of Z_{-k}.
  std::size_t arm_of(int k, std::size_t context, int level) const;
  /// Context index of z_{-k} for the given arm.
  std::size_t context_of(int k, std::size_t arm) const;

  /// Arm index of (z_{-(k,k')}, z_k, z_k') for a joint context index.
  std::size_t arm_of_joint(int k, int k2, std::size_t context, int level_k,
                           int level_k2) const;

  void require_factor(int k) const;

 private:
  int factors_;
  std::vector<Assignment> assignments_;
};

FactorialDesign enumerate_assignments(int factors);

ContrastVector main_effect_contrast(const FactorialDesign& design, int k);
ContrastVector interaction_contrast(const FactorialDesign& design,
                                    const std::vector<int>& factors);

Assignment set_factor(const Assignment& z, int k, int level);
Assignment strip_factor(const Assignment& z, int k);
/// Inverse of strip_factor: places `level` at position k of the context.
Assignment insert_factor(const Assignment& context, int k, int level);

/// Canonical index of a +/-1 vector (bit i set iff entry i is +1).
std::size_t canonical_index(const Assignment& z);
Assignment from_canonical_index(std::size_t index, std::size_t length);

}  // namespace fbounds
