#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace fbounds {

/// Seedable generator with platform-independent output. The engine is
/// std::mt19937_64 (fully specified by the standard); the distributions are
/// implemented here because the standard library's are not portable.
class Rng {
 public:
  enum class Stream : std::uint64_t { generation = 1, allocation = 2, replication = 3 };

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for a purpose and index, derived from a root seed.
  static Rng substream(std::uint64_t seed, Stream purpose, std::uint64_t index);

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n) without modulo bias.
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace fbounds
