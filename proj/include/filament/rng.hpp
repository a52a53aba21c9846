#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>

#include "filament/vec3.hpp"

namespace filament {

/// Counter-based generator: the n-th draw of a stream is a pure function of
/// (key, n), so substreams for agents or repeats are derived with split()
/// without any shared mutable state.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  /// Independent child stream. Same (parent key, stream) always yields the same child.
  [[nodiscard]] Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64();
  result_type operator()() { return next_u64(); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in the open interval (0, 1).
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);
  /// Uniform direction on the unit sphere.
  Vec3 unit_vector();

  std::uint64_t seed() const { return seed_; }

 private:
  Rng(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace filament
