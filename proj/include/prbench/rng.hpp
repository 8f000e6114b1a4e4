#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace prb {

/// Seeded random stream identified by (master seed, purpose, index).
///
/// Streams with different labels are decorrelated by hashing the label into
/// the engine seed; identical labels replay identical draws. The sampling
/// transforms are implemented here rather than with <random> distributions so
/// draws do not depend on the standard library in use.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

  /// Independent sub-stream, e.g. one per restart or per sample.
  RngStream child(std::string_view purpose, std::uint64_t index = 0) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t key() const noexcept { return key_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);
  double normal();
  /// Laplace with unit scale.
  double laplace();
  /// Uniform integer on [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

 private:
  RngStream(std::uint64_t seed, std::uint64_t key);

  std::uint64_t seed_;
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace prb
