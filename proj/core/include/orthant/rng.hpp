#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

#include <Eigen/Core>

namespace orthant {

/// xoshiro256++ generator with a cached spare normal deviate.
///
/// Satisfies UniformRandomBitGenerator so it can drive <random> utilities,
/// but `uniform()` and `normal()` are implemented here so that sample
/// streams are identical across standard library implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  /// Uniform on the open interval (0, 1), 53 bits of resolution.
  double uniform() noexcept;

  /// Standard normal deviate (Marsaglia polar method).
  double normal() noexcept;

  void fill_normal(Eigen::Ref<Eigen::MatrixXd> out) noexcept;

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// A position in a tree of statistically independent random streams.
///
/// Streams are addressed by a root seed plus a path of names and integer
/// indices, e.g. `Stream(7).named("remainder/inner").sub(42)`. Deriving a
/// child never consumes randomness from the parent, so estimator stages and
/// replications can be reordered or parallelised without changing results.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) noexcept;

  [[nodiscard]] Stream named(std::string_view name) const noexcept;
  [[nodiscard]] Stream sub(std::uint64_t index) const noexcept;
  [[nodiscard]] Rng rng() const noexcept { return Rng(key_); }
  [[nodiscard]] std::uint64_t key() const noexcept { return key_; }

 private:
  struct RawKey {};
  Stream(RawKey, std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t key_;
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

}  // namespace orthant
