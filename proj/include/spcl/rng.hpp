#pragma once

#include <cstddef>
#include <cstdint>

namespace spcl {

/// SplitMix64 generator. The stream depends only on the seed, so results are
/// identical across platforms and compilers. Not thread-safe; give each
/// execution context its own instance.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

  /// Next raw 64-bit word.
  std::uint64_t next() noexcept;

  /// Uniform double in [0, 1) built from the top 53 bits.
  double uniform() noexcept;

  /// Standard normal via Box-Muller; consumes two uniforms per call.
  double gaussian() noexcept;

  /// Uniform integer in [0, n). n must be nonzero.
  std::size_t index(std::size_t n) noexcept;

  [[nodiscard]] std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

/// Decorrelated child seed for a named sub-stream of `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept;

}  // namespace spcl
