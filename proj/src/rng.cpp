#include "spcl/rng.hpp"

#include <cmath>
#include <numbers>

namespace spcl {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;

}  // namespace

std::uint64_t Rng::next() noexcept {
  state_ += kGolden;
  return mix(state_);
}

double Rng::uniform() noexcept { return static_cast<double>(next() >> 11) * kTwoPow53Inv; }

double Rng::gaussian() noexcept {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 == 0.0) u1 = kTwoPow53Inv;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) noexcept { return static_cast<std::size_t>(next() % n); }

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  return mix(base + kGolden * (stream + 1));
}

}  // namespace spcl
