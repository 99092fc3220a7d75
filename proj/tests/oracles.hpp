#pragma once
// Test-only reference computations, written independently of the library
// code paths they check.

#include <cmath>
#include <cstdint>
#include <vector>

#include "spcl/matrix.hpp"
#include "spcl/rng.hpp"

namespace oracle {

// SplitMix64 written directly from the published reference.
inline std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Plain double-loop biased MMD^2 with a Gaussian kernel, summed over bandwidths.
inline double mmd_brute(const spcl::Matrix& s, const spcl::Matrix& t,
                        const std::vector<double>& sigmas) {
  auto k = [](const spcl::Matrix& a, std::size_t i, const spcl::Matrix& b, std::size_t j,
              double sigma) {
    double d = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) d += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
    return std::exp(-d / (2.0 * sigma * sigma));
  };
  double total = 0.0;
  for (double sigma : sigmas) {
    double ss = 0.0, tt = 0.0, st = 0.0;
    for (std::size_t i = 0; i < s.rows(); ++i)
      for (std::size_t j = 0; j < s.rows(); ++j) ss += k(s, i, s, j, sigma);
    for (std::size_t i = 0; i < t.rows(); ++i)
      for (std::size_t j = 0; j < t.rows(); ++j) tt += k(t, i, t, j, sigma);
    for (std::size_t i = 0; i < s.rows(); ++i)
      for (std::size_t j = 0; j < t.rows(); ++j) st += k(s, i, t, j, sigma);
    const double n = static_cast<double>(s.rows());
    const double m = static_cast<double>(t.rows());
    total += ss / (n * n) + tt / (m * m) - 2.0 * st / (n * m);
  }
  return total;
}

inline spcl::Matrix random_matrix(spcl::Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  spcl::Matrix m(r, c);
  for (double& v : m.data()) v = scale * rng.gaussian();
  return m;
}

// A random probability row per sample, built from exponentials of gaussians.
inline spcl::Matrix random_distribution(spcl::Rng& rng, std::size_t r, std::size_t c) {
  spcl::Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += m(i, j) = std::exp(rng.gaussian());
    for (std::size_t j = 0; j < c; ++j) m(i, j) /= sum;
  }
  return m;
}

}  // namespace oracle
