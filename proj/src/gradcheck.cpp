#include "spcl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "spcl/error.hpp"

namespace spcl {

Matrix finite_difference_gradient(const ScalarFunction& f, const Matrix& x, double h) {
  if (!(h > 0.0)) throw ValidationError("finite_difference_gradient: step must be positive");
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double orig = x(r, c);
      probe(r, c) = orig + h;
      const double up = f(probe);
      probe(r, c) = orig - h;
      const double down = f(probe);
      probe(r, c) = orig;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw ValidationError("finite_difference_gradient: non-finite value at entry (" +
                              std::to_string(r) + ", " + std::to_string(c) + ")");
      }
      grad(r, c) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

double relative_error(const Matrix& a, const Matrix& b) {
  const double denom = std::max(frobenius_norm(a), frobenius_norm(b));
  if (denom == 0.0) return 0.0;
  return frobenius_norm(a - b) / denom;
}

}  // namespace spcl
