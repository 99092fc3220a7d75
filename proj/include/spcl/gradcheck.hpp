#pragma once

#include <functional>

#include "spcl/matrix.hpp"

namespace spcl {

using ScalarFunction = std::function<double(const Matrix&)>;

/// Central-difference gradient of `f` at `x`: (f(x + h e_i) - f(x - h e_i)) / 2h
/// for every entry. Throws ValidationError naming the entry if `f` is not
/// finite at a perturbed point.
Matrix finite_difference_gradient(const ScalarFunction& f, const Matrix& x, double h = 1e-5);

/// ||a - b|| / max(||a||, ||b||), or 0 when both are zero.
double relative_error(const Matrix& a, const Matrix& b);

}  // namespace spcl
