#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace spcl {

/// Dense row-major matrix of doubles.
///
/// Constructors taking explicit data reject NaN/Inf entries. Arithmetic
/// helpers never reorder accumulation, so results are reproducible
/// bit-for-bit for a given input.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  [[nodiscard]] std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

  [[nodiscard]] Matrix transposed() const;

  /// Rows selected by index, in the given order.
  [[nodiscard]] Matrix gather_rows(std::span<const std::size_t> indices) const;

  /// Rows [begin, end).
  [[nodiscard]] Matrix slice_rows(std::size_t begin, std::size_t end) const;

  [[nodiscard]] bool all_finite() const noexcept;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s) noexcept;

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

  static Matrix identity(std::size_t n);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);

/// Standard product. Each output entry accumulates over k in increasing order.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Vertical concatenation; column counts must agree.
Matrix vstack(const Matrix& top, const Matrix& bottom);

/// Frobenius norm.
double frobenius_norm(const Matrix& m);

/// "RxC" for error messages.
std::string shape_string(const Matrix& m);

}  // namespace spcl
