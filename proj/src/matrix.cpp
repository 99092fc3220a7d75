#include "spcl/matrix.hpp"

#include <cmath>

#include "spcl/error.hpp"

namespace spcl {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (!std::isfinite(fill)) throw ValidationError("Matrix: non-finite fill value");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Matrix: data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw ValidationError("Matrix: non-finite entry at (" + std::to_string(i / cols_) + ", " +
                            std::to_string(i % cols_) + ")");
    }
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer list");
    for (double v : r) {
      if (!std::isfinite(v)) throw ValidationError("Matrix: non-finite entry in initializer");
      data_.push_back(v);
    }
  }
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw ShapeError("gather_rows: index out of range");
    auto src = row(indices[i]);
    auto dst = out.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

Matrix Matrix::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows_) throw ShapeError("slice_rows: range out of bounds");
  Matrix out(end - begin, cols_);
  std::copy(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
            data_.begin() + static_cast<std::ptrdiff_t>(end * cols_), out.data_.begin());
  return out;
}

bool Matrix::all_finite() const noexcept {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) noexcept {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + shape_string(a) + " x " + shape_string(b));
  }
  Matrix out(a.rows(), b.cols());
  // i-k-j order: out(i, j) still accumulates over k left to right.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto src = b.row(k);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  if (top.cols() != bottom.cols()) {
    throw ShapeError("vstack: column mismatch " + shape_string(top) + " vs " +
                     shape_string(bottom));
  }
  Matrix out(top.rows() + bottom.rows(), top.cols());
  auto dst = out.data();
  std::copy(top.data().begin(), top.data().end(), dst.begin());
  std::copy(bottom.data().begin(), bottom.data().end(),
            dst.begin() + static_cast<std::ptrdiff_t>(top.size()));
  return out;
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace spcl
