#include "spcl/losses.hpp"

#include <algorithm>
#include <cmath>

#include "spcl/error.hpp"

namespace spcl {

namespace {

constexpr double kRowSumTolerance = 1e-9;

void check_mmd_inputs(const Matrix& s, const Matrix& t, const MmdConfig& cfg) {
  cfg.validate();
  if (s.cols() != t.cols())
    throw ShapeError("mmd: feature dimension mismatch " + shape_string(s) + " vs " + shape_string(t));
  if (s.rows() == 0 || t.rows() == 0) throw ShapeError("mmd: empty batch");
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    d += diff * diff;
  }
  return d;
}

// Pairwise squared distances between rows of a and rows of b.
Matrix pairwise_sq(const Matrix& a, const Matrix& b) {
  Matrix d(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) d(i, j) = squared_distance(a.row(i), b.row(j));
  return d;
}

double kernel_sum(const Matrix& sq, double inv_two_sigma_sq) {
  double s = 0.0;
  for (double v : sq.data()) s += std::exp(-v * inv_two_sigma_sq);
  return s;
}

// Adds  coef * sum_j k(x_i, y_j) (x_i - y_j)  to grad row i, for all i.
void accumulate_kernel_grad(const Matrix& x, const Matrix& y, const Matrix& sq,
                            double inv_two_sigma_sq, double coef, Matrix& grad) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto gi = grad.row(i);
    auto xi = x.row(i);
    for (std::size_t j = 0; j < y.rows(); ++j) {
      const double w = coef * std::exp(-sq(i, j) * inv_two_sigma_sq);
      auto yj = y.row(j);
      for (std::size_t k = 0; k < gi.size(); ++k) gi[k] += w * (xi[k] - yj[k]);
    }
  }
}

}  // namespace

SoftLabels::SoftLabels(Matrix probs) : probs_(std::move(probs)) {
  for (std::size_t r = 0; r < probs_.rows(); ++r) {
    double sum = 0.0;
    for (double p : probs_.row(r)) {
      if (!(p >= 0.0 && p <= 1.0))
        throw ValidationError("SoftLabels: row " + std::to_string(r) + " has entry outside [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance)
      throw ValidationError("SoftLabels: row " + std::to_string(r) + " sums to " +
                            std::to_string(sum) + ", not a distribution");
  }
}

SoftLabels SoftLabels::gather(std::span<const std::size_t> indices) const {
  return SoftLabels(probs_.gather_rows(indices));
}

void MmdConfig::validate() const {
  if (bandwidths.empty()) throw ValidationError("MmdConfig: at least one bandwidth required");
  for (double s : bandwidths)
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("MmdConfig: bandwidths must be positive");
}

Matrix softmax(const Matrix& logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ValidationError("softmax: temperature must be positive");
  if (!logits.all_finite()) throw ValidationError("softmax: non-finite logits");
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto z = logits.row(r);
    auto out = p.row(r);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      out[c] = std::exp((z[c] - zmax) / temperature);
      sum += out[c];
    }
    for (double& v : out) v /= sum;
  }
  return p;
}

LossResult cross_entropy(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows())
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.rows()) + " rows");
  if (logits.rows() == 0) throw ShapeError("cross_entropy: empty batch");
  const auto classes = static_cast<int>(logits.cols());
  for (int y : labels)
    if (y < 0 || y >= classes)
      throw ValidationError("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                            std::to_string(classes) + ")");

  LossResult res;
  res.grad = softmax(logits, 1.0);
  const double inv_n = 1.0 / static_cast<double>(logits.rows());
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto z = logits.row(r);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    total += std::log(sum) - (z[static_cast<std::size_t>(labels[r])] - zmax);
    res.grad(r, static_cast<std::size_t>(labels[r])) -= 1.0;
  }
  res.grad *= inv_n;
  res.value = total * inv_n;
  return res;
}

LossResult kl_distill(const Matrix& student_logits, const SoftLabels& teacher, double temperature) {
  const Matrix& t = teacher.probs();
  if (t.rows() != student_logits.rows() || t.cols() != student_logits.cols())
    throw ShapeError("kl_distill: student " + shape_string(student_logits) + " vs teacher " +
                     shape_string(t));
  if (t.rows() == 0) throw ShapeError("kl_distill: empty batch");

  LossResult res;
  const Matrix p = softmax(student_logits, temperature);
  const double inv_n = 1.0 / static_cast<double>(t.rows());
  double total = 0.0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto z = student_logits.row(r);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp((v - zmax) / temperature);
    const double log_norm = std::log(sum);
    for (std::size_t c = 0; c < t.cols(); ++c) {
      const double tc = t(r, c);
      if (tc > 0.0) {
        const double log_p = (z[c] - zmax) / temperature - log_norm;
        total += tc * (std::log(tc) - log_p);
      }
    }
  }
  res.value = temperature * temperature * total * inv_n;
  res.grad = p - t;
  res.grad *= temperature * inv_n;
  return res;
}

MmdResult mmd(const Matrix& source, const Matrix& target, const MmdConfig& cfg) {
  check_mmd_inputs(source, target, cfg);
  const double n = static_cast<double>(source.rows());
  const double m = static_cast<double>(target.rows());
  const Matrix ss = pairwise_sq(source, source);
  const Matrix tt = pairwise_sq(target, target);
  const Matrix st = pairwise_sq(source, target);
  const Matrix ts = st.transposed();

  MmdResult res;
  res.grad_source = Matrix(source.rows(), source.cols());
  res.grad_target = Matrix(target.rows(), target.cols());
  for (double sigma : cfg.bandwidths) {
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    const double inv_s2 = 1.0 / (sigma * sigma);
    res.value += kernel_sum(ss, inv2s2) / (n * n) + kernel_sum(tt, inv2s2) / (m * m) -
                 2.0 * (kernel_sum(st, inv2s2) / (n * m));
    // d/dx k(x, y) = -k(x, y) (x - y) / sigma^2
    accumulate_kernel_grad(source, source, ss, inv2s2, -2.0 * inv_s2 / (n * n), res.grad_source);
    accumulate_kernel_grad(source, target, st, inv2s2, 2.0 * inv_s2 / (n * m), res.grad_source);
    accumulate_kernel_grad(target, target, tt, inv2s2, -2.0 * inv_s2 / (m * m), res.grad_target);
    accumulate_kernel_grad(target, source, ts, inv2s2, 2.0 * inv_s2 / (n * m), res.grad_target);
  }
  return res;
}

double mmd_value(const Matrix& source, const Matrix& target, const MmdConfig& cfg) {
  check_mmd_inputs(source, target, cfg);
  const double n = static_cast<double>(source.rows());
  const double m = static_cast<double>(target.rows());
  const Matrix ss = pairwise_sq(source, source);
  const Matrix tt = pairwise_sq(target, target);
  const Matrix st = pairwise_sq(source, target);
  double value = 0.0;
  for (double sigma : cfg.bandwidths) {
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    value += kernel_sum(ss, inv2s2) / (n * n) + kernel_sum(tt, inv2s2) / (m * m) -
             2.0 * (kernel_sum(st, inv2s2) / (n * m));
  }
  return value;
}

}  // namespace spcl
