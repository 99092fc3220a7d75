#pragma once

#include <span>
#include <vector>

#include "spcl/matrix.hpp"

namespace spcl {

/// Per-sample class probabilities, one row per target sample.
class SoftLabels {
 public:
  /// Throws ValidationError unless every row lies in [0,1] and sums to 1 within 1e-9.
  explicit SoftLabels(Matrix probs);

  [[nodiscard]] const Matrix& probs() const noexcept { return probs_; }
  [[nodiscard]] std::size_t size() const noexcept { return probs_.rows(); }
  [[nodiscard]] std::size_t num_classes() const noexcept { return probs_.cols(); }

  /// Rows selected by index; still a valid distribution per row.
  [[nodiscard]] SoftLabels gather(std::span<const std::size_t> indices) const;

 private:
  Matrix probs_;
};

/// Gaussian-kernel MMD settings. The loss is the sum of per-bandwidth values.
struct MmdConfig {
  std::vector<double> bandwidths{0.5, 1.0, 2.0, 4.0};

  void validate() const;
};

struct LossResult {
  double value = 0.0;
  Matrix grad;  // d value / d logits
};

struct MmdResult {
  double value = 0.0;
  Matrix grad_source;
  Matrix grad_target;
};

/// Row-wise softmax(z / temperature), computed from max-shifted logits.
Matrix softmax(const Matrix& logits, double temperature = 1.0);

/// Mean negative log-likelihood of `labels`; gradient (softmax - onehot) / batch.
LossResult cross_entropy(const Matrix& logits, std::span<const int> labels);

/// temperature^2 * mean_b KL(teacher_b || softmax(student_b / temperature)).
/// Gradient: temperature * (softmax(student / temperature) - teacher) / batch.
LossResult kl_distill(const Matrix& student_logits, const SoftLabels& teacher, double temperature);

/// Biased (V-statistic) MMD^2 between two feature batches with analytic gradients.
MmdResult mmd(const Matrix& source, const Matrix& target, const MmdConfig& cfg);

/// Same value as mmd(), without gradients.
double mmd_value(const Matrix& source, const Matrix& target, const MmdConfig& cfg);

}  // namespace spcl
