#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spcl/matrix.hpp"

namespace spcl {

using Labels = std::vector<int>;

/// Labeled source samples.
struct LabeledDomain {
  Matrix features;  // N x d
  Labels labels;    // length N, entries in [0, num_classes)
  int num_classes = 0;
  std::string name;

  /// Throws ValidationError if the invariants do not hold.
  void validate() const;
};

/// Target samples as seen by training code: features only.
struct TargetSamples {
  const Matrix& features;
  int num_classes;
};

/// Unlabeled target domain. `hidden_labels` hold the ground truth for
/// evaluation and must never reach a training entry point; training code
/// receives `samples()` instead.
struct UnlabeledDomain {
  Matrix features;  // N x d
  int num_classes = 0;
  std::string name;
  std::optional<Labels> hidden_labels;

  [[nodiscard]] TargetSamples samples() const noexcept { return {features, num_classes}; }

  void validate() const;
};

/// Parameters of the synthetic domain-shift task.
struct ShiftSpec {
  int num_classes = 3;
  int dim = 2;
  int per_class_count = 200;
  double rotation_deg = 30.0;
  std::vector<double> translation;  // empty means zero; otherwise length dim
  double noise_sigma = 0.4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Radius of the circle the class means sit on.
inline constexpr double kClassMeanRadius = 4.0;

/// Class means: evenly spaced on a radius-4 circle in the first two coordinates,
/// zero elsewhere. Row k is the mean of class k.
Matrix class_means(const ShiftSpec& spec);

/// Rotates the first two coordinates of each row by `rotation_deg` and adds
/// `translation`, in place.
void apply_shift(const ShiftSpec& spec, Matrix& points);

/// Draws the source domain, then fresh samples from the same process that are
/// shifted to form the target. Rows are grouped by class in ascending order.
std::pair<LabeledDomain, UnlabeledDomain> generate_pair(const ShiftSpec& spec);

/// Text format: header `rows cols num_classes labeled`, then one sample per
/// line with features at 17 significant digits and a trailing label when
/// labeled=1.
void save_domain(const LabeledDomain& domain, const std::filesystem::path& path);
/// Unlabeled domains are written with labeled=1 when hidden labels are present.
void save_domain(const UnlabeledDomain& domain, const std::filesystem::path& path);

/// Requires labeled=1.
LabeledDomain load_labeled_domain(const std::filesystem::path& path);
/// Labels in the file, if any, become hidden labels.
UnlabeledDomain load_unlabeled_domain(const std::filesystem::path& path);

/// Writes a bare matrix in the same format with labeled=0 and num_classes=cols.
void save_matrix(const Matrix& m, const std::filesystem::path& path);
Matrix load_matrix(const std::filesystem::path& path);

}  // namespace spcl
