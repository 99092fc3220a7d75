#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "spcl/losses.hpp"
#include "spcl/model.hpp"
#include "spcl/pipeline.hpp"
#include "spcl/synthdata.hpp"

namespace spcl {

/// Fraction of rows whose argmax logit matches the label. Throws on empty input.
double accuracy(const MlpModel& model, const Matrix& features, std::span<const int> labels);

/// Empirical 0/1 risk, 1 - accuracy.
double risk_01(const MlpModel& model, const Matrix& features, std::span<const int> labels);

/// Fraction of samples whose hardened pseudo-label disagrees with the truth.
double rho(const SoftLabels& pseudo, std::span<const int> true_labels);

/// Target accuracy against the domain's hidden labels. Throws ValidationError
/// if the domain carries none. The evaluator references `target`, which must
/// outlive it.
TargetEvaluator target_evaluator(const UnlabeledDomain& target);

/// Probe training for the combined-risk estimate.
struct ProbeConfig {
  MlpSpec spec{2, {16}, 3, 0};
  int trials = 3;
  SupervisedConfig train;
};

/// Trains `trials` probes on source (true labels) union target (pseudo-labels)
/// and returns the smallest source risk + pseudo-labeled target risk seen.
/// Probe i uses init and shuffle seeds derived from (seed, i), so a run with
/// more trials extends the candidate set of a run with fewer.
double estimate_ct(const LabeledDomain& source, const Matrix& target_features,
                   std::span<const int> pseudo_hard, const ProbeConfig& probe, std::uint64_t seed);

/// Measured terms of the target-risk bound for one stage-1 model. mmd_proxy is
/// the feature-layer MMD between the full domains, standing in for the
/// H-delta-H divergence, so bound_rhs is a proxy bound.
struct BoundReport {
  double rho = 0.0;
  double source_risk = 0.0;
  double target_risk = 0.0;
  double pseudo_target_risk = 0.0;
  double c_t_estimate = 0.0;
  double mmd_proxy = 0.0;
  double bound_rhs = 0.0;
};

/// Requires hidden labels on `target`. The stage-1 model itself is included
/// among the combined-risk candidates.
BoundReport bound_report(const MlpModel& stage1_model, const LabeledDomain& source,
                         const UnlabeledDomain& target, const SoftLabels& pseudo,
                         const ProbeConfig& probe, const MmdConfig& mmd, std::uint64_t seed);

std::string to_json(const BoundReport& report);
void write_bound_json(const BoundReport& report, const std::filesystem::path& path);

}  // namespace spcl
