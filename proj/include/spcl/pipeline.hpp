#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spcl/losses.hpp"
#include "spcl/model.hpp"
#include "spcl/schedule.hpp"
#include "spcl/synthdata.hpp"

namespace spcl {

/// Plain SGD hyper-parameters shared by every training loop.
struct SgdSettings {
  LrSpec lr;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double head_lr_mult = 10.0;  // multiplier on the output layer's learning rate

  void validate() const;
};

struct Stage1Config {
  MlpSpec model_spec;
  MmdConfig mmd;
  double align_weight = 1.0;
  int epochs = 100;
  int batch_size = 32;
  SgdSettings sgd;
  std::uint64_t seed = 0;  // minibatch shuffling

  void validate() const;
};

enum class LabelMode { soft, hard };
enum class InitMode { fresh, from_stage1 };

LabelMode parse_label_mode(std::string_view s);
InitMode parse_init_mode(std::string_view s);
std::string to_string(LabelMode m);
std::string to_string(InitMode m);

struct Stage2Config {
  MlpSpec model_spec;
  ScheduleSpec schedule;
  LabelMode label_mode = LabelMode::soft;
  InitMode init_mode = InitMode::fresh;
  double temperature = 2.0;
  int epochs = 200;
  int batch_size = 32;
  SgdSettings sgd;
  MmdConfig mmd;  // only for the reported feature discrepancy
  std::uint64_t seed = 0;

  void validate() const;
};

/// Momentum buffers, one per parameter, zero-initialized.
struct OptimizerState {
  Gradients velocity;

  static OptimizerState for_model(const MlpModel& model) { return {model.zeros_like()}; }
};

/// v <- momentum v + (grad + weight_decay param);  param <- param - lr mult_l v.
void sgd_step(MlpModel& model, const Gradients& grads, OptimizerState& opt, double lr,
              double momentum, double weight_decay, std::span<const double> per_layer_lr_mult);

/// 1 for every layer except the output layer, which gets `head_mult`.
std::vector<double> head_lr_multipliers(const MlpModel& model, double head_mult);

struct EpochRecord {
  int epoch = 0;
  double lambda = 0.0;
  double lr = 0.0;
  double source_ce = 0.0;
  double target_loss = 0.0;
  double mmd = 0.0;
  double source_acc = 0.0;
  double target_acc = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

/// Per-epoch metrics. Stage 1 reports lambda as NaN and target_loss as the
/// weighted alignment term; mmd is the mean minibatch feature MMD in both
/// stages. target_acc is NaN when no evaluator was supplied.
struct TrainingReport {
  std::vector<EpochRecord> epochs;
  std::string checkpoint_path;
};

inline constexpr const char* kReportCsvHeader =
    "epoch,lambda,lr,source_ce,target_loss,mmd,source_acc,target_acc";

void write_report_csv(const TrainingReport& report, const std::filesystem::path& path);

/// Scores a model on the target domain. Built by the metrics module from
/// evaluation-only labels so training code never sees them.
using TargetEvaluator = std::function<double(const MlpModel&)>;

struct TrainResult {
  MlpModel model;
  TrainingReport report;
};

/// Cross-entropy on source plus align_weight x MMD between source and target
/// features of each paired minibatch.
TrainResult train_stage1(const LabeledDomain& source, TargetSamples target, const Stage1Config& cfg,
                         const TargetEvaluator& evaluate_target = {});

/// softmax(teacher logits / temperature) for every target sample.
SoftLabels extract_soft_labels(const MlpModel& teacher, TargetSamples target, double temperature);

/// Row-wise argmax, ties to the lowest class.
Labels harden(const SoftLabels& labels);

/// Curriculum distillation: per epoch T (1-based), lambda = lambda_at(T / epochs)
/// and each minibatch minimizes alpha lambda L_target + (1 - lambda) L_CE(source).
TrainResult train_stage2(const LabeledDomain& source, TargetSamples target, const MlpModel& teacher,
                         const Stage2Config& cfg, const TargetEvaluator& evaluate_target = {});

struct SupervisedConfig {
  int epochs = 30;
  int batch_size = 32;
  SgdSettings sgd;
  std::uint64_t seed = 0;
};

/// Plain minibatch cross-entropy training on (x, y).
MlpModel train_supervised(const Matrix& x, std::span<const int> y, const MlpSpec& spec,
                          const SupervisedConfig& cfg);

}  // namespace spcl
