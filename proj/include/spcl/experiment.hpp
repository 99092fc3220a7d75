#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spcl/metrics.hpp"
#include "spcl/pipeline.hpp"
#include "spcl/synthdata.hpp"

namespace spcl {

/// Everything one experiment needs. Per-trial seeds are derived from the
/// entries of `seeds` by trial_config().
struct ExperimentConfig {
  ShiftSpec shift;
  Stage1Config stage1;
  Stage2Config stage2;
  ProbeConfig probe;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::filesystem::path output_dir = "spcl_out";

  void validate() const;
};

/// Parses `key = value` lines with dotted keys; `#` starts a comment.
/// Unknown keys and bad values raise ValidationError naming the key and line.
ExperimentConfig parse_config(std::string_view text, std::string_view origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Config for one trial: dataset, init and shuffle seeds all derived from
/// `seed`; model input/class counts taken from the shift spec.
ExperimentConfig trial_config(const ExperimentConfig& cfg, std::uint64_t seed);

/// Fixed file names inside a trial directory.
namespace artifact {
inline constexpr const char* source = "source.txt";
inline constexpr const char* target = "target.txt";
inline constexpr const char* stage1_ckpt = "stage1.ckpt";
inline constexpr const char* stage1_report = "stage1_report.csv";
inline constexpr const char* soft_labels = "soft_labels.txt";
inline constexpr const char* stage2_ckpt = "stage2.ckpt";
inline constexpr const char* stage2_report = "stage2_report.csv";
inline constexpr const char* bound = "bound.json";
inline constexpr const char* summary = "summary.json";
}  // namespace artifact

struct TrialOutcome {
  std::uint64_t seed = 0;
  double stage1_source_acc = 0.0;
  double stage1_target_acc = 0.0;
  double stage2_source_acc = 0.0;
  double stage2_target_acc = 0.0;
  BoundReport bound;
};

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;  // sample std / sqrt(n); 0 when n < 2
};

MeanStderr mean_stderr(const std::vector<double>& values);

/// Full pipeline for one trial config, writing every artifact into `dir`.
TrialOutcome run_trial(const ExperimentConfig& trial, std::uint64_t seed,
                       const std::filesystem::path& dir);

/// Runs every seed under output_dir/seed_<s>/ and writes output_dir/summary.json.
std::vector<TrialOutcome> run_experiment(const ExperimentConfig& cfg);

std::string summary_json(const std::vector<TrialOutcome>& outcomes);

enum class SweepAxis { schedule, label_mode, init_mode };
SweepAxis parse_sweep_axis(std::string_view s);
std::string to_string(SweepAxis a);

/// Every variant name the axis accepts by default.
std::vector<std::string> default_variants(SweepAxis axis);

struct SweepCell {
  std::string variant;
  std::uint64_t seed = 0;
  double target_acc = 0.0;
};

struct SweepRow {
  std::string variant;
  std::string description;
  MeanStderr target_acc;
  std::size_t n = 0;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::schedule;
  std::vector<SweepCell> cells;  // variant-major, seeds in config order
  std::vector<SweepRow> rows;
};

/// Applies one named variant of `axis` to a stage-2 config. Unknown names
/// raise ValidationError listing the valid ones.
void apply_variant(Stage2Config& cfg, SweepAxis axis, std::string_view variant);

/// Trains stage 1 once per seed, then stage 2 for every variant. Artifacts
/// go under output_dir/sweep_<axis>/; the tables are written to
/// sweep_<axis>.csv (aggregate) and sweep_<axis>_cells.csv (per seed).
SweepResult run_sweep(const ExperimentConfig& cfg, SweepAxis axis,
                      const std::vector<std::string>& variants);

void write_sweep_csv(const SweepResult& result, const std::filesystem::path& aggregate_path,
                     const std::filesystem::path& cells_path);

/// Merges training-report CSVs into long format (run_id,epoch,series,value),
/// skipping NaN cells, and appends a lambda-vs-progress curve for each of the
/// ablation mechanisms on a 101-point grid (run_id `schedule:<name>`).
void emit_curves(const std::vector<std::filesystem::path>& report_csvs,
                 const std::filesystem::path& out_path);

}  // namespace spcl
