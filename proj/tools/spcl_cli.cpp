// spcl: command-line runner for the two-stage adaptation experiments.
//
//   spcl generate --config exp.cfg --out run/      # source.txt, target.txt
//   spcl stage1   --config exp.cfg --out run/      # stage1.ckpt, stage1_report.csv
//   spcl extract  --config exp.cfg --out run/      # soft_labels.txt
//   spcl stage2   --config exp.cfg --out run/      # stage2.ckpt, stage2_report.csv
//   spcl bound    --config exp.cfg --out run/      # bound.json
//   spcl run      --config exp.cfg [--seed N]      # everything, per seed, + summary.json
//   spcl sweep    --config exp.cfg --axis schedule [--variants a,b]
//   spcl curves   --out plots/ run/seed_1/stage2_report.csv ...

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "spcl/error.hpp"
#include "spcl/experiment.hpp"
#include "spcl/metrics.hpp"
#include "spcl/pipeline.hpp"
#include "spcl/rng.hpp"
#include "spcl/synthdata.hpp"

namespace fs = std::filesystem;
using namespace spcl;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig resolve(const GlobalOptions& opt) {
  ExperimentConfig cfg = opt.config_path.empty() ? parse_config("", "<defaults>")
                                                 : load_config(opt.config_path);
  if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
  if (opt.seed) cfg.seeds = {*opt.seed};
  return cfg;
}

// Single-stage verbs work on one trial: the first configured seed.
ExperimentConfig single_trial(const GlobalOptions& opt) {
  const ExperimentConfig cfg = resolve(opt);
  return trial_config(cfg, cfg.seeds.front());
}

void cmd_generate(const GlobalOptions& opt) {
  const auto t = single_trial(opt);
  fs::create_directories(t.output_dir);
  const auto [source, target] = generate_pair(t.shift);
  save_domain(source, t.output_dir / artifact::source);
  save_domain(target, t.output_dir / artifact::target);
  std::cout << "wrote " << (t.output_dir / artifact::source).string() << " and "
            << (t.output_dir / artifact::target).string() << '\n';
}

void cmd_stage1(const GlobalOptions& opt) {
  const auto t = single_trial(opt);
  const auto source = load_labeled_domain(t.output_dir / artifact::source);
  const auto target = load_unlabeled_domain(t.output_dir / artifact::target);
  const TargetEvaluator eval = target.hidden_labels ? target_evaluator(target) : TargetEvaluator{};
  auto res = train_stage1(source, target.samples(), t.stage1, eval);
  res.report.checkpoint_path = (t.output_dir / artifact::stage1_ckpt).string();
  save_checkpoint(res.model, t.output_dir / artifact::stage1_ckpt);
  write_report_csv(res.report, t.output_dir / artifact::stage1_report);
  const auto& last = res.report.epochs.back();
  std::cout << "stage1: source_acc=" << last.source_acc << " target_acc=" << last.target_acc << '\n';
}

void cmd_extract(const GlobalOptions& opt) {
  const auto t = single_trial(opt);
  const auto target = load_unlabeled_domain(t.output_dir / artifact::target);
  const auto teacher = load_checkpoint(t.output_dir / artifact::stage1_ckpt, t.stage1.model_spec);
  const auto soft = extract_soft_labels(teacher, target.samples(), t.stage2.temperature);
  save_matrix(soft.probs(), t.output_dir / artifact::soft_labels);
  std::cout << "wrote " << (t.output_dir / artifact::soft_labels).string() << '\n';
}

void cmd_stage2(const GlobalOptions& opt) {
  const auto t = single_trial(opt);
  const auto source = load_labeled_domain(t.output_dir / artifact::source);
  const auto target = load_unlabeled_domain(t.output_dir / artifact::target);
  const auto teacher = load_checkpoint(t.output_dir / artifact::stage1_ckpt, t.stage1.model_spec);
  const TargetEvaluator eval = target.hidden_labels ? target_evaluator(target) : TargetEvaluator{};
  auto res = train_stage2(source, target.samples(), teacher, t.stage2, eval);
  res.report.checkpoint_path = (t.output_dir / artifact::stage2_ckpt).string();
  save_checkpoint(res.model, t.output_dir / artifact::stage2_ckpt);
  write_report_csv(res.report, t.output_dir / artifact::stage2_report);
  const auto& last = res.report.epochs.back();
  std::cout << "stage2: source_acc=" << last.source_acc << " target_acc=" << last.target_acc << '\n';
}

void cmd_bound(const GlobalOptions& opt) {
  const auto t = single_trial(opt);
  const auto source = load_labeled_domain(t.output_dir / artifact::source);
  const auto target = load_unlabeled_domain(t.output_dir / artifact::target);
  const auto teacher = load_checkpoint(t.output_dir / artifact::stage1_ckpt, t.stage1.model_spec);
  const auto soft = extract_soft_labels(teacher, target.samples(), t.stage2.temperature);
  const auto report = bound_report(teacher, source, target, soft, t.probe, t.stage1.mmd,
                                   derive_seed(t.seeds.front(), 5));
  write_bound_json(report, t.output_dir / artifact::bound);
  std::cout << to_json(report) << '\n';
}

void cmd_run(const GlobalOptions& opt) {
  const auto cfg = resolve(opt);
  const auto outcomes = run_experiment(cfg);
  std::cout << summary_json(outcomes) << '\n';
}

void cmd_sweep(const GlobalOptions& opt, const std::string& axis_name,
               std::vector<std::string> variants) {
  const auto cfg = resolve(opt);
  const SweepAxis axis = parse_sweep_axis(axis_name);
  if (variants.empty()) variants = default_variants(axis);
  const auto result = run_sweep(cfg, axis, variants);
  for (const auto& row : result.rows)
    std::cout << row.variant << ": " << row.target_acc.mean << " +- " << row.target_acc.stderr_
              << " (n=" << row.n << ")\n";
}

void cmd_curves(const GlobalOptions& opt, const std::vector<std::string>& inputs) {
  std::vector<fs::path> paths(inputs.begin(), inputs.end());
  const fs::path out = (opt.out_dir.empty() ? fs::path(".") : fs::path(opt.out_dir)) / "curves.csv";
  emit_curves(paths, out);
  std::cout << "wrote " << out.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage unsupervised domain adaptation experiments"};
  app.require_subcommand(1);

  GlobalOptions opt;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Run a single seed instead of the config's list");
  app.add_option("--config", opt.config_path, "Experiment config file")->check(CLI::ExistingFile);
  app.add_option("--out", opt.out_dir, "Output directory (overrides output_dir)");
  seed_opt->configurable(false);

  auto* generate = app.add_subcommand("generate", "Generate the source/target datasets");
  auto* stage1 = app.add_subcommand("stage1", "Train the aligned stage-1 model");
  auto* extract = app.add_subcommand("extract", "Extract soft pseudo-labels from stage 1");
  auto* stage2 = app.add_subcommand("stage2", "Train the stage-2 curriculum model");
  auto* bound = app.add_subcommand("bound", "Measure the risk-bound terms for stage 1");
  auto* run = app.add_subcommand("run", "Full pipeline for every configured seed");

  auto* sweep = app.add_subcommand("sweep", "Ablation sweep over one stage-2 axis");
  std::string axis;
  std::vector<std::string> variants;
  sweep->add_option("--axis", axis, "schedule | label_mode | init_mode")->required();
  sweep->add_option("--variants", variants, "Variant names (default: all for the axis)")
      ->delimiter(',');

  auto* curves = app.add_subcommand("curves", "Merge report CSVs into long-format plot data");
  std::vector<std::string> inputs;
  curves->add_option("reports", inputs, "Training report CSV files");

  // Global flags are accepted after the verb as well.
  for (auto* sub : {generate, stage1, extract, stage2, bound, run, sweep, curves}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) opt.seed = seed;

  try {
    if (*generate) cmd_generate(opt);
    else if (*stage1) cmd_stage1(opt);
    else if (*extract) cmd_extract(opt);
    else if (*stage2) cmd_stage2(opt);
    else if (*bound) cmd_bound(opt);
    else if (*run) cmd_run(opt);
    else if (*sweep) cmd_sweep(opt, axis, variants);
    else if (*curves) cmd_curves(opt, inputs);
  } catch (const spcl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
