// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "spcl/experiment.hpp"
#include "spcl/gradcheck.hpp"

using namespace spcl;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void verdict(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  %2d %-28s %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

void info(const std::string& text) {
  std::printf("INFO     %s\n", text.c_str());
  std::fflush(stdout);
}

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + num(x, 3);
  return "[" + s + "]";
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

ExperimentConfig benchmark() { return parse_config("", "<benchmark>"); }

// One trial's data and stage-1 teacher, shared by several criteria.
struct Trial {
  ExperimentConfig cfg;
  LabeledDomain source;
  UnlabeledDomain target;
  TrainResult stage1;
  double stage1_target_acc = 0.0;
};

Trial make_trial(const ExperimentConfig& base, std::uint64_t seed) {
  const ExperimentConfig cfg = trial_config(base, seed);
  auto [src, tgt] = generate_pair(cfg.shift);
  Trial t{cfg, std::move(src), std::move(tgt), {MlpModel::init(cfg.stage1.model_spec), {}}, 0.0};
  t.stage1 = train_stage1(t.source, t.target.samples(), cfg.stage1);
  t.stage1_target_acc = target_evaluator(t.target)(t.stage1.model);
  return t;
}

double stage2_acc(const Trial& t, const std::function<void(Stage2Config&)>& tweak = {}) {
  Stage2Config c = t.cfg.stage2;
  if (tweak) tweak(c);
  const TrainResult r = train_stage2(t.source, t.target.samples(), t.stage1.model, c);
  return target_evaluator(t.target)(r.model);
}

// ---------------------------------------------------------------------------

void gradient_correctness() {
  Rng rng(20240601);
  double worst_ce = 0, worst_kl = 0, worst_mmd = 0, worst_model = 0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t n = 1 + rng.index(5), c = 2 + rng.index(5);
    const Matrix z = oracle::random_matrix(rng, n, c, 2.0);
    std::vector<int> y(n);
    for (int& v : y) v = static_cast<int>(rng.index(c));
    worst_ce = std::max(worst_ce,
                        relative_error(cross_entropy(z, y).grad,
                                       finite_difference_gradient(
                                           [&](const Matrix& m) { return cross_entropy(m, y).value; }, z)));
    const SoftLabels t(oracle::random_distribution(rng, n, c));
    const double tau = 0.5 + 3.0 * rng.uniform();
    worst_kl = std::max(worst_kl,
                        relative_error(kl_distill(z, t, tau).grad,
                                       finite_difference_gradient(
                                           [&](const Matrix& m) { return kl_distill(m, t, tau).value; }, z)));
  }
  for (int i = 0; i < 20; ++i) {
    const std::size_t n = 1 + rng.index(5), m = 1 + rng.index(5), d = 1 + rng.index(6);
    const Matrix s = oracle::random_matrix(rng, n, d), t = oracle::random_matrix(rng, m, d);
    const MmdConfig cfg;
    const MmdResult r = mmd(s, t, cfg);
    worst_mmd = std::max(
        {worst_mmd,
         relative_error(r.grad_source, finite_difference_gradient(
                                           [&](const Matrix& x) { return mmd(x, t, cfg).value; }, s)),
         relative_error(r.grad_target, finite_difference_gradient(
                                           [&](const Matrix& x) { return mmd(s, x, cfg).value; }, t))});
  }
  for (int i = 0; i < 20; ++i) {
    const int in = 1 + static_cast<int>(rng.index(6));
    const int hid = 1 + static_cast<int>(rng.index(6));
    const int feat = 1 + static_cast<int>(rng.index(6));
    const int out = 2 + static_cast<int>(rng.index(5));
    MlpModel model = MlpModel::init(MlpSpec{in, {hid, feat}, out, rng.next()});
    for (auto& l : model.layers())
      for (double& b : l.bias.data()) b = 0.3 * rng.gaussian();
    const std::size_t batch = 1 + rng.index(5);
    const Matrix x = oracle::random_matrix(rng, batch, static_cast<std::size_t>(in));
    std::vector<int> y(batch);
    for (int& v : y) v = static_cast<int>(rng.index(static_cast<std::size_t>(out)));
    const Matrix h = oracle::random_matrix(rng, batch, static_cast<std::size_t>(feat));
    // Loss: cross-entropy on the logits plus a linear probe on the features.
    const auto loss = [&](const MlpModel& m) {
      const ForwardTrace tr = m.forward(x);
      double v = cross_entropy(tr.logits(), y).value;
      for (std::size_t k = 0; k < h.size(); ++k) v += h.data()[k] * tr.features().data()[k];
      return v;
    };
    const ForwardTrace tr = model.forward(x);
    const Gradients g = model.backward(tr, cross_entropy(tr.logits(), y).grad, &h);
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
      for (bool bias : {false, true}) {
        const Matrix& p = bias ? model.layers()[l].bias : model.layers()[l].weight;
        const Matrix numeric = finite_difference_gradient(
            [&](const Matrix& q) {
              MlpModel probe = model;
              (bias ? probe.layers()[l].bias : probe.layers()[l].weight) = q;
              return loss(probe);
            },
            p);
        worst_model = std::max(
            worst_model, relative_error(bias ? g.layers[l].bias : g.layers[l].weight, numeric));
      }
    }
  }
  const double worst = std::max({worst_ce, worst_kl, worst_mmd, worst_model});
  verdict(1, "gradient correctness", worst <= 1e-5,
          "max rel err ce=" + sci(worst_ce) + " kl=" + sci(worst_kl) + " mmd=" + sci(worst_mmd) +
              " model=" + sci(worst_model) + " (tol 1e-5)");
}

void schedule_closed_forms() {
  auto at = [](const char* name, double r) { return lambda_at(ScheduleSpec::parse(name), r); };
  // Expected values evaluated directly from the closed forms.
  const double e = std::exp(1.0);
  struct Case {
    const char* name;
    double r, expected;
  };
  const std::vector<Case> cases{
      {"steep_exp_increment", 0.0, 0.0},
      {"steep_exp_increment", 0.5, 2.0 / (1.0 + std::pow(e, -5.0)) - 1.0},
      {"steep_exp_increment", 1.0, 2.0 / (1.0 + std::pow(e, -10.0)) - 1.0},
      {"step_exp_decrement", 0.0, 1.0},
      {"flat_exp_increment", 1.0, 1.0},
      {"cosine", 0.5, 1.0 - std::sqrt(0.5)},
  };
  bool ok = true;
  double worst = 0.0;
  for (const Case& c : cases) worst = std::max(worst, std::abs(at(c.name, c.r) - c.expected));
  ok &= worst <= 1e-6;
  ok &= std::abs(at("steep_exp_increment", 0.5) - 0.986614) <= 1e-6;
  ok &= std::abs(at("steep_exp_increment", 1.0) - 0.9999092) <= 1e-6;
  ok &= std::abs(at("cosine", 0.5) - 0.292893) <= 1e-6;

  std::size_t grid_violations = 0;
  for (const ScheduleSpec& s : ablation_schedules()) {
    double prev = lambda_at(s, 0.0);
    for (int i = 0; i <= 1000; ++i) {
      const double v = lambda_at(s, i / 1000.0);
      if (v < 0.0 || v > 1.0) ++grid_violations;
      if (is_increment(s.mechanism) && v < prev) ++grid_violations;
      if (s.mechanism == Mechanism::step_exp_decrement && v > prev) ++grid_violations;
      prev = v;
    }
  }
  ok &= grid_violations == 0;
  const double lr1 = lr_at(LrSpec{}, 1.0);
  ok &= std::abs(lr1 - 0.0016556) <= 1e-6;
  verdict(2, "schedule closed forms", ok,
          "max |err|=" + sci(worst) + ", grid violations=" + std::to_string(grid_violations) +
              ", lr(1)=" + num(lr1, 7));
}

void pseudo_label_risk_gap() {
  Rng rng(77);
  // Risks are ratios of counts over the same n, so 1e-12 only absorbs rounding.
  std::size_t violations = 0, checks = 0;
  double worst_excess = -1.0;
  for (int mi = 0; mi < 50; ++mi) {
    const MlpModel h = MlpModel::init(MlpSpec{2, {8}, 3, rng.next()});
    const Matrix x = oracle::random_matrix(rng, 60, 2, 3.0);
    Labels truth(60);
    for (int& v : truth) v = static_cast<int>(rng.index(3));
    const double true_risk = risk_01(h, x, truth);
    for (int ci = 0; ci < 50; ++ci) {
      const double flip = rng.uniform();
      Matrix pseudo(60, 3);
      for (std::size_t i = 0; i < 60; ++i) {
        const int label = rng.uniform() < flip ? static_cast<int>(rng.index(3)) : truth[i];
        pseudo(i, static_cast<std::size_t>(label)) = 1.0;
      }
      const SoftLabels p(std::move(pseudo));
      const double gap = std::abs(risk_01(h, x, harden(p)) - true_risk);
      ++checks;
      worst_excess = std::max(worst_excess, gap - rho(p, truth));
      if (gap > rho(p, truth) + 1e-12) ++violations;
    }
  }
  verdict(3, "pseudo-label risk gap <= rho", violations == 0,
          std::to_string(violations) + " violations in " + std::to_string(checks) +
              " checks, max gap - rho=" + sci(worst_excess));
}

void mmd_oracle() {
  Rng rng(99);
  double worst = 0.0, min_value = 1.0;
  bool identical_zero = true;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 1 + rng.index(5), m = 1 + rng.index(5), d = 1 + rng.index(6);
    const Matrix s = oracle::random_matrix(rng, n, d), t = oracle::random_matrix(rng, m, d, 2.0);
    const MmdConfig cfg;
    const double v = mmd(s, t, cfg).value;
    worst = std::max(worst, std::abs(v - oracle::mmd_brute(s, t, cfg.bandwidths)));
    min_value = std::min(min_value, v);
    identical_zero &= mmd(s, s, cfg).value == 0.0;
  }
  verdict(4, "mmd oracle equivalence", worst <= 1e-12 && identical_zero && min_value >= 0.0,
          "max |mmd - brute|=" + sci(worst) + ", identical==0: " + (identical_zero ? "yes" : "no") +
              ", min value=" + sci(min_value));
}

// Stage-1 teachers on the benchmark shift, one per seed, reused by 5, 6, 8 and 10.
std::vector<Trial> benchmark_trials() {
  std::vector<Trial> trials;
  for (std::uint64_t s : kSeeds) trials.push_back(make_trial(benchmark(), s));
  return trials;
}

void stage2_improvement(const std::vector<Trial>& trials) {
  std::vector<double> s1, s2, gain;
  int not_worse = 0;
  for (const Trial& t : trials) {
    s1.push_back(t.stage1_target_acc);
    s2.push_back(stage2_acc(t));
    gain.push_back(s2.back() - s1.back());
    not_worse += s2.back() >= s1.back();
  }
  verdict(5, "stage-2 improvement", not_worse >= 4 && mean(gain) > 0.0,
          "stage1=" + list(s1) + " stage2=" + list(s2) + " not-worse=" + std::to_string(not_worse) +
              "/5 mean gain=" + num(mean(gain)));
}

void schedule_ordering(const std::vector<Trial>& trials) {
  std::vector<std::string> names;
  std::vector<double> means;
  for (const ScheduleSpec& spec : ablation_schedules()) {
    std::vector<double> acc;
    for (const Trial& t : trials) acc.push_back(stage2_acc(t, [&](Stage2Config& c) { c.schedule = spec; }));
    names.push_back(spec.name());
    means.push_back(mean(acc));
  }
  auto find = [&](const std::string& n) {
    return means[static_cast<std::size_t>(std::find(names.begin(), names.end(), n) - names.begin())];
  };
  std::vector<double> inc, fixed;
  const auto specs = ablation_schedules();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (is_increment(specs[i].mechanism)) inc.push_back(means[i]);
    if (specs[i].mechanism == Mechanism::fixed) fixed.push_back(means[i]);
  }
  const double steep = find("steep_exp_increment"), dec = find("step_exp_decrement");
  std::string detail = "steep=" + num(steep) + " decrement=" + num(dec) + " increments=" + num(mean(inc)) +
                       " fixed=" + num(mean(fixed));
  verdict(6, "schedule ordering", steep >= dec && mean(inc) >= mean(fixed), detail);
}

void soft_vs_hard() {
  ExperimentConfig base = benchmark();
  base.stage1.epochs = std::max(1, base.stage1.epochs / 4);
  std::vector<double> soft, hard;
  for (std::uint64_t s : kSeeds) {
    const Trial t = make_trial(base, s);
    soft.push_back(stage2_acc(t, [](Stage2Config& c) { c.label_mode = LabelMode::soft; }));
    hard.push_back(stage2_acc(t, [](Stage2Config& c) { c.label_mode = LabelMode::hard; }));
  }
  verdict(7, "soft vs hard labels", mean(soft) >= mean(hard),
          "soft=" + list(soft) + " hard=" + list(hard) + " means " + num(mean(soft)) + " vs " +
              num(mean(hard)));
}

double source_only_acc(const ExperimentConfig& base, std::uint64_t seed) {
  ExperimentConfig cfg = trial_config(base, seed);
  cfg.stage1.align_weight = 0.0;
  auto [src, tgt] = generate_pair(cfg.shift);
  return target_evaluator(tgt)(train_stage1(src, tgt.samples(), cfg.stage1).model);
}

void alignment_effect(const std::vector<Trial>& trials) {
  std::vector<double> aligned, plain;
  for (const Trial& t : trials) {
    aligned.push_back(t.stage1_target_acc);
    plain.push_back(source_only_acc(benchmark(), t.cfg.shift.seed));
  }
  ExperimentConfig zero = benchmark();
  zero.shift.rotation_deg = 0.0;
  std::vector<double> z_aligned, z_plain;
  for (std::uint64_t s : kSeeds) {
    z_aligned.push_back(make_trial(zero, s).stage1_target_acc);
    z_plain.push_back(source_only_acc(zero, s));
  }
  const double diff = std::abs(mean(z_aligned) - mean(z_plain));
  verdict(8, "alignment effect", mean(aligned) >= mean(plain) && diff <= 0.03,
          "shifted " + num(mean(aligned)) + " vs source-only " + num(mean(plain)) +
              "; zero-shift |diff|=" + num(diff));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism() {
  const fs::path root = fs::temp_directory_path() / "spcl_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "run.cfg";
  std::ofstream(cfg) << "seeds = 1, 2\n";
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string("\"") + SPCL_CLI_PATH + "\" --config \"" + cfg.string() +
                            "\" --out \"" + (root / run).string() + "\" run > \"" +
                            (root / (std::string(run) + ".log")).string() + "\" 2>&1";
    ok &= std::system(cmd.c_str()) == 0;
  }
  std::size_t compared = 0, differing = 0;
  if (ok) {
    std::vector<fs::path> files{artifact::summary};
    for (const char* seed : {"seed_1", "seed_2"})
      for (const char* f : {artifact::stage1_ckpt, artifact::stage2_ckpt})
        files.push_back(fs::path(seed) / f);
    for (const fs::path& f : files) {
      ++compared;
      const std::string a = slurp(root / "a" / f), b = slurp(root / "b" / f);
      if (a.empty() || a != b) ++differing;
    }
  }
  verdict(9, "determinism", ok && compared > 0 && differing == 0,
          ok ? std::to_string(compared) + " files compared, " + std::to_string(differing) + " differ"
             : std::string("cli run failed"));
}

void bound_sanity(const std::vector<Trial>& trials) {
  const Trial& t = trials.front();
  const SoftLabels pseudo = extract_soft_labels(t.stage1.model, t.target.samples(), t.cfg.stage2.temperature);
  const BoundReport r = bound_report(t.stage1.model, t.source, t.target, pseudo, t.cfg.probe,
                                     t.cfg.stage1.mmd, derive_seed(t.cfg.shift.seed, 5));
  const bool ok = r.target_risk <= r.bound_rhs &&
                  std::abs(r.pseudo_target_risk - r.target_risk) <= r.rho + 1e-12;
  verdict(10, "bound sanity", ok,
          "target_risk=" + num(r.target_risk) + " bound_rhs=" + num(r.bound_rhs) +
              " pseudo_risk=" + num(r.pseudo_target_risk) + " rho=" + num(r.rho));
}

// Not criteria: the same comparisons on a shift hard enough that stage 1 is
// not already perfect.
void harder_shift_diagnostics() {
  ExperimentConfig hard = benchmark();
  hard.shift.rotation_deg = 45.0;
  hard.shift.noise_sigma = 1.0;
  std::vector<double> s1, s2, plain, gain;
  std::vector<std::vector<double>> alpha_acc(3);
  const double alphas[] = {0.5, 1.0, 2.0};
  for (std::uint64_t s : kSeeds) {
    const Trial t = make_trial(hard, s);
    s1.push_back(t.stage1_target_acc);
    s2.push_back(stage2_acc(t));
    gain.push_back(s2.back() - s1.back());
    plain.push_back(source_only_acc(hard, s));
    for (std::size_t a = 0; a < 3; ++a)
      alpha_acc[a].push_back(
          a == 1 ? s2.back() : stage2_acc(t, [&](Stage2Config& c) { c.schedule.alpha = alphas[a]; }));
  }
  info("harder shift (45 deg, sigma 1.0): source-only=" + list(plain) + " stage1=" + list(s1) +
       " stage2=" + list(s2) + " mean gain=" + num(mean(gain)));
  info("harder shift alpha sweep: alpha=0.5 " + num(mean(alpha_acc[0])) + ", alpha=1 " +
       num(mean(alpha_acc[1])) + ", alpha=2 " + num(mean(alpha_acc[2])));
}

}  // namespace

int main() {
  try {
    gradient_correctness();
    schedule_closed_forms();
    pseudo_label_risk_gap();
    mmd_oracle();
    const std::vector<Trial> trials = benchmark_trials();
    stage2_improvement(trials);
    schedule_ordering(trials);
    soft_vs_hard();
    alignment_effect(trials);
    determinism();
    bound_sanity(trials);
    harder_shift_diagnostics();
  } catch (const std::exception& e) {
    std::printf("FAIL     aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
