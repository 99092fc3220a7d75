#include "spcl/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "spcl/error.hpp"
#include "spcl/rng.hpp"

namespace spcl {

namespace {

std::size_t count_hits(const MlpModel& model, const Matrix& features, std::span<const int> labels) {
  if (features.rows() == 0) throw ValidationError("accuracy: empty input");
  if (features.rows() != labels.size())
    throw ShapeError("accuracy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(features.rows()) + " rows");
  const auto pred = predict(model, features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i];
  return hits;
}

}  // namespace

double accuracy(const MlpModel& model, const Matrix& features, std::span<const int> labels) {
  const std::size_t hits = count_hits(model, features, labels);
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double risk_01(const MlpModel& model, const Matrix& features, std::span<const int> labels) {
  const std::size_t misses = labels.size() - count_hits(model, features, labels);
  return static_cast<double>(misses) / static_cast<double>(labels.size());
}

double rho(const SoftLabels& pseudo, std::span<const int> true_labels) {
  if (pseudo.size() != true_labels.size())
    throw ShapeError("rho: " + std::to_string(pseudo.size()) + " pseudo-labels for " +
                     std::to_string(true_labels.size()) + " true labels");
  if (true_labels.empty()) throw ValidationError("rho: empty input");
  const Labels hard = harden(pseudo);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < hard.size(); ++i) wrong += hard[i] != true_labels[i];
  return static_cast<double>(wrong) / static_cast<double>(hard.size());
}

TargetEvaluator target_evaluator(const UnlabeledDomain& target) {
  if (!target.hidden_labels) throw ValidationError("target domain has no evaluation labels");
  return [&features = target.features, &labels = *target.hidden_labels](const MlpModel& m) {
    return accuracy(m, features, labels);
  };
}

double estimate_ct(const LabeledDomain& source, const Matrix& target_features,
                   std::span<const int> pseudo_hard, const ProbeConfig& probe, std::uint64_t seed) {
  if (probe.trials < 1) throw ValidationError("estimate_ct: trials must be at least 1");
  if (target_features.rows() != pseudo_hard.size())
    throw ShapeError("estimate_ct: pseudo-label count does not match target rows");
  const Matrix x = vstack(source.features, target_features);
  std::vector<int> y(source.labels.begin(), source.labels.end());
  y.insert(y.end(), pseudo_hard.begin(), pseudo_hard.end());

  double best = 2.0;
  for (int i = 0; i < probe.trials; ++i) {
    MlpSpec spec = probe.spec;
    spec.init_seed = derive_seed(seed, 2 * static_cast<std::uint64_t>(i));
    SupervisedConfig train = probe.train;
    train.seed = derive_seed(seed, 2 * static_cast<std::uint64_t>(i) + 1);
    const MlpModel h = train_supervised(x, y, spec, train);
    best = std::min(best, risk_01(h, source.features, source.labels) +
                              risk_01(h, target_features, pseudo_hard));
  }
  return best;
}

BoundReport bound_report(const MlpModel& stage1_model, const LabeledDomain& source,
                         const UnlabeledDomain& target, const SoftLabels& pseudo,
                         const ProbeConfig& probe, const MmdConfig& mmd, std::uint64_t seed) {
  if (!target.hidden_labels) throw ValidationError("bound_report: target has no hidden labels");
  const Labels& truth = *target.hidden_labels;
  const Labels pseudo_hard = harden(pseudo);

  BoundReport r;
  r.rho = rho(pseudo, truth);
  r.source_risk = risk_01(stage1_model, source.features, source.labels);
  r.target_risk = risk_01(stage1_model, target.features, truth);
  r.pseudo_target_risk = risk_01(stage1_model, target.features, pseudo_hard);
  r.c_t_estimate = std::min(estimate_ct(source, target.features, pseudo_hard, probe, seed),
                            r.source_risk + r.pseudo_target_risk);
  r.mmd_proxy = mmd_value(stage1_model.forward(source.features).features(),
                          stage1_model.forward(target.features).features(), mmd);
  r.bound_rhs = r.source_risk + 0.5 * r.mmd_proxy + r.c_t_estimate + r.rho;
  return r;
}

std::string to_json(const BoundReport& r) {
  nlohmann::ordered_json j;
  j["rho"] = r.rho;
  j["source_risk"] = r.source_risk;
  j["target_risk"] = r.target_risk;
  j["pseudo_target_risk"] = r.pseudo_target_risk;
  j["c_t_estimate"] = r.c_t_estimate;
  j["mmd_proxy"] = r.mmd_proxy;
  j["bound_rhs"] = r.bound_rhs;
  return j.dump(2);
}

void write_bound_json(const BoundReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << to_json(report) << '\n';
}

}  // namespace spcl
