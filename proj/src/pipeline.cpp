#include "spcl/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "spcl/error.hpp"
#include "spcl/rng.hpp"

namespace spcl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  std::iota(v.begin(), v.end(), std::size_t{0});
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

// Paired minibatches over two index sets. The shorter side wraps around so
// every step sees the same number of rows from both.
class PairedBatches {
 public:
  PairedBatches(std::size_t n_source, std::size_t n_target, std::size_t batch_size)
      : source_(n_source), target_(n_target), batch_(batch_size) {}

  void reshuffle(Rng& rng) {
    shuffle(source_, rng);
    shuffle(target_, rng);
  }

  [[nodiscard]] std::size_t steps() const {
    const std::size_t longest = std::max(source_.size(), target_.size());
    return (longest + batch_ - 1) / batch_;
  }

  void indices(std::size_t step, std::vector<std::size_t>& src, std::vector<std::size_t>& tgt) const {
    const std::size_t longest = std::max(source_.size(), target_.size());
    const std::size_t begin = step * batch_;
    const std::size_t count = std::min(batch_, longest - begin);
    src.resize(count);
    tgt.resize(count);
    for (std::size_t j = 0; j < count; ++j) {
      src[j] = source_[(begin + j) % source_.size()];
      tgt[j] = target_[(begin + j) % target_.size()];
    }
  }

 private:
  std::vector<std::size_t> source_;
  std::vector<std::size_t> target_;
  std::size_t batch_;
};

std::vector<int> gather_labels(const Labels& labels, std::span<const std::size_t> idx) {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
  return out;
}

double accuracy_of(const MlpModel& model, const Matrix& x, const Labels& y) {
  const auto pred = predict(model, x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += pred[i] == y[i];
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

void check_domains(const LabeledDomain& source, const TargetSamples& target, const MlpSpec& spec) {
  source.validate();
  if (target.features.rows() == 0) throw ValidationError("target domain is empty");
  if (source.features.cols() != target.features.cols())
    throw ShapeError("source has " + std::to_string(source.features.cols()) +
                     " features, target has " + std::to_string(target.features.cols()));
  if (static_cast<std::size_t>(spec.input_dim) != source.features.cols())
    throw ShapeError("model input_dim " + std::to_string(spec.input_dim) +
                     " does not match feature dimension " + std::to_string(source.features.cols()));
  if (spec.num_classes != source.num_classes || target.num_classes != source.num_classes)
    throw ValidationError("model, source and target must agree on num_classes");
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void SgdSettings::validate() const {
  lr.validate();
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be non-negative");
  if (!(head_lr_mult > 0.0)) throw ValidationError("head_lr_mult must be positive");
}

void Stage1Config::validate() const {
  model_spec.validate();
  mmd.validate();
  sgd.validate();
  if (!(align_weight >= 0.0)) throw ValidationError("stage1.align_weight must be non-negative");
  if (epochs < 1) throw ValidationError("stage1.epochs must be at least 1");
  if (batch_size < 2) throw ValidationError("stage1.batch_size must be at least 2");
}

void Stage2Config::validate() const {
  model_spec.validate();
  schedule.validate();
  sgd.validate();
  mmd.validate();
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ValidationError("stage2.temperature must be positive");
  if (epochs < 1) throw ValidationError("stage2.epochs must be at least 1");
  if (batch_size < 1) throw ValidationError("stage2.batch_size must be at least 1");
}

LabelMode parse_label_mode(std::string_view s) {
  if (s == "soft") return LabelMode::soft;
  if (s == "hard") return LabelMode::hard;
  throw ValidationError("unknown label_mode '" + std::string(s) + "'; valid names: soft, hard");
}

InitMode parse_init_mode(std::string_view s) {
  if (s == "fresh") return InitMode::fresh;
  if (s == "from_stage1") return InitMode::from_stage1;
  throw ValidationError("unknown init_mode '" + std::string(s) + "'; valid names: fresh, from_stage1");
}

std::string to_string(LabelMode m) { return m == LabelMode::soft ? "soft" : "hard"; }
std::string to_string(InitMode m) { return m == InitMode::fresh ? "fresh" : "from_stage1"; }

void sgd_step(MlpModel& model, const Gradients& grads, OptimizerState& opt, double lr,
              double momentum, double weight_decay, std::span<const double> per_layer_lr_mult) {
  auto& layers = model.layers();
  if (grads.layers.size() != layers.size() || opt.velocity.layers.size() != layers.size() ||
      per_layer_lr_mult.size() != layers.size())
    throw ShapeError("sgd_step: layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const double step = lr * per_layer_lr_mult[l];
    auto update = [&](Matrix& param, const Matrix& grad, Matrix& vel) {
      if (grad.rows() != param.rows() || grad.cols() != param.cols() ||
          vel.rows() != param.rows() || vel.cols() != param.cols())
        throw ShapeError("sgd_step: shape mismatch in layer " + std::to_string(l));
      auto p = param.data();
      auto g = grad.data();
      auto v = vel.data();
      for (std::size_t i = 0; i < p.size(); ++i) {
        v[i] = momentum * v[i] + (g[i] + weight_decay * p[i]);
        p[i] -= step * v[i];
      }
    };
    update(layers[l].weight, grads.layers[l].weight, opt.velocity.layers[l].weight);
    update(layers[l].bias, grads.layers[l].bias, opt.velocity.layers[l].bias);
  }
}

std::vector<double> head_lr_multipliers(const MlpModel& model, double head_mult) {
  std::vector<double> m(model.num_layers(), 1.0);
  m.back() = head_mult;
  return m;
}

void write_report_csv(const TrainingReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << kReportCsvHeader << '\n';
  for (const auto& e : report.epochs) {
    os << e.epoch << ',' << fmt(e.lambda) << ',' << fmt(e.lr) << ',' << fmt(e.source_ce) << ','
       << fmt(e.target_loss) << ',' << fmt(e.mmd) << ',' << fmt(e.source_acc) << ','
       << fmt(e.target_acc) << '\n';
  }
  if (!os) throw IoError("write failed for " + path.string());
}

TrainResult train_stage1(const LabeledDomain& source, TargetSamples target, const Stage1Config& cfg,
                         const TargetEvaluator& evaluate_target) {
  cfg.validate();
  check_domains(source, target, cfg.model_spec);

  MlpModel model = MlpModel::init(cfg.model_spec);
  OptimizerState opt = OptimizerState::for_model(model);
  const auto mults = head_lr_multipliers(model, cfg.sgd.head_lr_mult);
  Rng rng(cfg.seed);
  PairedBatches batches(source.features.rows(), target.features.rows(),
                        static_cast<std::size_t>(cfg.batch_size));
  const std::size_t classes = static_cast<std::size_t>(cfg.model_spec.num_classes);

  TrainingReport report;
  std::vector<std::size_t> src_idx, tgt_idx;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double r = static_cast<double>(epoch) / cfg.epochs;
    const double lr = lr_at(cfg.sgd.lr, r);
    batches.reshuffle(rng);
    double ce_sum = 0.0, mmd_sum = 0.0;
    const std::size_t steps = batches.steps();
    for (std::size_t step = 0; step < steps; ++step) {
      batches.indices(step, src_idx, tgt_idx);
      const std::size_t b = src_idx.size();
      const auto ys = gather_labels(source.labels, src_idx);
      const ForwardTrace trace = model.forward(
          vstack(source.features.gather_rows(src_idx), target.features.gather_rows(tgt_idx)));

      const LossResult ce = cross_entropy(trace.logits().slice_rows(0, b), ys);
      Matrix dlogits(2 * b, classes);
      std::copy(ce.grad.data().begin(), ce.grad.data().end(), dlogits.data().begin());

      const Matrix fs = trace.features().slice_rows(0, b);
      const Matrix ft = trace.features().slice_rows(b, 2 * b);
      Gradients grads;
      if (cfg.align_weight > 0.0) {
        const MmdResult m = mmd(fs, ft, cfg.mmd);
        Matrix dfeat = vstack(m.grad_source, m.grad_target);
        dfeat *= cfg.align_weight;
        grads = model.backward(trace, dlogits, &dfeat);
        mmd_sum += m.value;
      } else {
        grads = model.backward(trace, dlogits);
        mmd_sum += mmd_value(fs, ft, cfg.mmd);
      }
      ce_sum += ce.value;
      sgd_step(model, grads, opt, lr, cfg.sgd.momentum, cfg.sgd.weight_decay, mults);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lambda = kNaN;
    rec.lr = lr;
    rec.source_ce = ce_sum / static_cast<double>(steps);
    rec.mmd = mmd_sum / static_cast<double>(steps);
    rec.target_loss = cfg.align_weight * rec.mmd;
    rec.source_acc = accuracy_of(model, source.features, source.labels);
    rec.target_acc = evaluate_target ? evaluate_target(model) : kNaN;
    report.epochs.push_back(rec);
  }
  if (!model.all_finite()) throw ValidationError("stage 1 diverged: non-finite parameters");
  return {std::move(model), std::move(report)};
}

SoftLabels extract_soft_labels(const MlpModel& teacher, TargetSamples target, double temperature) {
  if (target.features.cols() != static_cast<std::size_t>(teacher.spec().input_dim))
    throw ShapeError("extract_soft_labels: teacher expects " +
                     std::to_string(teacher.spec().input_dim) + " features, target has " +
                     std::to_string(target.features.cols()));
  return SoftLabels(softmax(teacher.logits(target.features), temperature));
}

Labels harden(const SoftLabels& labels) { return argmax_rows(labels.probs()); }

TrainResult train_stage2(const LabeledDomain& source, TargetSamples target, const MlpModel& teacher,
                         const Stage2Config& cfg, const TargetEvaluator& evaluate_target) {
  cfg.validate();
  const MlpSpec& spec = cfg.init_mode == InitMode::fresh ? cfg.model_spec : teacher.spec();
  check_domains(source, target, spec);
  if (teacher.spec().input_dim != spec.input_dim || teacher.spec().num_classes != spec.num_classes)
    throw ShapeError("train_stage2: teacher and student disagree on input or class count");

  MlpModel model = cfg.init_mode == InitMode::fresh ? MlpModel::init(cfg.model_spec) : teacher;
  OptimizerState opt = OptimizerState::for_model(model);
  const auto mults = head_lr_multipliers(model, cfg.sgd.head_lr_mult);

  // The teacher is frozen, so its softened outputs are computed once.
  const SoftLabels soft = extract_soft_labels(teacher, target, cfg.temperature);
  const Labels hard = harden(soft);

  Rng rng(cfg.seed);
  PairedBatches batches(source.features.rows(), target.features.rows(),
                        static_cast<std::size_t>(cfg.batch_size));

  TrainingReport report;
  std::vector<std::size_t> src_idx, tgt_idx;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double r = static_cast<double>(epoch) / cfg.epochs;
    const double lambda = lambda_at(cfg.schedule, r);
    const auto [target_w, source_w] = blend_weights(cfg.schedule, r);
    const double lr = lr_at(cfg.sgd.lr, r);
    batches.reshuffle(rng);
    double ce_sum = 0.0, tgt_sum = 0.0, mmd_sum = 0.0;
    const std::size_t steps = batches.steps();
    for (std::size_t step = 0; step < steps; ++step) {
      batches.indices(step, src_idx, tgt_idx);
      const std::size_t b = src_idx.size();
      const ForwardTrace trace = model.forward(
          vstack(source.features.gather_rows(src_idx), target.features.gather_rows(tgt_idx)));
      const Matrix zs = trace.logits().slice_rows(0, b);
      const Matrix zt = trace.logits().slice_rows(b, 2 * b);

      LossResult ce = cross_entropy(zs, gather_labels(source.labels, src_idx));
      LossResult tl = cfg.label_mode == LabelMode::soft
                          ? kl_distill(zt, soft.gather(tgt_idx), cfg.temperature)
                          : cross_entropy(zt, gather_labels(hard, tgt_idx));
      ce_sum += ce.value;
      tgt_sum += tl.value;
      mmd_sum += mmd_value(trace.features().slice_rows(0, b), trace.features().slice_rows(b, 2 * b),
                           cfg.mmd);

      ce.grad *= source_w;
      tl.grad *= target_w;
      const Gradients grads = model.backward(trace, vstack(ce.grad, tl.grad));
      sgd_step(model, grads, opt, lr, cfg.sgd.momentum, cfg.sgd.weight_decay, mults);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lambda = lambda;
    rec.lr = lr;
    rec.source_ce = ce_sum / static_cast<double>(steps);
    rec.target_loss = tgt_sum / static_cast<double>(steps);
    rec.mmd = mmd_sum / static_cast<double>(steps);
    rec.source_acc = accuracy_of(model, source.features, source.labels);
    rec.target_acc = evaluate_target ? evaluate_target(model) : kNaN;
    report.epochs.push_back(rec);
  }
  if (!model.all_finite()) throw ValidationError("stage 2 diverged: non-finite parameters");
  return {std::move(model), std::move(report)};
}

MlpModel train_supervised(const Matrix& x, std::span<const int> y, const MlpSpec& spec,
                          const SupervisedConfig& cfg) {
  spec.validate();
  cfg.sgd.validate();
  if (x.rows() == 0 || x.rows() != y.size()) throw ShapeError("train_supervised: empty or mismatched data");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw ValidationError("train_supervised: bad epochs/batch");
  MlpModel model = MlpModel::init(spec);
  OptimizerState opt = OptimizerState::for_model(model);
  const auto mults = head_lr_multipliers(model, cfg.sgd.head_lr_mult);
  Rng rng(cfg.seed);
  std::vector<std::size_t> perm(x.rows());
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<int> yb;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = lr_at(cfg.sgd.lr, static_cast<double>(epoch) / cfg.epochs);
    shuffle(perm, rng);
    for (std::size_t begin = 0; begin < perm.size(); begin += batch) {
      const std::span<const std::size_t> idx(perm.data() + begin, std::min(batch, perm.size() - begin));
      yb.resize(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = y[idx[i]];
      const ForwardTrace trace = model.forward(x.gather_rows(idx));
      const LossResult ce = cross_entropy(trace.logits(), yb);
      sgd_step(model, model.backward(trace, ce.grad), opt, lr, cfg.sgd.momentum,
               cfg.sgd.weight_decay, mults);
    }
  }
  return model;
}

}  // namespace spcl
