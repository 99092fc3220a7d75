#include "spcl/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>

#include "spcl/error.hpp"
#include "spcl/rng.hpp"

namespace spcl {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct ValueError {
  std::string what;
};

double to_real(const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(d))
    throw ValueError{"expected a real number, got '" + v + "'"};
  return d;
}

long long to_int(const std::string& v) {
  char* end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size()) throw ValueError{"expected an integer, got '" + v + "'"};
  return i;
}

std::uint64_t to_u64(const std::string& v) {
  if (v.empty() || v.front() == '-') throw ValueError{"expected a non-negative integer, got '" + v + "'"};
  char* end = nullptr;
  const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size()) throw ValueError{"expected a non-negative integer, got '" + v + "'"};
  return u;
}

std::vector<double> to_reals(const std::string& v) {
  std::vector<double> out;
  for (const auto& t : split_list(v)) out.push_back(to_real(t));
  return out;
}

std::vector<int> to_ints(const std::string& v) {
  std::vector<int> out;
  for (const auto& t : split_list(v)) out.push_back(static_cast<int>(to_int(t)));
  if (out.empty()) throw ValueError{"expected a non-empty integer list"};
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

void add_sgd_keys(std::map<std::string, Setter>& keys, const std::string& prefix,
                  std::function<SgdSettings&(ExperimentConfig&)> get) {
  keys[prefix + ".lr.eta0"] = [get](auto& c, const auto& v) { get(c).lr.eta0 = to_real(v); };
  keys[prefix + ".lr.gamma"] = [get](auto& c, const auto& v) { get(c).lr.gamma = to_real(v); };
  keys[prefix + ".lr.beta"] = [get](auto& c, const auto& v) { get(c).lr.beta = to_real(v); };
  keys[prefix + ".momentum"] = [get](auto& c, const auto& v) { get(c).momentum = to_real(v); };
  keys[prefix + ".weight_decay"] = [get](auto& c, const auto& v) { get(c).weight_decay = to_real(v); };
  keys[prefix + ".head_lr_mult"] = [get](auto& c, const auto& v) { get(c).head_lr_mult = to_real(v); };
}

const std::map<std::string, Setter>& config_keys() {
  static const std::map<std::string, Setter> keys = [] {
    std::map<std::string, Setter> k;
    k["shift.num_classes"] = [](auto& c, const auto& v) { c.shift.num_classes = static_cast<int>(to_int(v)); };
    k["shift.dim"] = [](auto& c, const auto& v) { c.shift.dim = static_cast<int>(to_int(v)); };
    k["shift.per_class_count"] = [](auto& c, const auto& v) { c.shift.per_class_count = static_cast<int>(to_int(v)); };
    k["shift.rotation_deg"] = [](auto& c, const auto& v) { c.shift.rotation_deg = to_real(v); };
    k["shift.translation"] = [](auto& c, const auto& v) { c.shift.translation = to_reals(v); };
    k["shift.noise_sigma"] = [](auto& c, const auto& v) { c.shift.noise_sigma = to_real(v); };

    k["stage1.hidden_dims"] = [](auto& c, const auto& v) { c.stage1.model_spec.hidden_dims = to_ints(v); };
    k["stage1.mmd.bandwidths"] = [](auto& c, const auto& v) { c.stage1.mmd.bandwidths = to_reals(v); };
    k["stage1.align_weight"] = [](auto& c, const auto& v) { c.stage1.align_weight = to_real(v); };
    k["stage1.epochs"] = [](auto& c, const auto& v) { c.stage1.epochs = static_cast<int>(to_int(v)); };
    k["stage1.batch_size"] = [](auto& c, const auto& v) { c.stage1.batch_size = static_cast<int>(to_int(v)); };
    add_sgd_keys(k, "stage1", [](ExperimentConfig& c) -> SgdSettings& { return c.stage1.sgd; });

    k["stage2.hidden_dims"] = [](auto& c, const auto& v) { c.stage2.model_spec.hidden_dims = to_ints(v); };
    k["stage2.schedule.mechanism"] = [](auto& c, const auto& v) {
      const double alpha = c.stage2.schedule.alpha;
      try {
        c.stage2.schedule = ScheduleSpec::parse(v, alpha);
      } catch (const ValidationError& e) {
        throw ValueError{e.what()};
      }
    };
    k["stage2.schedule.alpha"] = [](auto& c, const auto& v) { c.stage2.schedule.alpha = to_real(v); };
    k["stage2.label_mode"] = [](auto& c, const auto& v) {
      try {
        c.stage2.label_mode = parse_label_mode(v);
      } catch (const ValidationError& e) {
        throw ValueError{e.what()};
      }
    };
    k["stage2.init_mode"] = [](auto& c, const auto& v) {
      try {
        c.stage2.init_mode = parse_init_mode(v);
      } catch (const ValidationError& e) {
        throw ValueError{e.what()};
      }
    };
    k["stage2.temperature"] = [](auto& c, const auto& v) { c.stage2.temperature = to_real(v); };
    k["stage2.epochs"] = [](auto& c, const auto& v) { c.stage2.epochs = static_cast<int>(to_int(v)); };
    k["stage2.batch_size"] = [](auto& c, const auto& v) { c.stage2.batch_size = static_cast<int>(to_int(v)); };
    add_sgd_keys(k, "stage2", [](ExperimentConfig& c) -> SgdSettings& { return c.stage2.sgd; });

    k["probe.hidden_dims"] = [](auto& c, const auto& v) { c.probe.spec.hidden_dims = to_ints(v); };
    k["probe.trials"] = [](auto& c, const auto& v) { c.probe.trials = static_cast<int>(to_int(v)); };
    k["probe.epochs"] = [](auto& c, const auto& v) { c.probe.train.epochs = static_cast<int>(to_int(v)); };
    k["probe.batch_size"] = [](auto& c, const auto& v) { c.probe.train.batch_size = static_cast<int>(to_int(v)); };

    k["seeds"] = [](auto& c, const auto& v) {
      c.seeds.clear();
      for (const auto& t : split_list(v)) c.seeds.push_back(to_u64(t));
    };
    k["output_dir"] = [](auto& c, const auto& v) { c.output_dir = v; };
    return k;
  }();
  return keys;
}

// Model shapes follow the task; the stage-2 report uses stage-1's kernel.
void sync_shapes(ExperimentConfig& c) {
  for (MlpSpec* s : {&c.stage1.model_spec, &c.stage2.model_spec, &c.probe.spec}) {
    s->input_dim = c.shift.dim;
    s->num_classes = c.shift.num_classes;
  }
  c.stage2.mmd = c.stage1.mmd;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("write failed for " + path.string());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string variant_description(SweepAxis axis, std::string_view variant) {
  switch (axis) {
    case SweepAxis::schedule: return ScheduleSpec::parse(variant).formula();
    case SweepAxis::label_mode:
      return variant == "soft" ? "softened teacher probabilities (KL)" : "teacher argmax (CE)";
    case SweepAxis::init_mode:
      return variant == "fresh" ? "fresh random initialization" : "copy of stage-1 model";
  }
  return {};
}

}  // namespace

void ExperimentConfig::validate() const {
  shift.validate();
  stage1.validate();
  stage2.validate();
  probe.spec.validate();
  if (probe.trials < 1) throw ValidationError("probe.trials must be at least 1");
  if (probe.train.epochs < 1) throw ValidationError("probe.epochs must be at least 1");
  if (probe.train.batch_size < 1) throw ValidationError("probe.batch_size must be at least 1");
  if (seeds.empty()) throw ValidationError("seeds must be non-empty");
  if (output_dir.empty()) throw ValidationError("output_dir must be non-empty");
}

ExperimentConfig parse_config(std::string_view text, std::string_view origin) {
  ExperimentConfig cfg;
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  // Mechanism is applied after alpha regardless of order, so remember it.
  std::optional<std::pair<std::string, std::size_t>> mechanism;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = std::string(origin) + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ValidationError(where + "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto it = config_keys().find(key);
    if (it == config_keys().end()) throw ValidationError(where + "unknown key '" + key + "'");
    if (key == "stage2.schedule.mechanism") {
      mechanism = {value, lineno};
      continue;
    }
    try {
      it->second(cfg, value);
    } catch (const ValueError& e) {
      throw ValidationError(where + key + ": " + e.what);
    }
  }
  if (mechanism) {
    try {
      config_keys().at("stage2.schedule.mechanism")(cfg, mechanism->first);
    } catch (const ValueError& e) {
      throw ValidationError(std::string(origin) + ":" + std::to_string(mechanism->second) +
                            ": stage2.schedule.mechanism: " + e.what);
    }
  }
  sync_shapes(cfg);
  // Re-raise invariant violations with the config origin attached.
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(origin) + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path.string());
}

ExperimentConfig trial_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  ExperimentConfig t = cfg;
  sync_shapes(t);
  t.seeds = {seed};
  t.shift.seed = seed;
  t.stage1.model_spec.init_seed = derive_seed(seed, 1);
  t.stage1.seed = derive_seed(seed, 2);
  t.stage2.model_spec.init_seed = derive_seed(seed, 3);
  t.stage2.seed = derive_seed(seed, 4);
  return t;
}

MeanStderr mean_stderr(const std::vector<double>& values) {
  MeanStderr out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double n = static_cast<double>(values.size());
  out.mean = sum / n;
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return out;
}

TrialOutcome run_trial(const ExperimentConfig& trial, std::uint64_t seed, const fs::path& dir) {
  fs::create_directories(dir);
  const auto [source, target] = generate_pair(trial.shift);
  save_domain(source, dir / artifact::source);
  save_domain(target, dir / artifact::target);
  const TargetEvaluator eval = target_evaluator(target);

  auto s1 = train_stage1(source, target.samples(), trial.stage1, eval);
  s1.report.checkpoint_path = (dir / artifact::stage1_ckpt).string();
  save_checkpoint(s1.model, dir / artifact::stage1_ckpt);
  write_report_csv(s1.report, dir / artifact::stage1_report);

  const SoftLabels soft = extract_soft_labels(s1.model, target.samples(), trial.stage2.temperature);
  save_matrix(soft.probs(), dir / artifact::soft_labels);

  auto s2 = train_stage2(source, target.samples(), s1.model, trial.stage2, eval);
  s2.report.checkpoint_path = (dir / artifact::stage2_ckpt).string();
  save_checkpoint(s2.model, dir / artifact::stage2_ckpt);
  write_report_csv(s2.report, dir / artifact::stage2_report);

  const BoundReport bound = bound_report(s1.model, source, target, soft, trial.probe,
                                         trial.stage1.mmd, derive_seed(seed, 5));
  write_bound_json(bound, dir / artifact::bound);

  TrialOutcome out;
  out.seed = seed;
  out.stage1_source_acc = accuracy(s1.model, source.features, source.labels);
  out.stage1_target_acc = eval(s1.model);
  out.stage2_source_acc = accuracy(s2.model, source.features, source.labels);
  out.stage2_target_acc = eval(s2.model);
  out.bound = bound;
  return out;
}

std::vector<TrialOutcome> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<TrialOutcome> outcomes;
  for (std::uint64_t seed : cfg.seeds) {
    outcomes.push_back(run_trial(trial_config(cfg, seed), seed,
                                 cfg.output_dir / ("seed_" + std::to_string(seed))));
  }
  write_text(cfg.output_dir / artifact::summary, summary_json(outcomes) + "\n");
  return outcomes;
}

std::string summary_json(const std::vector<TrialOutcome>& outcomes) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["num_seeds"] = outcomes.size();
  ordered_json per_seed = ordered_json::array();
  std::vector<double> s1t, s2t, s1s, s2s, gain;
  for (const auto& o : outcomes) {
    ordered_json e;
    e["seed"] = o.seed;
    e["stage1_source_acc"] = o.stage1_source_acc;
    e["stage1_target_acc"] = o.stage1_target_acc;
    e["stage2_source_acc"] = o.stage2_source_acc;
    e["stage2_target_acc"] = o.stage2_target_acc;
    e["rho"] = o.bound.rho;
    e["bound_rhs"] = o.bound.bound_rhs;
    per_seed.push_back(e);
    s1s.push_back(o.stage1_source_acc);
    s1t.push_back(o.stage1_target_acc);
    s2s.push_back(o.stage2_source_acc);
    s2t.push_back(o.stage2_target_acc);
    gain.push_back(o.stage2_target_acc - o.stage1_target_acc);
  }
  j["seeds"] = per_seed;
  auto agg = [](const std::vector<double>& v) {
    const MeanStderr m = mean_stderr(v);
    return ordered_json{{"mean", m.mean}, {"stderr", m.stderr_}};
  };
  j["aggregate"] = ordered_json{{"stage1_source_acc", agg(s1s)},
                                {"stage1_target_acc", agg(s1t)},
                                {"stage2_source_acc", agg(s2s)},
                                {"stage2_target_acc", agg(s2t)},
                                {"target_improvement", agg(gain)}};
  return j.dump(2);
}

SweepAxis parse_sweep_axis(std::string_view s) {
  if (s == "schedule") return SweepAxis::schedule;
  if (s == "label_mode") return SweepAxis::label_mode;
  if (s == "init_mode") return SweepAxis::init_mode;
  throw ValidationError("unknown sweep axis '" + std::string(s) +
                        "'; valid axes: schedule, label_mode, init_mode");
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::schedule: return "schedule";
    case SweepAxis::label_mode: return "label_mode";
    case SweepAxis::init_mode: return "init_mode";
  }
  return {};
}

std::vector<std::string> default_variants(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::schedule: {
      std::vector<std::string> out;
      for (const auto& s : ablation_schedules()) out.push_back(s.name());
      return out;
    }
    case SweepAxis::label_mode: return {"soft", "hard"};
    case SweepAxis::init_mode: return {"fresh", "from_stage1"};
  }
  return {};
}

void apply_variant(Stage2Config& cfg, SweepAxis axis, std::string_view variant) {
  switch (axis) {
    case SweepAxis::schedule: cfg.schedule = ScheduleSpec::parse(variant, cfg.schedule.alpha); break;
    case SweepAxis::label_mode: cfg.label_mode = parse_label_mode(variant); break;
    case SweepAxis::init_mode: cfg.init_mode = parse_init_mode(variant); break;
  }
}

SweepResult run_sweep(const ExperimentConfig& cfg, SweepAxis axis,
                      const std::vector<std::string>& variants) {
  cfg.validate();
  if (variants.empty()) throw ValidationError("sweep: no variants given");
  for (const auto& v : variants) {
    Stage2Config probe = cfg.stage2;
    apply_variant(probe, axis, v);
  }
  const fs::path root = cfg.output_dir / ("sweep_" + to_string(axis));

  std::map<std::string, std::map<std::uint64_t, double>> acc;
  for (std::uint64_t seed : cfg.seeds) {
    const ExperimentConfig trial = trial_config(cfg, seed);
    const fs::path seed_dir = root / ("seed_" + std::to_string(seed));
    fs::create_directories(seed_dir);
    const auto [source, target] = generate_pair(trial.shift);
    const TargetEvaluator eval = target_evaluator(target);
    auto s1 = train_stage1(source, target.samples(), trial.stage1, eval);
    save_checkpoint(s1.model, seed_dir / artifact::stage1_ckpt);
    write_report_csv(s1.report, seed_dir / artifact::stage1_report);
    for (const auto& v : variants) {
      Stage2Config s2cfg = trial.stage2;
      apply_variant(s2cfg, axis, v);
      const fs::path cell_dir = root / v / ("seed_" + std::to_string(seed));
      fs::create_directories(cell_dir);
      auto s2 = train_stage2(source, target.samples(), s1.model, s2cfg, eval);
      save_checkpoint(s2.model, cell_dir / artifact::stage2_ckpt);
      write_report_csv(s2.report, cell_dir / artifact::stage2_report);
      acc[v][seed] = eval(s2.model);
    }
  }

  SweepResult result;
  result.axis = axis;
  for (const auto& v : variants) {
    std::vector<double> vals;
    for (std::uint64_t seed : cfg.seeds) {
      result.cells.push_back({v, seed, acc[v][seed]});
      vals.push_back(acc[v][seed]);
    }
    result.rows.push_back({v, variant_description(axis, v), mean_stderr(vals), vals.size()});
  }
  write_sweep_csv(result, cfg.output_dir / ("sweep_" + to_string(axis) + ".csv"),
                  cfg.output_dir / ("sweep_" + to_string(axis) + "_cells.csv"));
  return result;
}

void write_sweep_csv(const SweepResult& result, const fs::path& aggregate_path,
                     const fs::path& cells_path) {
  std::ostringstream agg;
  agg << "variant,formula,mean_target_acc,stderr,n\n";
  for (const auto& r : result.rows)
    agg << csv_escape(r.variant) << ',' << csv_escape(r.description) << ','
        << fmt(r.target_acc.mean) << ',' << fmt(r.target_acc.stderr_) << ',' << r.n << '\n';
  write_text(aggregate_path, agg.str());

  std::ostringstream cells;
  cells << "variant,seed,target_acc\n";
  for (const auto& c : result.cells)
    cells << csv_escape(c.variant) << ',' << c.seed << ',' << fmt(c.target_acc) << '\n';
  write_text(cells_path, cells.str());
}

void emit_curves(const std::vector<fs::path>& report_csvs, const fs::path& out_path) {
  if (report_csvs.empty()) throw ValidationError("curves: no report CSVs given");
  std::ostringstream out;
  out << "run_id,epoch,series,value\n";
  for (const auto& path : report_csvs) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line) || trim(line) != kReportCsvHeader)
      throw ParseError(path.string() + ":1: expected header '" + kReportCsvHeader + "'");
    const auto header = split_list(trim(line));
    const std::string run_id = csv_escape(path.parent_path().filename().string() + "/" +
                                          path.stem().string());
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      std::vector<std::string> cells;
      std::stringstream ls(trim(line));
      for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
      if (cells.size() != header.size())
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                         std::to_string(header.size()) + " columns, found " +
                         std::to_string(cells.size()));
      long long epoch = 0;
      try {
        epoch = to_int(cells[0]);
      } catch (const ValueError& e) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": epoch: " + e.what);
      }
      for (std::size_t c = 1; c < cells.size(); ++c) {
        if (cells[c] == "nan") continue;
        char* end = nullptr;
        const double v = std::strtod(cells[c].c_str(), &end);
        if (cells[c].empty() || end != cells[c].c_str() + cells[c].size())
          throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + header[c] +
                           ": invalid number '" + cells[c] + "'");
        out << run_id << ',' << epoch << ',' << header[c] << ',' << fmt(v) << '\n';
      }
    }
  }
  constexpr int kGrid = 100;
  for (const auto& spec : ablation_schedules()) {
    const std::string run_id = csv_escape("schedule:" + spec.name());
    for (int i = 0; i <= kGrid; ++i) {
      const double r = static_cast<double>(i) / kGrid;
      out << run_id << ',' << i << ",r," << fmt(r) << '\n';
      out << run_id << ',' << i << ",lambda," << fmt(lambda_at(spec, r)) << '\n';
    }
  }
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_text(out_path, out.str());
}

}  // namespace spcl
