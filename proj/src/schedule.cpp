#include "spcl/schedule.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>

#include "spcl/error.hpp"

namespace spcl {

namespace {

void check_progress(double r) {
  if (!(r >= 0.0 && r <= 1.0))
    throw ValidationError("training progress r=" + std::to_string(r) + " outside [0, 1]");
}

double steep_sigmoid(double r) { return 2.0 / (1.0 + std::exp(-10.0 * r)); }

constexpr const char* kValidNames =
    "steep_exp_increment, linear, cosine, flat_exp_increment, fixed(<lambda0>), step_exp_decrement";

}  // namespace

void ScheduleSpec::validate() const {
  if (mechanism == Mechanism::fixed && !(lambda0 >= 0.0 && lambda0 <= 1.0))
    throw ValidationError("schedule: fixed lambda0 must lie in [0, 1]");
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw ValidationError("schedule: alpha must be positive");
}

ScheduleSpec ScheduleSpec::parse(std::string_view name, double alpha) {
  ScheduleSpec s;
  s.alpha = alpha;
  if (name == "steep_exp_increment") {
    s.mechanism = Mechanism::steep_exp_increment;
  } else if (name == "linear") {
    s.mechanism = Mechanism::linear;
  } else if (name == "cosine") {
    s.mechanism = Mechanism::cosine;
  } else if (name == "flat_exp_increment") {
    s.mechanism = Mechanism::flat_exp_increment;
  } else if (name == "step_exp_decrement") {
    s.mechanism = Mechanism::step_exp_decrement;
  } else if (name.starts_with("fixed(") && name.ends_with(")")) {
    const std::string inner(name.substr(6, name.size() - 7));
    char* end = nullptr;
    const double v = std::strtod(inner.c_str(), &end);
    if (inner.empty() || end != inner.c_str() + inner.size())
      throw ValidationError("schedule: invalid fixed value in '" + std::string(name) + "'");
    s.mechanism = Mechanism::fixed;
    s.lambda0 = v;
  } else {
    throw ValidationError("unknown schedule mechanism '" + std::string(name) +
                          "'; valid names: " + kValidNames);
  }
  s.validate();
  return s;
}

std::string ScheduleSpec::name() const {
  switch (mechanism) {
    case Mechanism::steep_exp_increment: return "steep_exp_increment";
    case Mechanism::linear: return "linear";
    case Mechanism::cosine: return "cosine";
    case Mechanism::flat_exp_increment: return "flat_exp_increment";
    case Mechanism::step_exp_decrement: return "step_exp_decrement";
    case Mechanism::fixed: {
      char buf[48];
      std::snprintf(buf, sizeof buf, "fixed(%g)", lambda0);
      return buf;
    }
  }
  return {};
}

std::string ScheduleSpec::formula() const {
  switch (mechanism) {
    case Mechanism::steep_exp_increment: return "2/(1+exp(-10r))-1";
    case Mechanism::linear: return "r";
    case Mechanism::cosine: return "1-cos(pi*r/2)";
    case Mechanism::flat_exp_increment: return "exp(ln(2)*r^3)-1";
    case Mechanism::step_exp_decrement: return "2-2/(1+exp(-10r))";
    case Mechanism::fixed: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", lambda0);
      return buf;
    }
  }
  return {};
}

std::vector<ScheduleSpec> ablation_schedules(double alpha) {
  std::vector<ScheduleSpec> out;
  for (const char* n : {"step_exp_decrement", "fixed(0.2)", "fixed(0.5)", "fixed(0.8)",
                        "flat_exp_increment", "cosine", "linear", "steep_exp_increment"})
    out.push_back(ScheduleSpec::parse(n, alpha));
  return out;
}

void LrSpec::validate() const {
  if (!(eta0 > 0.0)) throw ValidationError("lr: eta0 must be positive");
  if (!(gamma >= 0.0)) throw ValidationError("lr: gamma must be non-negative");
  if (!(beta >= 0.0)) throw ValidationError("lr: beta must be non-negative");
}

double lambda_at(const ScheduleSpec& spec, double r) {
  check_progress(r);
  switch (spec.mechanism) {
    case Mechanism::steep_exp_increment: return steep_sigmoid(r) - 1.0;
    case Mechanism::linear: return r;
    case Mechanism::cosine: return 1.0 - std::cos(std::numbers::pi * r / 2.0);
    case Mechanism::flat_exp_increment: return std::exp(std::numbers::ln2 * r * r * r) - 1.0;
    case Mechanism::fixed: return spec.lambda0;
    case Mechanism::step_exp_decrement: return 2.0 - steep_sigmoid(r);
  }
  return 0.0;
}

std::pair<double, double> blend_weights(const ScheduleSpec& spec, double r) {
  const double lambda = lambda_at(spec, r);
  return {spec.alpha * lambda, 1.0 - lambda};
}

double lr_at(const LrSpec& spec, double r) {
  check_progress(r);
  return spec.eta0 / std::pow(1.0 + spec.gamma * r, spec.beta);
}

bool is_increment(Mechanism m) noexcept {
  return m == Mechanism::steep_exp_increment || m == Mechanism::linear ||
         m == Mechanism::cosine || m == Mechanism::flat_exp_increment;
}

}  // namespace spcl
