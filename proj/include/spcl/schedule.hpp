#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace spcl {

/// Curriculum weighting mechanisms for the target/source loss blend.
enum class Mechanism {
  steep_exp_increment,  // 2 / (1 + e^{-10r}) - 1
  linear,               // r
  cosine,               // 1 - cos(pi r / 2)
  flat_exp_increment,   // e^{ln(2) r^3} - 1
  fixed,                // lambda0
  step_exp_decrement,   // 2 - 2 / (1 + e^{-10r})
};

struct ScheduleSpec {
  Mechanism mechanism = Mechanism::steep_exp_increment;
  double lambda0 = 0.5;  // used by Mechanism::fixed only
  double alpha = 1.0;    // normalizer on the target loss

  void validate() const;

  /// Accepts the mechanism names above, with `fixed(x)` for the fixed variant.
  static ScheduleSpec parse(std::string_view name, double alpha = 1.0);

  /// Inverse of parse(); fixed values print with %g.
  [[nodiscard]] std::string name() const;

  /// Human-readable closed form, e.g. "2/(1+exp(-10r))-1".
  [[nodiscard]] std::string formula() const;
};

/// The eight weighting variants compared in the schedule ablation, ordered
/// decrement, fixed (0.2, 0.5, 0.8), then increments from flattest to steepest.
std::vector<ScheduleSpec> ablation_schedules(double alpha = 1.0);

/// Learning-rate annealing eta0 / (1 + gamma r)^beta.
struct LrSpec {
  double eta0 = 0.01;
  double gamma = 10.0;
  double beta = 0.75;

  void validate() const;
};

/// lambda at training progress r in [0, 1]. Throws ValidationError otherwise.
double lambda_at(const ScheduleSpec& spec, double r);

/// (alpha * lambda(r), 1 - lambda(r)): weights on the target and source losses.
std::pair<double, double> blend_weights(const ScheduleSpec& spec, double r);

double lr_at(const LrSpec& spec, double r);

bool is_increment(Mechanism m) noexcept;

}  // namespace spcl
