#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qtl/common.hpp"
#include "qtl/estimators.hpp"
#include "qtl/rng.hpp"

namespace qtl {

struct OptimizerConfig {
  std::size_t steps = 100;
  double clip = 1.0;
  double momentum_ratio = 0.9;
  double base_lr = 0.3;
  double decay_offset = 10.0;
  double decay_power = 0.6;
  double lr_penalty = 0.5;
  std::size_t shots_per_eval = 5000;
  /// 0 picks kFdStepShots or kFdStepExact from the evaluator.
  double fd_step = 0.0;
  /// Reuse one seed for the +- evaluations of a coordinate.
  bool common_random_numbers = false;

  void validate() const {
    if (!(clip > 0.0)) throw InputError("clip must be positive");
    if (!(momentum_ratio >= 0.0 && momentum_ratio < 1.0)) throw InputError("momentum ratio must lie in [0, 1)");
    if (!(base_lr > 0.0)) throw InputError("learning rate must be positive");
    if (!(decay_offset >= 0.0 && decay_power >= 0.0 && lr_penalty >= 0.0)) throw InputError("decay settings must be non-negative");
    if (fd_step < 0.0) throw InputError("finite-difference step must be non-negative");
  }
};

/// Named hyperparameter sets. "alt1" drops the tilt penalty; "alt2" takes
/// larger steps with half the penalty. "ascending" is ascending_variant of
/// "default".
inline OptimizerConfig optimizer_profile(const std::string& name);

/// Smaller tilt penalty and slower decay for ascending-schedule runs:
/// lr_penalty halved, decay_power lowered by 0.2 (floored at 0).
inline OptimizerConfig ascending_variant(OptimizerConfig c) {
  c.lr_penalty *= 0.5;
  c.decay_power = std::max(0.0, c.decay_power - 0.2);
  return c;
}

inline OptimizerConfig optimizer_profile(const std::string& name) {
  OptimizerConfig c;
  if (name == "default") return c;
  if (name == "ascending") return ascending_variant(c);
  if (name == "alt1") {
    c.lr_penalty = 0.0;
    return c;
  }
  if (name == "alt2") {
    c.base_lr = 0.6;
    c.lr_penalty = 0.25;
    return c;
  }
  throw InputError("unknown optimizer profile: " + name);
}

// ---------------------------------------------------------------------------
// Tilt schedules
// ---------------------------------------------------------------------------

struct FixedTilt {
  double gamma = 0.0;
};

struct LinearAscendingTilt {
  double gamma_init = 0.0;
  double gamma_end = 0.0;
};

using TiltSchedule = std::variant<FixedTilt, LinearAscendingTilt>;

/// gamma_t. The ascending magnitude moves linearly from |gamma_init| to
/// |gamma_end| and carries gamma_end's sign; both endpoints are returned
/// exactly. T == 1 yields gamma_end.
inline double tilt_at(const TiltSchedule& schedule, std::size_t t, std::size_t total) {
  if (const auto* f = std::get_if<FixedTilt>(&schedule)) return f->gamma;
  const auto& a = std::get<LinearAscendingTilt>(schedule);
  if (total == 0 || t >= total) throw InputError("step index out of range");
  if (total == 1 || t == total - 1) return a.gamma_end;
  if (t == 0) return a.gamma_init;
  const double frac = static_cast<double>(t) / static_cast<double>(total - 1);
  if (a.gamma_init == 0.0) return static_cast<double>(t) * a.gamma_end / static_cast<double>(total - 1);
  const double mag = std::abs(a.gamma_init) + frac * (std::abs(a.gamma_end) - std::abs(a.gamma_init));
  return std::copysign(mag, a.gamma_end);
}

// ---------------------------------------------------------------------------
// Update rule
// ---------------------------------------------------------------------------

inline double learning_rate(const OptimizerConfig& c, std::size_t t, double gamma) {
  const double decayed = c.base_lr / std::pow(static_cast<double>(t) + 1.0 + c.decay_offset, c.decay_power);
  return decayed / (1.0 + c.lr_penalty * std::abs(gamma));
}

inline double wrap_angle(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r >= kTwoPi ? 0.0 : r;
}

struct StepResult {
  std::vector<double> params;
  std::vector<double> momentum;
  double lr = 0.0;
  double grad_norm_preclip = 0.0;
  bool aborted = false;
};

/// Clip, momentum average, decayed and tilt-penalized step, wrap into
/// [0, 2pi). A non-finite gradient leaves params and momentum untouched.
inline StepResult momentum_step(std::span<const double> params, std::span<const double> grad,
                                std::span<const double> momentum, const OptimizerConfig& c, double gamma, std::size_t t) {
  if (grad.size() != params.size() || momentum.size() != params.size()) throw InputError("shape mismatch in momentum step");
  StepResult r{{params.begin(), params.end()}, {momentum.begin(), momentum.end()}, learning_rate(c, t, gamma), 0.0, false};
  double norm2 = 0.0;
  for (double g : grad) norm2 += g * g;
  r.grad_norm_preclip = std::sqrt(norm2);
  if (!std::isfinite(r.grad_norm_preclip)) {
    r.aborted = true;
    return r;
  }
  const double scale = r.grad_norm_preclip > c.clip ? c.clip / r.grad_norm_preclip : 1.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    r.momentum[k] = c.momentum_ratio * momentum[k] + (1.0 - c.momentum_ratio) * (grad[k] * scale);
    r.params[k] = wrap_angle(params[k] - r.lr * r.momentum[k]);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Run loop
// ---------------------------------------------------------------------------

struct StepRecord {
  std::size_t t = 0;
  double gamma = 0.0;
  double loss = 0.0;
  double grad_norm_preclip = 0.0;
  double lr = 0.0;
  bool aborted = false;
};

struct RunRecord {
  std::uint64_t master_seed = 0;
  std::vector<double> initial_params;
  std::vector<double> final_params;
  std::vector<StepRecord> steps;
  std::size_t aborted_steps = 0;

  /// One JSON object per step, then a summary line with the final
  /// parameters split as theta (first half) and tau (second half).
  void write_jsonl(std::ostream& os) const {
    for (const auto& s : steps) {
      nlohmann::json j = {{"t", s.t}, {"gamma", s.gamma}, {"loss", s.loss},
                          {"grad_norm", s.grad_norm_preclip}, {"lr", s.lr}, {"aborted", s.aborted}};
      os << j.dump() << '\n';
    }
    nlohmann::json fin = {{"master_seed", master_seed}, {"steps", steps.size()}, {"aborted_steps", aborted_steps},
                          {"initial_params", initial_params}, {"final_params", final_params}};
    if (final_params.size() % 2 == 0) {
      const auto half = static_cast<std::ptrdiff_t>(final_params.size() / 2);
      fin["theta"] = std::vector<double>(final_params.begin(), final_params.begin() + half);
      fin["tau"] = std::vector<double>(final_params.begin() + half, final_params.end());
    }
    os << nlohmann::json{{"final", fin}}.dump() << '\n';
  }
};

/// Stream tags for derive_seed paths.
enum class SeedStream : std::uint64_t { Gradient = 1, Loss = 2, FinalSample = 3, Init = 4 };

inline std::uint64_t gradient_seed(std::uint64_t master, std::size_t t, std::size_t k, int sign, bool crn) {
  const std::uint64_t s = crn ? 0 : static_cast<std::uint64_t>(sign + 1);
  return derive_seed(master, {static_cast<std::uint64_t>(SeedStream::Gradient), t, k, s});
}

/// Objectives expose loss(params, gamma, seed) and stochastic().
template <class P>
concept TiltedObjective = requires(const P& p, std::span<const double> x, double g, std::uint64_t s) {
  { p.loss(x, g, s) } -> std::convertible_to<double>;
  { p.stochastic() } -> std::convertible_to<bool>;
};

/// Momentum descent on the tilted loss. Per step: gamma_t from the
/// schedule, a loss estimate at the current point, a central-difference
/// gradient, then momentum_step. Every batch seed is derived from
/// (master_seed, t, coordinate, sign).
template <TiltedObjective P>
RunRecord run_optimization(const P& problem, std::vector<double> init, const OptimizerConfig& config,
                           const TiltSchedule& schedule, std::uint64_t master_seed) {
  config.validate();
  RunRecord rec;
  rec.master_seed = master_seed;
  rec.initial_params = init;
  const double h = config.fd_step > 0.0 ? config.fd_step : (problem.stochastic() ? kFdStepShots : kFdStepExact);
  std::vector<double> params = std::move(init);
  std::vector<double> momentum(params.size(), 0.0);
  rec.steps.reserve(config.steps);
  for (std::size_t t = 0; t < config.steps; ++t) {
    const double gamma = tilt_at(schedule, t, config.steps);
    StepRecord sr;
    sr.t = t;
    sr.gamma = gamma;
    sr.loss = problem.loss(params, gamma, derive_seed(master_seed, {static_cast<std::uint64_t>(SeedStream::Loss), t}));
    auto keyed = [&](std::span<const double> x, EvalKey key) {
      return problem.loss(x, gamma, gradient_seed(master_seed, t, key.coordinate, key.sign, config.common_random_numbers));
    };
    const auto grad = finite_difference_gradient(keyed, params, h);
    auto step = momentum_step(params, grad, momentum, config, gamma, t);
    sr.grad_norm_preclip = step.grad_norm_preclip;
    sr.lr = step.lr;
    sr.aborted = step.aborted;
    if (step.aborted) ++rec.aborted_steps;
    params = std::move(step.params);
    momentum = std::move(step.momentum);
    rec.steps.push_back(sr);
  }
  rec.final_params = std::move(params);
  return rec;
}

}  // namespace qtl
