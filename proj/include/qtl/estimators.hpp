#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include "qtl/common.hpp"
#include "qtl/rng.hpp"
#include "qtl/spectra.hpp"
#include "qtl/statevector.hpp"
#include "qtl/tilted_loss.hpp"

namespace qtl {

/// K energy samples from one measurement batch.
struct SampleSet {
  std::vector<double> energies;
  std::uint64_t source_seed = 0;

  SampleSet(std::vector<double> e, std::uint64_t seed = 0) : energies(std::move(e)), source_seed(seed) {
    if (energies.empty()) throw InputError("a sample set needs at least one sample");
  }

  std::size_t size() const { return energies.size(); }
};

inline double empirical_mean(const SampleSet& s) {
  double acc = 0.0;
  for (double e : s.energies) acc += e;
  return acc / static_cast<double>(s.size());
}

/// (1/gamma) log((1/K) sum_k e^{gamma E_k}); the sample mean at zero tilt.
inline double empirical_qtl(const SampleSet& s, Tilt tilt) {
  if (tilt.is_zero()) return empirical_mean(s);
  struct Uniform {
    double w;
    double operator[](std::size_t) const { return w; }
  };
  return detail::tilted_log_mean_exp(s.energies, Uniform{1.0 / static_cast<double>(s.size())}, s.size(), tilt.gamma);
}

/// Mean of the ceil(alpha K) smallest samples. Stable sort keeps ties in
/// input order.
inline double empirical_cvar(const SampleSet& s, RiskLevel level) {
  const auto k = s.size();
  auto m = static_cast<std::size_t>(std::ceil(level.alpha() * static_cast<double>(k) - 1e-9));
  m = std::clamp<std::size_t>(m, 1, k);
  std::vector<double> sorted(s.energies);
  std::stable_sort(sorted.begin(), sorted.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) acc += sorted[i];
  return acc / static_cast<double>(m);
}

/// Energies of sampled basis states.
inline SampleSet sample_energies(const StateVector& state, const DiagonalObservable& obs, std::size_t shots,
                                 std::uint64_t seed) {
  const auto z = sample_bitstrings(state, shots, seed);
  std::vector<double> e(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) e[k] = obs.energy(z[k]);
  return SampleSet(std::move(e), seed);
}

// ---------------------------------------------------------------------------
// Shot budget
// ---------------------------------------------------------------------------

struct ShotBudgetQuery {
  double gamma;
  double delta_spectrum;
  double epsilon;
  double failure_prob;

  void validate() const {
    if (!(gamma != 0.0) || !std::isfinite(gamma)) throw InputError("shot budget needs a finite nonzero tilt");
    if (!(delta_spectrum >= 0.0)) throw InputError("spectral width must be non-negative");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InputError("epsilon must lie in (0, 1)");
    if (!(failure_prob > 0.0 && failure_prob < 1.0)) throw InputError("failure probability must lie in (0, 1)");
    if (epsilon > 1.0 / std::abs(gamma)) throw PreconditionError("precision must satisfy epsilon <= 1/|gamma|");
  }
};

/// Hoeffding sample size m >= (2 / (gamma eps)^2) (e^{|gamma| Delta} - 1)^2 log(2/delta), at least 1.
inline std::uint64_t hoeffding_shots(const ShotBudgetQuery& q) {
  q.validate();
  const double spread = std::expm1(std::abs(q.gamma) * q.delta_spectrum);
  const double m = 2.0 / (q.gamma * q.gamma * q.epsilon * q.epsilon) * spread * spread * std::log(2.0 / q.failure_prob);
  if (!std::isfinite(m) || m > 1e18) throw ResourceError("shot budget overflows");
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(m)));
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

/// Identifies one loss evaluation inside a gradient: coordinate k and sign +-1
/// (sign 0 for the unshifted point).
struct EvalKey {
  std::size_t coordinate = 0;
  int sign = 0;
};

/// Partition-function evaluators expose
///   double partition(std::span<const double> params, double gamma) const;
///   double expectation(std::span<const double> params) const;
/// `partition` may return Z_gamma up to a positive factor that does not
/// depend on params.
template <class E>
concept PartitionEvaluator = requires(const E& e, std::span<const double> p, double g) {
  { e.partition(p, g) } -> std::convertible_to<double>;
  { e.expectation(p) } -> std::convertible_to<double>;
};

/// d L_gamma / d theta_k = (v/gamma) (Z(theta + s e_k) - Z(theta - s e_k)) / Z(theta), s = pi/(4v).
/// Valid when theta_k enters through a single gate whose generator V has
/// V^2 = v^2 I. At zero tilt the two-term rule on <O> is used instead.
template <PartitionEvaluator E>
double shift_rule_gradient(const E& eval, std::span<const double> params, std::size_t k, double v, Tilt tilt) {
  if (k >= params.size()) throw InputError("parameter index out of range");
  if (!(v > 0.0)) throw InputError("generator half-gap must be positive");
  const double s = kPi / (4.0 * v);
  std::vector<double> plus(params.begin(), params.end()), minus(plus);
  plus[k] += s;
  minus[k] -= s;
  if (tilt.is_zero()) return v * (eval.expectation(plus) - eval.expectation(minus));
  const double z0 = eval.partition(params, tilt.gamma);
  return v / tilt.gamma * (eval.partition(plus, tilt.gamma) - eval.partition(minus, tilt.gamma)) / z0;
}

inline constexpr double kFdStepShots = 1e-2;
inline constexpr double kFdStepExact = 1e-6;

namespace detail {

template <class F>
double call_loss(const F& f, std::span<const double> p, EvalKey key) {
  if constexpr (std::is_invocable_v<const F&, std::span<const double>, EvalKey>)
    return f(p, key);
  else
    return f(p);
}

}  // namespace detail

/// Central differences. `loss` is callable as f(params) or f(params, EvalKey);
/// the keyed form lets stochastic evaluators pick a seed per evaluation.
template <class F>
std::vector<double> finite_difference_gradient(const F& loss, std::span<const double> params, double h) {
  if (!(h > 0.0)) throw InputError("finite-difference step must be positive");
  std::vector<double> g(params.size()), x(params.begin(), params.end());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double orig = x[k];
    x[k] = orig + h;
    const double fp = detail::call_loss(loss, x, {k, +1});
    x[k] = orig - h;
    const double fm = detail::call_loss(loss, x, {k, -1});
    x[k] = orig;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Small dense real symmetric matrix, row-major.
struct RealMatrix {
  std::size_t dim = 0;
  std::vector<double> data;

  explicit RealMatrix(std::size_t d = 0) : dim(d), data(d * d, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * dim + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * dim + j]; }

  double frobenius_norm() const {
    double s = 0.0;
    for (double x : data) s += x * x;
    return std::sqrt(s);
  }
};

/// Central second differences, symmetrized. `f` must be deterministic.
template <class F>
RealMatrix hessian_fd(const F& f, std::span<const double> params, double h) {
  if (!(h > 0.0)) throw InputError("finite-difference step must be positive");
  const std::size_t d = params.size();
  std::vector<double> x(params.begin(), params.end());
  auto at = [&](std::size_t i, double di, std::size_t j, double dj) {
    std::vector<double> y(x);
    y[i] += di;
    y[j] += dj;
    return f(std::span<const double>(y));
  };
  const double f0 = f(std::span<const double>(x));
  RealMatrix hm(d);
  for (std::size_t i = 0; i < d; ++i) {
    hm(i, i) = (at(i, h, i, 0.0) - 2.0 * f0 + at(i, -h, i, 0.0)) / (h * h);
    for (std::size_t j = i + 1; j < d; ++j) {
      const double v = (at(i, h, j, h) - at(i, h, j, -h) - at(i, -h, j, h) + at(i, -h, j, -h)) / (4.0 * h * h);
      hm(i, j) = hm(j, i) = v;
    }
  }
  return hm;
}

// ---------------------------------------------------------------------------
// Resolvability
// ---------------------------------------------------------------------------

struct NoiseToSignal {
  double ratio;          // sigma^2 / (N ||g||^2); +inf when unresolvable
  double kl_divergence;  // 1 / (2 ratio)
  bool resolvable;       // false iff the gradient vanishes
};

inline NoiseToSignal noise_to_signal(std::span<const double> grad, double single_shot_var, std::uint64_t shots) {
  if (shots < 1) throw InputError("shot count must be positive");
  if (!(single_shot_var >= 0.0)) throw InputError("variance must be non-negative");
  double g2 = 0.0;
  for (double g : grad) g2 += g * g;
  if (g2 == 0.0) return {kInf, 0.0, false};
  const double r = single_shot_var / (static_cast<double>(shots) * g2);
  return {r, r == 0.0 ? kInf : 0.5 / r, true};
}

/// Trace of the unbiased sample covariance of per-shot gradient
/// contributions (one row per shot).
inline double trace_sample_covariance(const std::vector<std::vector<double>>& rows) {
  if (rows.size() < 2) throw InputError("need at least two rows");
  const std::size_t d = rows.front().size();
  double tr = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0, m2 = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows) {
      if (r.size() != d) throw InputError("ragged contribution rows");
      const double delta = r[k] - mean;
      mean += delta / static_cast<double>(++n);
      m2 += delta * (r[k] - mean);
    }
    tr += m2 / static_cast<double>(n - 1);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Circuit objectives
// ---------------------------------------------------------------------------

namespace detail {

// sum_z p_z e^{gamma (E_z - ref)}, with ref the tilt-favored extreme.
inline double shifted_partition(std::span<const double> probs, const DiagonalObservable& obs, double gamma) {
  const double ref = gamma < 0 ? obs.min_energy() : obs.max_energy();
  double z = 0.0;
  for (std::uint64_t i = 0; i < probs.size(); ++i) z += probs[i] * std::exp(gamma * (obs.energy(i) - ref));
  return z;
}

inline double exact_qtl_from_probs(std::span<const double> probs, const DiagonalObservable& obs, double gamma) {
  const auto e = obs.energies();
  return tilted_log_mean_exp(e, probs, probs.size(), gamma);
}

}  // namespace detail

/// Product ansatz on |0...0> against a diagonal observable.
class ProductCircuit {
 public:
  explicit ProductCircuit(DiagonalObservable obs) : obs_(std::move(obs)) {}

  const DiagonalObservable& observable() const { return obs_; }

  StateVector state(std::span<const double> params) const {
    return apply_product_rx(StateVector::basis(obs_.qubit_count(), 0), params);
  }
  double partition(std::span<const double> params, double gamma) const {
    return detail::shifted_partition(probabilities(state(params)), obs_, gamma);
  }
  double expectation(std::span<const double> params) const { return expectation_diagonal(state(params), obs_); }
  double loss(std::span<const double> params, double gamma) const {
    return detail::exact_qtl_from_probs(probabilities(state(params)), obs_, gamma);
  }

 private:
  DiagonalObservable obs_;
};

/// One gate in a RotationCircuit: a Pauli rotation driven by parameter
/// `param`, or (when `entangler` is set) a CZ on (qubit, target).
struct CircuitGate {
  PauliAxis axis = PauliAxis::X;
  unsigned qubit = 0;
  std::size_t param = 0;
  bool entangler = false;
  unsigned target = 0;
};

/// Layered circuit of single-qubit Pauli rotations and CZs acting on
/// |0...0>. Every parameter feeds exactly one rotation, so each has
/// generator P/2 with half-gap 1/2.
class RotationCircuit {
 public:
  RotationCircuit(DiagonalObservable obs, std::vector<CircuitGate> gates) : obs_(std::move(obs)), gates_(std::move(gates)) {
    for (const auto& g : gates_) {
      if (g.entangler) continue;
      if (g.param >= params_) params_ = g.param + 1;
    }
    std::vector<int> uses(params_, 0);
    for (const auto& g : gates_)
      if (!g.entangler) ++uses[g.param];
    for (int u : uses)
      if (u != 1) throw InputError("each parameter must drive exactly one rotation");
  }

  /// Random brickwork: `layers` rounds of random-axis rotations on every
  /// qubit followed by a CZ chain.
  static RotationCircuit random(DiagonalObservable obs, unsigned layers, Xoshiro256& rng) {
    const unsigned n = obs.qubit_count();
    std::vector<CircuitGate> gates;
    std::size_t p = 0;
    for (unsigned l = 0; l < layers; ++l) {
      for (unsigned q = 0; q < n; ++q) gates.push_back({static_cast<PauliAxis>(rng.below(3)), q, p++, false, 0});
      for (unsigned q = 0; q + 1 < n; ++q) gates.push_back({PauliAxis::Z, q, 0, true, q + 1});
    }
    return RotationCircuit(std::move(obs), std::move(gates));
  }

  std::size_t parameter_count() const { return params_; }
  const DiagonalObservable& observable() const { return obs_; }

  StateVector state(std::span<const double> params) const {
    if (params.size() != params_) throw InputError("parameter count mismatch");
    StateVector s = StateVector::basis(obs_.qubit_count(), 0);
    for (const auto& g : gates_)
      s = g.entangler ? apply_cz(std::move(s), g.qubit, g.target) : apply_rotation(std::move(s), g.qubit, g.axis, params[g.param]);
    return s;
  }
  double partition(std::span<const double> params, double gamma) const {
    return detail::shifted_partition(probabilities(state(params)), obs_, gamma);
  }
  double expectation(std::span<const double> params) const { return expectation_diagonal(state(params), obs_); }
  double loss(std::span<const double> params, double gamma) const {
    return detail::exact_qtl_from_probs(probabilities(state(params)), obs_, gamma);
  }

 private:
  DiagonalObservable obs_;
  std::vector<CircuitGate> gates_;
  std::size_t params_ = 0;
};

/// Tilted QAOA objective on packed parameters [theta_1..theta_p, tau_1..tau_p].
/// shots == 0 evaluates the loss exactly from probabilities; otherwise each
/// call draws a fresh batch with the supplied seed.
class QaoaObjective {
 public:
  QaoaObjective(DiagonalObservable obs, std::size_t depth, std::size_t shots)
      : obs_(std::move(obs)), depth_(depth), shots_(shots) {
    if (depth_ < 1) throw InputError("QAOA depth must be at least 1");
  }

  const DiagonalObservable& observable() const { return obs_; }
  std::size_t depth() const { return depth_; }
  std::size_t parameter_count() const { return 2 * depth_; }
  std::size_t shots() const { return shots_; }
  bool stochastic() const { return shots_ > 0; }

  StateVector state(std::span<const double> packed) const {
    if (packed.size() != parameter_count()) throw InputError("parameter count mismatch");
    return qaoa_state(obs_, QaoaParams::unpack(packed));
  }

  double loss(std::span<const double> packed, double gamma, std::uint64_t seed) const {
    const auto s = state(packed);
    if (shots_ == 0) return detail::exact_qtl_from_probs(probabilities(s), obs_, gamma);
    return empirical_qtl(sample_energies(s, obs_, shots_, seed), Tilt(gamma));
  }

  double partition(std::span<const double> packed, double gamma) const {
    return detail::shifted_partition(probabilities(state(packed)), obs_, gamma);
  }
  double expectation(std::span<const double> packed) const { return expectation_diagonal(state(packed), obs_); }

 private:
  DiagonalObservable obs_;
  std::size_t depth_;
  std::size_t shots_;
};

}  // namespace qtl
