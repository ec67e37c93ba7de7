#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "qtl/common.hpp"
#include "qtl/linalg.hpp"
#include "qtl/spectra.hpp"

namespace qtl {

/// Tilt parameter. Negative values emphasize low outcomes.
struct Tilt {
  double gamma = 0.0;

  constexpr Tilt() = default;
  constexpr explicit Tilt(double g) : gamma(g) {}
  bool is_zero() const { return is_zero_tilt(gamma); }
};

/// Lower-tail risk level alpha in (0, 1].
class RiskLevel {
 public:
  explicit RiskLevel(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("risk level must lie in (0, 1]");
  }
  double alpha() const { return alpha_; }

 private:
  double alpha_;
};

/// Observable and state on a d-dimensional Hilbert space, d <= 256.
class DenseOperatorPair {
 public:
  static constexpr double kTolerance = 1e-10;

  DenseOperatorPair(Matrix observable, Matrix state) : o_(std::move(observable)), rho_(std::move(state)) {
    if (o_.dim() != rho_.dim()) throw InputError("observable and state dimensions differ");
    if (o_.dim() == 0 || o_.dim() > kMaxDenseDim) throw ResourceError("dense pair dimension must be in [1, 256]");
    if (o_.hermiticity_defect() > kTolerance) throw InputError("observable is not Hermitian");
    validate_density(rho_);
  }

  static void validate_density(const Matrix& m) {
    if (m.hermiticity_defect() > kTolerance) throw InputError("state is not Hermitian");
    if (std::abs(m.trace() - cplx(1.0)) > kTolerance) throw InputError("state does not have unit trace");
    const auto es = eigh(m);
    if (es.values.front() < -kTolerance) throw InputError("state is not positive semidefinite");
  }

  const Matrix& observable() const { return o_; }
  const Matrix& state() const { return rho_; }
  std::size_t dimension() const { return o_.dim(); }

 private:
  Matrix o_;
  Matrix rho_;
};

namespace detail {

// (1/gamma) log sum_i w_i exp(gamma x_i) for weights summing to one.
// Far from zero tilt: shift by the tilt-favored extreme so every exponent is
// <= 0. Near zero tilt: shift by the mean and use expm1/log1p, which keeps
// the O(gamma) correction exact instead of losing it to cancellation.
template <class Values, class Weights>
double tilted_log_mean_exp(const Values& x, const Weights& w, std::size_t count, double gamma) {
  double mean = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < count; ++i) {
    if (w[i] <= 0.0) continue;
    mean += w[i] * x[i];
    lo = std::min(lo, x[i]);
    hi = std::max(hi, x[i]);
  }
  if (is_zero_tilt(gamma) || lo == hi) return lo == hi ? lo : mean;
  if (std::abs(gamma) * (hi - lo) <= 1.0) {
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i)
      if (w[i] > 0.0) s += w[i] * std::expm1(gamma * (x[i] - mean));
    return mean + std::log1p(s) / gamma;
  }
  const double ref = gamma < 0 ? lo : hi;
  double s = 0.0;
  for (std::size_t i = 0; i < count; ++i)
    if (w[i] > 0.0) s += w[i] * std::exp(gamma * (x[i] - ref));
  return ref + std::log(s) / gamma;
}

// Born weights at or below this are rounding residue from the eigenvectors
// and are dropped; a large tilt would otherwise amplify them.
inline constexpr double kBornWeightFloor = 1e-12;

inline OutcomeDistribution born_from_eigensystem(const EigenSystem& es, const Matrix& rho) {
  std::vector<double> p(es.values.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double w = es.expectation(k, rho);
    p[k] = w > kBornWeightFloor ? w : 0.0;
  }
  return OutcomeDistribution::normalized(es.values, p);
}

// supp(sigma) within supp(rho): sigma has no weight on rho's null eigenvectors.
inline bool support_contained(const EigenSystem& rho_es, const Matrix& sigma) {
  const double cut = rank_cutoff(rho_es);
  for (std::size_t j = 0; j < rho_es.values.size(); ++j)
    if (rho_es.values[j] <= cut && rho_es.expectation(j, sigma) > kRankThreshold) return false;
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tilted loss
// ---------------------------------------------------------------------------

/// (1/gamma) log sum_i p_i e^{gamma o_i}; the mean at zero tilt.
inline double qtl_exact(const OutcomeDistribution& dist, Tilt tilt) {
  const auto& o = dist.outcomes();
  std::vector<double> x(o.size()), w(o.size());
  for (std::size_t i = 0; i < o.size(); ++i) {
    x[i] = o[i].value;
    w[i] = o[i].probability;
  }
  return detail::tilted_log_mean_exp(x, w, x.size(), tilt.gamma);
}

/// Born distribution of the observable's eigenvalues on the state.
inline OutcomeDistribution born_distribution(const DenseOperatorPair& pair) {
  return detail::born_from_eigensystem(eigh(pair.observable()), pair.state());
}

/// (1/gamma) log tr(e^{gamma O} rho) via the Born distribution of O.
inline double qtl_dense(const DenseOperatorPair& pair, Tilt tilt) { return qtl_exact(born_distribution(pair), tilt); }

/// (1/gamma) log tr exp(log rho + gamma O). Requires full-rank rho and
/// nonzero tilt.
inline double qtl_comparator_dense(const DenseOperatorPair& pair, Tilt tilt) {
  if (tilt.is_zero()) throw DomainError("comparator is undefined at zero tilt");
  const auto rho_es = eigh(pair.state());
  if (!(rho_es.values.front() > kRankThreshold)) throw DomainError("comparator needs a full-rank state");
  Matrix m = apply_function(rho_es, [](double x) { return std::log(x); });
  m += pair.observable() * cplx(tilt.gamma);
  const auto es = eigh(m);
  const double top = es.values.back();
  double s = 0.0;
  for (double v : es.values) s += std::exp(v - top);
  return (top + std::log(s)) / tilt.gamma;
}

/// sigma* = exp(log rho + gamma O) / tr(...), the Esscher-tilted state.
inline Matrix esscher_state(const DenseOperatorPair& pair, Tilt tilt) {
  const auto rho_es = eigh(pair.state());
  if (!(rho_es.values.front() > kRankThreshold)) throw DomainError("Esscher state needs a full-rank state");
  Matrix m = apply_function(rho_es, [](double x) { return std::log(x); });
  m += pair.observable() * cplx(tilt.gamma);
  const auto es = eigh(m);
  const double top = es.values.back();
  Matrix out = apply_function(es, [top](double x) { return std::exp(x - top); });
  out *= cplx(1.0 / out.trace().real());
  return out;
}

/// D(sigma||rho) = tr[sigma(log sigma - log rho)], +inf when sigma has
/// weight outside supp(rho).
inline double umegaki_relative_entropy(const Matrix& sigma, const Matrix& rho) {
  if (sigma.dim() != rho.dim()) throw InputError("dimension mismatch");
  const auto s_es = eigh(sigma);
  const auto r_es = eigh(rho);
  if (!detail::support_contained(r_es, sigma)) return kInf;
  const double s_cut = rank_cutoff(s_es), r_cut = rank_cutoff(r_es);
  double d = 0.0;
  for (double s : s_es.values)
    if (s > s_cut) d += s * std::log(s);
  for (std::size_t j = 0; j < r_es.values.size(); ++j) {
    if (r_es.values[j] <= r_cut) continue;
    d -= r_es.expectation(j, sigma) * std::log(r_es.values[j]);
  }
  return (d < 0.0 && d > -1e-12) ? 0.0 : d;
}

/// L_gamma(O, rho) - [tr(sigma O) - D(sigma||rho)/gamma]; non-negative for
/// gamma > 0 and non-positive for gamma < 0.
inline double gibbs_variational_gap(const DenseOperatorPair& pair, Tilt tilt, const Matrix& sigma) {
  if (tilt.is_zero()) throw DomainError("variational gap is undefined at zero tilt");
  DenseOperatorPair::validate_density(sigma);
  const auto r_es = eigh(pair.state());
  if (!(r_es.values.front() > kRankThreshold)) throw DomainError("variational form needs a full-rank state");
  const double expect = (sigma * pair.observable()).trace().real();
  const double d = umegaki_relative_entropy(sigma, pair.state());
  return qtl_dense(pair, tilt) - (expect - d / tilt.gamma);
}

// ---------------------------------------------------------------------------
// Quantile risk measures
// ---------------------------------------------------------------------------

inline constexpr double kCdfTolerance = 1e-12;

/// inf{e : F(e) >= alpha}.
inline double var_alpha(const OutcomeDistribution& dist, RiskLevel level) {
  double cdf = 0.0;
  for (const auto& o : dist.outcomes()) {
    cdf += o.probability;
    if (cdf >= level.alpha() - kCdfTolerance) return o.value;
  }
  return dist.max_value();
}

/// Lower-tail CVaR with the quantile atom split so exactly alpha mass is
/// averaged.
inline double cvar_alpha(const OutcomeDistribution& dist, RiskLevel level) {
  const double alpha = level.alpha();
  const double q = var_alpha(dist, level);
  double below_mass = 0.0, below_sum = 0.0;
  for (const auto& o : dist.outcomes()) {
    if (o.value >= q) break;
    below_mass += o.probability;
    below_sum += o.probability * o.value;
  }
  return (below_sum + q * std::max(0.0, alpha - below_mass)) / alpha;
}

struct EvarResult {
  double value = 0.0;
  double gamma = 0.0;       // maximizing tilt found (0 encodes the gamma -> 0- limit)
  double gamma_bound = 0.0;  // largest |gamma| searched
};

inline constexpr double kEvarGammaMin = 1e-3;
inline constexpr double kEvarGammaMax = 1e6;
inline constexpr int kEvarGridPoints = 60;

/// sup_{gamma<0} { L_gamma + (1/gamma) log(1/alpha) } over a log-spaced grid
/// |gamma| in [1e-3, 1e6] (60 points), refined by golden-section search in
/// log|gamma| on the bracket around the best grid point.
inline EvarResult evar_alpha(const OutcomeDistribution& dist, RiskLevel level) {
  const double alpha = level.alpha();
  if (alpha == 1.0) return {dist.mean(), 0.0, kEvarGammaMax};
  const double log_inv_alpha = std::log(1.0 / alpha);
  auto objective = [&](double u) {  // u = log10 |gamma|
    const double g = -std::pow(10.0, u);
    return qtl_exact(dist, Tilt(g)) + log_inv_alpha / g;
  };
  const double u_lo = std::log10(kEvarGammaMin), u_hi = std::log10(kEvarGammaMax);
  const double du = (u_hi - u_lo) / (kEvarGridPoints - 1);
  int best = 0;
  double best_val = -kInf;
  for (int i = 0; i < kEvarGridPoints; ++i) {
    const double v = objective(u_lo + i * du);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  double a = u_lo + std::max(0, best - 1) * du;
  double b = u_lo + std::min(kEvarGridPoints - 1, best + 1) * du;
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = objective(c), fd = objective(d);
  for (int it = 0; it < 80 && (b - a) > 1e-12; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = objective(d);
    }
  }
  double u_star = u_lo + best * du;
  const double refined_u = fc > fd ? c : d;
  const double refined = std::max(fc, fd);
  if (refined > best_val) {
    best_val = refined;
    u_star = refined_u;
  }
  return {best_val, -std::pow(10.0, u_star), kEvarGammaMax};
}

// ---------------------------------------------------------------------------
// Renyi-type quantities
// ---------------------------------------------------------------------------

namespace detail {

// tr(sigma^a rho^b) from eigendecompositions; null eigenvalues contribute
// zero for either sign of the exponent.
inline double trace_power_product(const EigenSystem& s_es, double a, const EigenSystem& r_es, double b) {
  const double s_cut = rank_cutoff(s_es), r_cut = rank_cutoff(r_es);
  double t = 0.0;
  for (std::size_t i = 0; i < s_es.values.size(); ++i) {
    if (s_es.values[i] <= s_cut) continue;
    const double sa = std::pow(s_es.values[i], a);
    for (std::size_t j = 0; j < r_es.values.size(); ++j) {
      if (r_es.values[j] <= r_cut) continue;
      t += sa * std::pow(r_es.values[j], b) * s_es.overlap(i, r_es, j);
    }
  }
  return t;
}

}  // namespace detail

/// Petz-Renyi divergence (1/(alpha-1)) log tr(sigma^alpha rho^(1-alpha)).
inline double petz_renyi(const Matrix& sigma, const Matrix& rho, double alpha) {
  if (!(alpha > 0.0) || alpha == 1.0) throw InputError("Renyi order must lie in (0,1) or (1,inf)");
  if (sigma.dim() != rho.dim()) throw InputError("dimension mismatch");
  const auto s_es = eigh(sigma);
  const auto r_es = eigh(rho);
  if (alpha > 1.0 && !detail::support_contained(r_es, sigma)) return kInf;
  const double t = detail::trace_power_product(s_es, alpha, r_es, 1.0 - alpha);
  if (!(t > 0.0)) return kInf;
  return std::log(t) / (alpha - 1.0);
}

/// L_gamma(log sigma, rho) = (1/gamma) log tr(sigma^gamma rho), gamma > 0.
inline double qtl_log_state(const Matrix& sigma, const Matrix& rho, double gamma) {
  if (!(gamma > 0.0)) throw InputError("tilt must be positive");
  const auto s_es = eigh(sigma);
  const auto r_es = eigh(rho);
  const double s_cut = rank_cutoff(s_es);
  double t = 0.0;
  for (std::size_t i = 0; i < s_es.values.size(); ++i) {
    if (s_es.values[i] <= s_cut) continue;
    t += std::pow(s_es.values[i], gamma) * s_es.expectation(i, rho);
  }
  return std::log(t) / gamma;
}

// ---------------------------------------------------------------------------
// Scalar helpers
// ---------------------------------------------------------------------------

/// phi_gamma(x) = (1/gamma) log(1 + (e^gamma - 1) x); identity at zero tilt.
inline double phi_gamma(double x, Tilt tilt) {
  if (!(x >= 0.0 && x <= 1.0)) throw InputError("phi_gamma needs x in [0, 1]");
  if (tilt.is_zero()) return x;
  const double g = tilt.gamma;
  if (g > 0 && g > 700.0) {
    // log(1 + (e^g - 1)x) = g + log(x + (1 - x)e^{-g}) for large g.
    if (x == 0.0) return 0.0;
    return 1.0 + std::log(x + (1.0 - x) * std::exp(-g)) / g;
  }
  const double a = std::expm1(g) * x;
  // Near a = -1 log1p loses the tiny remainder; (1 - x) + x e^g keeps it.
  if (a > -0.5) return std::log1p(a) / g;
  return std::log((1.0 - x) + x * std::exp(g)) / g;
}

/// Second-order cumulant expansion mean + (gamma/2) variance.
inline double small_tilt_expansion(const OutcomeDistribution& dist, Tilt tilt) {
  return dist.mean() + 0.5 * tilt.gamma * dist.variance();
}

}  // namespace qtl
