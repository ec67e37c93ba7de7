#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qtl/common.hpp"
#include "qtl/estimators.hpp"
#include "qtl/linalg.hpp"
#include "qtl/projector_benchmark.hpp"
#include "qtl/rng.hpp"
#include "qtl/spectra.hpp"
#include "qtl/statevector.hpp"
#include "qtl/tilted_loss.hpp"

namespace qtl {

// ---------------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------------

namespace gen {

/// Standard normal by Box-Muller on the portable uniform stream.
inline double normal(Xoshiro256& rng) {
  double u = rng.uniform();
  while (u <= 0.0) u = rng.uniform();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(kTwoPi * rng.uniform());
}

/// 2..max_outcomes distinct values in [-5, 5] with weights bounded away from 0.
inline OutcomeDistribution distribution(Xoshiro256& rng, unsigned max_outcomes = 8) {
  const auto k = 2 + rng.below(max_outcomes - 1);
  std::vector<double> v(k), w(k);
  for (std::size_t i = 0; i < k; ++i) {
    v[i] = rng.uniform(-5.0, 5.0);
    w[i] = rng.uniform(0.05, 1.0);
  }
  return OutcomeDistribution::normalized(v, w);
}

inline Matrix ginibre(std::size_t d, Xoshiro256& rng) {
  Matrix m(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = cplx(normal(rng), normal(rng));
  return m;
}

inline Matrix hermitian(std::size_t d, Xoshiro256& rng) {
  const Matrix g = ginibre(d, rng);
  return (g + g.adjoint()) * cplx(0.5);
}

/// Haar-ish unitary from Gram-Schmidt on a Ginibre matrix (columns).
inline Matrix unitary(std::size_t d, Xoshiro256& rng) {
  Matrix u = ginibre(d, rng);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t j = 0; j < k; ++j) {
      cplx dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += std::conj(u(i, j)) * u(i, k);
      for (std::size_t i = 0; i < d; ++i) u(i, k) -= dot * u(i, j);
    }
    double nrm = 0.0;
    for (std::size_t i = 0; i < d; ++i) nrm += std::norm(u(i, k));
    nrm = std::sqrt(nrm);
    for (std::size_t i = 0; i < d; ++i) u(i, k) /= nrm;
  }
  return u;
}

/// U diag(values) U^H.
inline Matrix with_spectrum(const Matrix& u, std::span<const double> values) {
  return u * Matrix::diagonal(values) * u.adjoint();
}

/// Density matrix of the given rank with a random eigenbasis.
inline Matrix density(std::size_t d, std::size_t rank, Xoshiro256& rng) {
  std::vector<double> p(d, 0.0);
  double s = 0.0;
  for (std::size_t i = 0; i < rank; ++i) s += (p[i] = rng.uniform(0.1, 1.0));
  for (auto& x : p) x /= s;
  Matrix rho = with_spectrum(unitary(d, rng), p);
  // Clean rounding so the trace is exactly representable as 1.
  const cplx tr = rho.trace();
  rho *= cplx(1.0 / tr.real());
  return rho;
}

inline Matrix pure_state(std::size_t d, Xoshiro256& rng) {
  std::vector<cplx> v(d);
  double n = 0.0;
  for (auto& x : v) n += std::norm(x = cplx(normal(rng), normal(rng)));
  for (auto& x : v) x /= std::sqrt(n);
  return Matrix::outer(v);
}

}  // namespace gen

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct CheckResult {
  CheckResult(std::string s, std::string c, double tol) : suite(std::move(s)), check(std::move(c)), tolerance(tol) {}

  std::string suite;
  std::string check;
  bool passed = true;
  double worst = 0.0;      // largest observed violation or error
  double tolerance = 0.0;
  std::size_t cases = 0;
  std::string detail;

  void observe(double err) {
    ++cases;
    if (!(err <= worst)) worst = std::isnan(err) ? kInf : std::max(worst, err);
    passed = passed && err <= tolerance;
  }

  nlohmann::json to_json() const {
    return {{"suite", suite}, {"check", check}, {"pass", passed}, {"worst", worst},
            {"tolerance", tolerance}, {"cases", cases}, {"detail", detail}};
  }
};

using SuiteReport = std::vector<CheckResult>;

inline bool all_passed(const SuiteReport& r) {
  return std::all_of(r.begin(), r.end(), [](const CheckResult& c) { return c.passed; });
}

inline void write_report(std::ostream& os, const SuiteReport& r) {
  for (const auto& c : r) os << c.to_json().dump() << '\n';
}

namespace verify {

inline double rel(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

/// Basic properties: non-negativity, additivity, shift, monotonicity in gamma.
inline SuiteReport properties(std::size_t count = 100, std::uint64_t seed = 1, double tol = 1e-9) {
  Xoshiro256 rng(seed);
  CheckResult nonneg{"properties", "non-negativity", tol};
  CheckResult add{"properties", "additivity", tol};
  CheckResult shift{"properties", "shift", tol};
  CheckResult mono{"properties", "monotone-in-gamma", tol};
  CheckResult dense_add{"properties", "additivity-dense", tol};
  for (std::size_t c = 0; c < count; ++c) {
    const auto d = gen::distribution(rng);
    const auto e = gen::distribution(rng);
    const Tilt t(std::copysign(std::pow(10.0, rng.uniform(-2.0, 1.0)), rng.uniform() - 0.5));
    nonneg.observe(std::max(0.0, -qtl_exact(d.shifted(-d.min_value()), t)));
    add.observe(rel(qtl_exact(d.convolve(e), t), qtl_exact(d, t) + qtl_exact(e, t)));
    const double cst = rng.uniform(-10.0, 10.0);
    shift.observe(rel(qtl_exact(d.shifted(cst), t), qtl_exact(d, t) + cst));
    double prev = -kInf;
    for (int i = 0; i <= 40; ++i) {
      const double g = -20.0 + i;
      const double l = qtl_exact(d, Tilt(g));
      mono.observe(std::max(0.0, prev - l));
      prev = l;
    }
    if (c % 10 == 0) {
      // O = O_A (x) I + I (x) O_B on a product state.
      const std::size_t da = 2, db = 3;
      const Matrix oa = gen::hermitian(da, rng), ob = gen::hermitian(db, rng);
      const Matrix ra = gen::density(da, da, rng), rb = gen::density(db, db, rng);
      const Matrix o = kron(oa, Matrix::identity(db)) + kron(Matrix::identity(da), ob);
      const double lhs = qtl_dense(DenseOperatorPair(o, kron(ra, rb)), t);
      const double rhs = qtl_dense(DenseOperatorPair(oa, ra), t) + qtl_dense(DenseOperatorPair(ob, rb), t);
      dense_add.observe(rel(lhs, rhs));
    }
  }
  return {nonneg, add, shift, mono, dense_add};
}

/// Large-|gamma| limits approach the extreme outcomes.
inline SuiteReport limits(std::size_t count = 100, std::uint64_t seed = 2) {
  Xoshiro256 rng(seed);
  CheckResult lo{"limits", "gamma=-1e4 -> min", 1e-3};
  CheckResult hi{"limits", "gamma=+1e4 -> max", 1e-3};
  for (std::size_t c = 0; c < count; ++c) {
    const auto d = gen::distribution(rng);
    const double range = d.max_value() - d.min_value();
    lo.observe(std::abs(qtl_exact(d, Tilt(-1e4)) - d.min_value()) / (1.0 + range));
    hi.observe(std::abs(qtl_exact(d, Tilt(1e4)) - d.max_value()) / (1.0 + range));
  }
  return {lo, hi};
}

/// Faithfulness: never below o_min; equal on ground-supported states.
inline SuiteReport faithfulness(std::size_t count = 100, std::uint64_t seed = 3) {
  Xoshiro256 rng(seed);
  CheckResult bound{"faithfulness", "qtl >= o_min", 1e-9};
  CheckResult eq{"faithfulness", "equality on ground space", 1e-9};
  for (std::size_t c = 0; c < count; ++c) {
    const std::size_t d = 2 + rng.below(15);
    const std::size_t g = 1 + rng.below(std::min<std::size_t>(3, d - 1));  // ground degeneracy
    std::vector<double> spec(d);
    const double omin = rng.uniform(-3.0, 0.0);
    for (std::size_t i = 0; i < d; ++i) spec[i] = i < g ? omin : omin + rng.uniform(0.1, 4.0);
    const Matrix u = gen::unitary(d, rng);
    const Matrix o = gen::with_spectrum(u, spec);
    const Tilt t(std::copysign(std::pow(10.0, rng.uniform(-1.0, 1.5)), rng.uniform() - 0.5));
    const Matrix rho = gen::density(d, 1 + rng.below(d), rng);
    bound.observe(std::max(0.0, omin - qtl_dense(DenseOperatorPair(o, rho), t)));
    // Mixture of ground eigenvectors.
    std::vector<double> w(d, 0.0);
    double s = 0.0;
    for (std::size_t i = 0; i < g; ++i) s += (w[i] = rng.uniform(0.1, 1.0));
    for (auto& x : w) x /= s;
    Matrix ground = gen::with_spectrum(u, w);
    ground *= cplx(1.0 / ground.trace().real());
    eq.observe(std::abs(qtl_dense(DenseOperatorPair(o, ground), t) - omin));
  }
  return {bound, eq};
}

/// Gibbs variational inequality sign, and tightness at the Esscher state
/// when O and rho commute.
inline SuiteReport variational(std::size_t count = 100, std::size_t commuting = 50, std::uint64_t seed = 4) {
  Xoshiro256 rng(seed);
  CheckResult sign{"variational", "gap sign", 1e-9};
  CheckResult tight{"variational", "zero gap at Esscher state (commuting)", 1e-8};
  const double gammas[] = {-2.0, -0.5, 0.5, 2.0};
  for (std::size_t c = 0; c < count; ++c) {
    const std::size_t d = 2 + rng.below(5);
    const DenseOperatorPair pair(gen::hermitian(d, rng), gen::density(d, d, rng));
    const Tilt t(gammas[c % 4]);
    const Matrix sigma = gen::density(d, 1 + rng.below(d), rng);
    const double gap = gibbs_variational_gap(pair, t, sigma);
    sign.observe(t.gamma > 0 ? std::max(0.0, -gap) : std::max(0.0, gap));
  }
  for (std::size_t c = 0; c < commuting; ++c) {
    const std::size_t d = 2 + rng.below(5);
    const Matrix u = gen::unitary(d, rng);
    std::vector<double> ov(d), pv(d);
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      ov[i] = rng.uniform(-2.0, 2.0);
      s += (pv[i] = rng.uniform(0.1, 1.0));
    }
    for (auto& x : pv) x /= s;
    Matrix rho = gen::with_spectrum(u, pv);
    rho *= cplx(1.0 / rho.trace().real());
    const DenseOperatorPair pair(gen::with_spectrum(u, ov), rho);
    const Tilt t(gammas[c % 4]);
    tight.observe(std::abs(gibbs_variational_gap(pair, t, esscher_state(pair, t))));
  }
  return {sign, tight};
}

/// CVaR >= L_gamma + log(1/alpha)/gamma, exact and empirical, plus the
/// EVaR <= CVaR <= VaR chain.
inline SuiteReport risk_bounds(std::size_t count = 500, std::uint64_t seed = 5) {
  Xoshiro256 rng(seed);
  CheckResult exact{"risk_bounds", "CVaR >= QTL + log(1/a)/g", 1e-12};
  CheckResult chain{"risk_bounds", "EVaR <= CVaR <= VaR", 1e-12};
  CheckResult emp{"risk_bounds", "empirical CVaR >= empirical QTL + log(1/a)/g", 1e-12};
  for (std::size_t c = 0; c < count; ++c) {
    const auto d = gen::distribution(rng);
    const double g = -std::pow(10.0, rng.uniform(-2.0, 2.0));
    const RiskLevel a(rng.uniform(0.01, 0.99));
    const double corr = std::log(1.0 / a.alpha()) / g;
    const double cv = cvar_alpha(d, a);
    exact.observe(std::max(0.0, qtl_exact(d, Tilt(g)) + corr - cv));
    const double ev = evar_alpha(d, a).value;
    chain.observe(std::max({0.0, ev - cv, cv - var_alpha(d, a)}));
    std::vector<double> samples(1 + rng.below(200));
    for (auto& x : samples) x = std::floor(rng.uniform(-5.0, 5.0) * 4.0) / 4.0;  // ties on purpose
    const SampleSet s(samples);
    emp.observe(std::max(0.0, empirical_qtl(s, Tilt(g)) + corr - empirical_cvar(s, a)));
  }
  return {exact, chain, emp};
}

/// EVaR at alpha = p1/2 on Gibbs spectra reaches E_min.
inline SuiteReport evar(std::size_t count = 20, std::uint64_t seed = 6) {
  Xoshiro256 rng(seed);
  CheckResult r{"evar", "|EVaR - E_min| at alpha = p1/2", 1e-3};
  for (std::size_t c = 0; c < count; ++c) {
    const std::size_t d = 2 + rng.below(9);
    std::vector<double> e(d);
    for (auto& x : e) x = rng.uniform(-3.0, 3.0);
    const double beta = rng.uniform(0.2, 3.0);
    const auto dist = gibbs_distribution(e, beta);
    const double p1 = dist.outcomes().front().probability;
    r.observe(std::abs(evar_alpha(dist, RiskLevel(0.5 * p1)).value - dist.min_value()));
  }
  return {r};
}

/// (1/g) log tr(sigma^g rho) <= ((g-1)/g) D_g(sigma||rho), equality for pure rho.
inline SuiteReport renyi(std::size_t count = 100, std::uint64_t seed = 7) {
  Xoshiro256 rng(seed);
  CheckResult bound{"renyi", "QTL(log sigma) <= (g-1)/g D_g", 1e-9};
  CheckResult eq{"renyi", "equality for pure rho", 1e-8};
  for (std::size_t c = 0; c < count; ++c) {
    const std::size_t d = 2 + rng.below(5);
    const double g = c % 2 == 0 ? rng.uniform(0.05, 0.95) : rng.uniform(1.05, 3.0);
    const Matrix sigma = gen::density(d, d, rng);
    const Matrix rho = gen::density(d, d, rng);
    const double lhs = qtl_log_state(sigma, rho, g);
    const double rhs = (g - 1.0) / g * petz_renyi(sigma, rho, g);
    bound.observe(std::max(0.0, lhs - rhs));
    // Pure rho; for g > 1 the support condition forces sigma = rho.
    const Matrix psi = gen::pure_state(d, rng);
    const double gp = c % 2 == 0 ? g : rng.uniform(0.05, 0.95);
    eq.observe(std::abs(qtl_log_state(sigma, psi, gp) - (gp - 1.0) / gp * petz_renyi(sigma, psi, gp)));
    if (c % 10 == 1) eq.observe(std::abs(qtl_log_state(psi, psi, g) - (g - 1.0) / g * petz_renyi(psi, psi, g)));
  }
  return {bound, eq};
}

/// Random diagonal observable with energies in [-2, 2].
inline DiagonalObservable random_diagonal(unsigned n, Xoshiro256& rng) {
  std::vector<double> e(std::size_t{1} << n);
  for (auto& x : e) x = rng.uniform(-2.0, 2.0);
  return DiagonalObservable::from_table(n, std::move(e));
}

/// Shift rule on Z_gamma against central differences of the exact loss and,
/// on the projector benchmark, against the closed-form gradient.
inline SuiteReport shift_rule(std::size_t count = 50, std::uint64_t seed = 8) {
  Xoshiro256 rng(seed);
  CheckResult fd{"shift_rule", "shift rule vs finite differences", 1e-7};
  CheckResult analytic{"shift_rule", "shift rule vs analytic (projector)", 1e-7};
  for (std::size_t c = 0; c < count; ++c) {
    const unsigned n = 1 + static_cast<unsigned>(rng.below(3));
    const auto circ = RotationCircuit::random(random_diagonal(n, rng), 1 + static_cast<unsigned>(rng.below(2)), rng);
    std::vector<double> th(circ.parameter_count());
    for (auto& x : th) x = rng.uniform(0.0, kTwoPi);
    const Tilt t(c % 10 == 0 ? 0.0 : rng.uniform(-3.0, 3.0));
    const auto num = finite_difference_gradient([&](std::span<const double> x) { return circ.loss(x, t.gamma); }, th, 1e-5);
    for (std::size_t k = 0; k < th.size(); ++k) fd.observe(std::abs(shift_rule_gradient(circ, th, k, 0.5, t) - num[k]));

    const ProductCircuit prod(global_projector_observable(n));
    std::vector<double> ph(n);
    for (auto& x : ph) x = rng.uniform(-kPi, kPi);
    for (std::size_t k = 0; k < n; ++k)
      analytic.observe(std::abs(shift_rule_gradient(prod, ph, k, 0.5, t) - grad_qtl_projector(ph, k, t)));
  }
  return {fd, analytic};
}

/// Hessian of L vs (1/(g Z)) Hess Z - g grad L grad L^T on 2-qubit, p = 1
/// QAOA (single-edge MaxCut) with exact probabilities.
inline SuiteReport hessian(std::size_t count = 20, std::uint64_t seed = 9, double h = 1e-4) {
  Xoshiro256 rng(seed);
  CheckResult r{"hessian", "relative Frobenius error", 1e-4};
  const QaoaObjective obj(maxcut_hamiltonian(Graph(2, {{0, 1}})), 1, 0);
  for (std::size_t c = 0; c < count; ++c) {
    std::vector<double> x = {rng.uniform(0.0, kTwoPi), rng.uniform(0.0, kTwoPi)};
    const double g = std::copysign(rng.uniform(0.2, 2.0), rng.uniform() - 0.5);
    auto loss = [&](std::span<const double> p) { return obj.loss(p, g, 0); };
    auto part = [&](std::span<const double> p) { return obj.partition(p, g); };
    const auto hl = hessian_fd(loss, x, h);
    const auto hz = hessian_fd(part, x, h);
    const auto gl = finite_difference_gradient(loss, x, 1e-6);
    const double z = part(x);
    RealMatrix diff(2);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) diff(i, j) = hl(i, j) - (hz(i, j) / (g * z) - g * gl[i] * gl[j]);
    r.observe(diff.frobenius_norm() / hl.frobenius_norm());
  }
  return {r};
}

/// Simulator QTL of O_G on the product ansatz equals phi_gamma(C_G).
inline SuiteReport projector(std::size_t count = 50, std::uint64_t seed = 10) {
  Xoshiro256 rng(seed);
  CheckResult r{"projector", "simulator QTL == phi(C_G)", 1e-12};
  const double fixed[] = {-20.0, -6.0, 1e-9, 3.0};
  for (std::size_t c = 0; c < count; ++c) {
    const unsigned n = 1 + static_cast<unsigned>(rng.below(8));
    const ProductCircuit circ(global_projector_observable(n));
    std::vector<double> th(n);
    for (auto& x : th) x = rng.uniform(-kPi, kPi);
    const double g = c < 40 ? fixed[c % 4] : rng.uniform(-10.0, 5.0);
    r.observe(std::abs(circ.loss(th, g) - qtl_projector(th, Tilt(g))));
  }
  return {r};
}

/// Variance regimes of the projector benchmark.
inline SuiteReport variance(std::uint64_t trials = 1000000, std::uint64_t seed = 11, unsigned workers = 1) {
  CheckResult ratio{"variance", "fixed tilt: Var(n+1)/Var(n) within 10% of 3/8", 0.10};
  CheckResult parity{"variance", "mean gradient within 3 SE of 0 (z-score)", 3.0};
  CheckResult bound{"variance", "scheduled: Var >= bound - 3 SE (shortfall)", 0.0};
  CheckResult poly{"variance", "scheduled: Var (n-1)^2 >= const - 3 SE (shortfall)", 0.0};
  double prev = 0.0;
  for (unsigned n = 2; n <= 10; ++n) {
    const auto v = gradient_variance_mc(n, -0.1, trials, derive_seed(seed, {1, n}), workers);
    if (n > 2) ratio.observe(std::abs(v.variance / prev / 0.375 - 1.0));
    parity.observe(std::abs(v.mean) / v.mean_std_error);
    prev = v.variance;
  }
  const double cst = scheduled_variance_constant();
  for (unsigned n = 2; n <= 12; ++n) {
    const double g = schedule_gamma(n);
    const auto v = gradient_variance_mc(n, g, trials, derive_seed(seed, {2, n}), workers);
    const double m = (n - 1.0) * (n - 1.0);
    bound.observe(std::max(0.0, variance_lower_bound(n, g) - 3.0 * v.std_error - v.variance));
    poly.observe(std::max(0.0, cst - 3.0 * v.std_error * m - v.variance * m));
  }
  return {ratio, parity, bound, poly};
}

/// Coverage of the Hoeffding shot budget on a fixed two-outcome law.
inline SuiteReport shot_budget(std::size_t estimates = 200, std::uint64_t seed = 12) {
  CheckResult r{"shot_budget", "fraction outside epsilon", 0.10};
  const ShotBudgetQuery q{-1.0, 1.0, 0.1, 0.1};
  const auto m = hoeffding_shots(q);
  const std::vector<double> probs = {0.3, 0.7};  // outcomes 0 and 1
  const auto exact = qtl_exact(OutcomeDistribution::normalized(std::vector<double>{0.0, 1.0}, probs), Tilt(q.gamma));
  std::size_t misses = 0;
  for (std::size_t i = 0; i < estimates; ++i) {
    const auto z = sample_indices(probs, m, derive_seed(seed, {i}));
    std::vector<double> e(z.begin(), z.end());
    if (std::abs(empirical_qtl(SampleSet(std::move(e)), Tilt(q.gamma)) - exact) > q.epsilon) ++misses;
  }
  r.cases = estimates;
  r.worst = static_cast<double>(misses) / static_cast<double>(estimates);
  r.passed = r.worst <= r.tolerance;
  r.detail = "m=" + std::to_string(m);
  return {r};
}

inline const std::map<std::string, std::function<SuiteReport()>>& suites() {
  static const std::map<std::string, std::function<SuiteReport()>> table = {
      {"properties", [] { return properties(); }},
      {"limits", [] { return limits(); }},
      {"faithfulness", [] { return faithfulness(); }},
      {"variational", [] { return variational(); }},
      {"risk_bounds", [] { return risk_bounds(); }},
      {"evar", [] { return evar(); }},
      {"renyi", [] { return renyi(); }},
      {"shift_rule", [] { return shift_rule(); }},
      {"hessian", [] { return hessian(); }},
      {"projector", [] { return projector(); }},
      {"variance", [] { return variance(); }},
      {"shot_budget", [] { return shot_budget(); }},
  };
  return table;
}

}  // namespace verify
}  // namespace qtl
