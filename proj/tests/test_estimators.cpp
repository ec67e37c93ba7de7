#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "qtl/verify.hpp"

using namespace qtl;

namespace {

SampleSet draws(const std::vector<double>& values, const std::vector<double>& probs, std::size_t k, std::uint64_t seed) {
  std::vector<double> e;
  e.reserve(k);
  for (auto z : sample_indices(probs, k, seed)) e.push_back(values[z]);
  return SampleSet(std::move(e));
}

}  // namespace

TEST(EmpiricalMean, Examples) {
  EXPECT_EQ(empirical_mean(SampleSet({1.0, 1.0, 1.0})), 1.0);
  EXPECT_EQ(empirical_mean(SampleSet({0.0, 1.0})), 0.5);
  EXPECT_THROW(SampleSet(std::vector<double>{}), InputError);
}

TEST(EmpiricalMean, GibbsSamplesWithinFiveStdErr) {
  const std::vector<double> e = {-2.0, -1.0, 0.0, 1.5};
  const auto g = gibbs_distribution(e, 0.8);
  std::vector<double> v, p;
  for (const auto& o : g.outcomes()) v.push_back(o.value), p.push_back(o.probability);
  const std::size_t k = 100000;
  EXPECT_NEAR(empirical_mean(draws(v, p, k, 61)), g.mean(), 5.0 * std::sqrt(g.variance() / k));
}

TEST(EmpiricalQtl, Examples) {
  for (double g : {-3.0, 0.0, 2.0}) EXPECT_NEAR(empirical_qtl(SampleSet({1.25, 1.25, 1.25}), Tilt(g)), 1.25, 1e-15);
  EXPECT_NEAR(empirical_qtl(SampleSet({0.0, 1.0}), Tilt(-1.0)), -std::log((1.0 + std::exp(-1.0)) / 2.0), 1e-15);
  EXPECT_EQ(empirical_qtl(SampleSet({0.0, 1.0, 5.0}), Tilt(0.0)), 2.0);
}

TEST(EmpiricalQtl, ConsistentWithExactLoss) {
  const std::vector<double> v = {0.0, 1.0}, p = {0.3, 0.7};
  const double g = -1.0;
  const std::size_t k = 1000000;
  const double exact = qtl_exact(OutcomeDistribution::normalized(v, p), Tilt(g));
  // Delta method: sd(e^{gE}) / (|g| E[e^{gE}] sqrt K).
  const double m1 = p[0] + p[1] * std::exp(g), m2 = p[0] + p[1] * std::exp(2 * g);
  const double se = std::sqrt(m2 - m1 * m1) / (std::abs(g) * m1 * std::sqrt(static_cast<double>(k)));
  EXPECT_NEAR(empirical_qtl(draws(v, p, k, 62), Tilt(g)), exact, 5.0 * se);
}

TEST(EmpiricalQtl, StableAtLargeTilt) {
  const SampleSet s({-40.0, 0.0, 30.0});
  EXPECT_NEAR(empirical_qtl(s, Tilt(-100.0)), -40.0 + std::log(3.0) / 100.0, 1e-12);
  EXPECT_NEAR(empirical_qtl(s, Tilt(100.0)), 30.0 - std::log(3.0) / 100.0, 1e-12);
}

TEST(EmpiricalCvar, Examples) {
  const SampleSet s({3.0, 1.0, 2.0, 0.0});
  EXPECT_EQ(empirical_cvar(s, RiskLevel(0.5)), 0.5);
  EXPECT_EQ(empirical_cvar(s, RiskLevel(1.0)), empirical_mean(s));
  EXPECT_EQ(empirical_cvar(s, RiskLevel(0.3)), 0.5);  // ceil(1.2) = 2
  for (double a : {0.01, 0.5, 1.0}) EXPECT_EQ(empirical_cvar(SampleSet({7.0}), RiskLevel(a)), 7.0);
}

TEST(EmpiricalRisk, CvarBoundsTiltedLossOnSamples) {
  Xoshiro256 rng(63);
  for (int c = 0; c < 200; ++c) {
    std::vector<double> e(1 + rng.below(50));
    for (auto& x : e) x = std::round(rng.uniform(-3.0, 3.0));
    const SampleSet s(e);
    const RiskLevel a(rng.uniform(0.05, 1.0));
    const double g = -std::pow(10.0, rng.uniform(-1.0, 1.5));
    EXPECT_GE(empirical_cvar(s, a), empirical_qtl(s, Tilt(g)) + std::log(1.0 / a.alpha()) / g - 1e-12);
  }
}

TEST(SampleEnergies, UsesObservableTable) {
  const auto h = maxcut_hamiltonian(Graph(2, {{0, 1}}));
  const auto s = sample_energies(StateVector::basis(2, 1), h, 10, 3);
  EXPECT_EQ(s.source_seed, 3u);
  for (double e : s.energies) EXPECT_EQ(e, -1.0);
}

TEST(Hoeffding, Examples) {
  EXPECT_EQ(hoeffding_shots({-1.0, 1.0, 0.1, 0.05}), 2179u);
  const double direct = 200.0 * std::pow(std::exp(1.0) - 1.0, 2) * std::log(40.0);
  EXPECT_EQ(hoeffding_shots({-1.0, 1.0, 0.1, 0.05}), static_cast<std::uint64_t>(std::ceil(direct)));
  EXPECT_EQ(hoeffding_shots({2.0, 0.0, 0.1, 0.05}), 1u);
  EXPECT_THROW(hoeffding_shots({-20.0, 1.0, 0.1, 0.05}), PreconditionError);
  EXPECT_THROW(hoeffding_shots({0.0, 1.0, 0.1, 0.05}), InputError);
  EXPECT_THROW(hoeffding_shots({-1.0, 1.0, 0.1, 1.5}), InputError);
}

TEST(Hoeffding, MonotoneInInputs) {
  const auto base = hoeffding_shots({-1.0, 1.0, 0.1, 0.05});
  EXPECT_GT(hoeffding_shots({-1.0, 1.0, 0.05, 0.05}), base);
  EXPECT_GT(hoeffding_shots({-1.0, 1.0, 0.1, 0.01}), base);
  EXPECT_GT(hoeffding_shots({-1.0, 2.0, 0.1, 0.05}), base);
}

TEST(FiniteDifference, Examples) {
  auto sq = [](std::span<const double> x) { return x[0] * x[0]; };
  EXPECT_NEAR(finite_difference_gradient(sq, std::vector<double>{1.0}, 1e-4)[0], 2.0, 1e-7);
  EXPECT_NEAR(finite_difference_gradient(sq, std::vector<double>{0.0}, 1e-4)[0], 0.0, 1e-12);
  EXPECT_THROW(finite_difference_gradient(sq, std::vector<double>{0.0}, 0.0), InputError);
}

TEST(FiniteDifference, KeyedEvaluatorSeesCoordinateAndSign) {
  std::vector<std::pair<std::size_t, int>> seen;
  auto f = [&](std::span<const double>, EvalKey k) {
    seen.emplace_back(k.coordinate, k.sign);
    return 0.0;
  };
  finite_difference_gradient(f, std::vector<double>{0.0, 0.0}, 0.1);
  EXPECT_EQ(seen, (std::vector<std::pair<std::size_t, int>>{{0, 1}, {0, -1}, {1, 1}, {1, -1}}));
}

TEST(HessianFd, QuadraticIsExact) {
  // f = x^T A x / 2 + b^T x with symmetric A.
  const double a[3][3] = {{2.0, -1.0, 0.5}, {-1.0, 3.0, 0.25}, {0.5, 0.25, 1.0}};
  auto f = [&](std::span<const double> x) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
      s += 0.7 * x[i];
      for (int j = 0; j < 3; ++j) s += 0.5 * a[i][j] * x[i] * x[j];
    }
    return s;
  };
  const auto h = hessian_fd(f, std::vector<double>{0.3, -0.2, 1.1}, 1e-3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(h(i, j), a[i][j], 1e-6);
}

TEST(ShiftRule, ConstantLandscapeHasZeroGradient) {
  const ProductCircuit c(DiagonalObservable::from_table(2, {0.7, 0.7, 0.7, 0.7}));
  for (double g : {-1.0, 0.0, 2.0}) EXPECT_NEAR(shift_rule_gradient(c, std::vector<double>{0.3, 1.0}, 1, 0.5, Tilt(g)), 0.0, 1e-14);
}

TEST(ShiftRule, MatchesFiniteDifferencesOnRandomCircuits) {
  Xoshiro256 rng(64);
  for (int c = 0; c < 20; ++c) {
    const auto circ = RotationCircuit::random(verify::random_diagonal(3, rng), 2, rng);
    std::vector<double> th(circ.parameter_count());
    for (auto& x : th) x = rng.uniform(0.0, kTwoPi);
    const double g = c % 5 == 0 ? 0.0 : rng.uniform(-4.0, 4.0);
    // Richardson-extrapolated central differences, O(h^4).
    const auto f = [&](std::span<const double> x) { return circ.loss(x, g); };
    const auto coarse = finite_difference_gradient(f, th, 2e-4), fine = finite_difference_gradient(f, th, 1e-4);
    for (std::size_t k = 0; k < th.size(); ++k) {
      const double fd = (4.0 * fine[k] - coarse[k]) / 3.0;
      EXPECT_NEAR(shift_rule_gradient(circ, th, k, 0.5, Tilt(g)), fd, 1e-7 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(ShiftRule, InputErrors) {
  const ProductCircuit c(global_projector_observable(2));
  EXPECT_THROW(shift_rule_gradient(c, std::vector<double>{0.0, 0.0}, 2, 0.5, Tilt(1.0)), InputError);
  EXPECT_THROW(shift_rule_gradient(c, std::vector<double>{0.0, 0.0}, 0, 0.0, Tilt(1.0)), InputError);
}

TEST(NoiseToSignal, Examples) {
  const auto unit = noise_to_signal(std::vector<double>{1.0, 0.0}, 1.0, 1);
  EXPECT_DOUBLE_EQ(unit.ratio, 1.0);
  EXPECT_DOUBLE_EQ(unit.kl_divergence, 0.5);
  EXPECT_TRUE(unit.resolvable);
  EXPECT_DOUBLE_EQ(noise_to_signal(std::vector<double>{0.6, 0.8}, 2.0, 40).ratio,
                   noise_to_signal(std::vector<double>{0.6, 0.8}, 2.0, 10).ratio / 4.0);
  const auto flat = noise_to_signal(std::vector<double>{0.0, 0.0}, 1.0, 100);
  EXPECT_FALSE(flat.resolvable);
  EXPECT_TRUE(std::isinf(flat.ratio));
  EXPECT_THROW(noise_to_signal(std::vector<double>{1.0}, 1.0, 0), InputError);
}

TEST(TraceSampleCovariance, MatchesTwoPassFormula) {
  Xoshiro256 rng(65);
  std::vector<std::vector<double>> rows(50, std::vector<double>(3));
  for (auto& r : rows)
    for (auto& x : r) x = rng.uniform(-1.0, 1.0) * 1e3 + 1e6;  // large offset on purpose
  double tr = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    double m = 0.0, s = 0.0;
    for (const auto& r : rows) m += r[k];
    m /= rows.size();
    for (const auto& r : rows) s += (r[k] - m) * (r[k] - m);
    tr += s / (rows.size() - 1);
  }
  EXPECT_NEAR(trace_sample_covariance(rows), tr, 1e-9 * tr);
}

TEST(QaoaObjective, ExactAndSampledLoss) {
  const auto h = maxcut_hamiltonian(erdos_renyi(5, 0.6, 4));
  const QaoaObjective exact(h, 2, 0), shots(h, 2, 20000);
  EXPECT_FALSE(exact.stochastic());
  EXPECT_TRUE(shots.stochastic());
  const std::vector<double> x = {0.4, 1.1, 0.3, 2.0};
  const auto dist = born_distribution(h, probabilities(exact.state(x)));
  for (double g : {-2.0, 0.0, 1.0}) {
    EXPECT_NEAR(exact.loss(x, g, 0), qtl_exact(dist, Tilt(g)), 1e-12);
    EXPECT_EQ(shots.loss(x, g, 5), shots.loss(x, g, 5));
    EXPECT_NEAR(shots.loss(x, g, 5), qtl_exact(dist, Tilt(g)), 0.05);
  }
  EXPECT_EQ(exact.loss(x, 0.0, 0), exact.expectation(x));
  EXPECT_THROW(exact.loss(std::vector<double>{0.1, 0.2}, 0.0, 0), InputError);
}
