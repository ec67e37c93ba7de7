#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qtl/optimizer.hpp"

using namespace qtl;

namespace {

// (x - pi)^2 summed over coordinates. The minimum sits inside [0, 2pi), so
// wrapping never interferes.
struct Bowl {
  double loss(std::span<const double> x, double, std::uint64_t) const {
    double s = 0.0;
    for (double v : x) s += (v - kPi) * (v - kPi);
    return s;
  }
  bool stochastic() const { return false; }
};

// Bowl plus seed-dependent noise, to exercise replay and seed plumbing.
struct NoisyBowl {
  double loss(std::span<const double> x, double g, std::uint64_t seed) const {
    Xoshiro256 rng(seed);
    return Bowl{}.loss(x, g, seed) + 0.01 * (rng.uniform() - 0.5);
  }
  bool stochastic() const { return true; }
};

struct SeedRecorder {
  mutable std::vector<std::uint64_t> seeds;
  double loss(std::span<const double>, double, std::uint64_t s) const {
    seeds.push_back(s);
    return 0.0;
  }
  bool stochastic() const { return true; }
};

}  // namespace

TEST(TiltSchedule, FixedAndAscendingEndpoints) {
  EXPECT_EQ(tilt_at(FixedTilt{-1.5}, 0, 100), -1.5);
  EXPECT_EQ(tilt_at(FixedTilt{-1.5}, 99, 100), -1.5);
  const LinearAscendingTilt asc{0.0, -3.7};
  EXPECT_EQ(tilt_at(asc, 0, 100), 0.0);
  EXPECT_EQ(tilt_at(asc, 99, 100), -3.7);
  EXPECT_NEAR(tilt_at(asc, 33, 100), 33.0 * -3.7 / 99.0, 1e-15);
  EXPECT_EQ(tilt_at(asc, 0, 1), -3.7);
  EXPECT_THROW(tilt_at(asc, 100, 100), InputError);
}

TEST(TiltSchedule, NonzeroStartInterpolatesMagnitude) {
  const LinearAscendingTilt asc{-1.0, -3.0};
  EXPECT_EQ(tilt_at(asc, 0, 5), -1.0);
  EXPECT_DOUBLE_EQ(tilt_at(asc, 2, 5), -2.0);
  EXPECT_EQ(tilt_at(asc, 4, 5), -3.0);
  double prev = 0.0;
  for (std::size_t t = 0; t < 5; ++t) {
    EXPECT_GE(std::abs(tilt_at(asc, t, 5)), prev);
    prev = std::abs(tilt_at(asc, t, 5));
  }
}

TEST(LearningRate, FormulaAndMonotonicity) {
  const OptimizerConfig c;
  EXPECT_NEAR(learning_rate(c, 0, 0.0), 0.3 / std::pow(11.0, 0.6), 1e-15);
  EXPECT_NEAR(learning_rate(c, 5, -2.0), 0.3 / std::pow(16.0, 0.6) / 2.0, 1e-15);
  for (std::size_t t = 0; t < 50; ++t) EXPECT_GE(learning_rate(c, t, -1.0), learning_rate(c, t + 1, -1.0));
  for (double g = 0.0; g < 4.0; g += 0.5) EXPECT_GE(learning_rate(c, 3, -g), learning_rate(c, 3, -g - 0.5));
}

TEST(WrapAngle, IntoHalfOpenInterval) {
  EXPECT_EQ(wrap_angle(0.0), 0.0);
  EXPECT_EQ(wrap_angle(kTwoPi), 0.0);
  EXPECT_NEAR(wrap_angle(-0.1), kTwoPi - 0.1, 1e-15);
  EXPECT_NEAR(wrap_angle(7.0), 7.0 - kTwoPi, 1e-15);
  for (double x : {-1e-18, -100.0, 1e6}) {
    const double w = wrap_angle(x);
    EXPECT_GE(w, 0.0);
    EXPECT_LT(w, kTwoPi);
  }
}

TEST(MomentumStep, ClipsThenAverages) {
  OptimizerConfig c;
  const std::vector<double> x = {1.0, 2.0}, g = {6.0, 8.0}, m = {0.0, 0.0};
  const auto r = momentum_step(x, g, m, c, 0.0, 0);
  EXPECT_DOUBLE_EQ(r.grad_norm_preclip, 10.0);
  EXPECT_NEAR(r.momentum[0], 0.1 * 0.6, 1e-15);
  EXPECT_NEAR(r.momentum[1], 0.1 * 0.8, 1e-15);
  EXPECT_NEAR(r.params[0], 1.0 - r.lr * 0.06, 1e-15);
  // Below the clip the gradient passes through.
  const auto s = momentum_step(x, std::vector<double>{0.3, 0.4}, m, c, 0.0, 0);
  EXPECT_NEAR(s.momentum[1], 0.1 * 0.4, 1e-15);
}

TEST(MomentumStep, NonFiniteGradientAborts) {
  const OptimizerConfig c;
  const std::vector<double> x = {1.0}, m = {0.5};
  const auto r = momentum_step(x, std::vector<double>{std::nan("")}, m, c, -1.0, 3);
  EXPECT_TRUE(r.aborted);
  EXPECT_EQ(r.params, x);
  EXPECT_EQ(r.momentum, m);
  EXPECT_THROW(momentum_step(x, std::vector<double>{1.0, 2.0}, m, c, 0.0, 0), InputError);
}

TEST(Profiles, Values) {
  const auto d = optimizer_profile("default");
  EXPECT_EQ(d.clip, 1.0);
  EXPECT_EQ(d.momentum_ratio, 0.9);
  EXPECT_EQ(d.base_lr, 0.3);
  EXPECT_EQ(d.decay_offset, 10.0);
  EXPECT_EQ(d.decay_power, 0.6);
  EXPECT_EQ(d.lr_penalty, 0.5);
  EXPECT_EQ(d.steps, 100u);
  EXPECT_EQ(d.shots_per_eval, 5000u);
  const auto a = optimizer_profile("ascending");
  EXPECT_EQ(a.lr_penalty, 0.25);
  EXPECT_NEAR(a.decay_power, 0.4, 1e-15);
  EXPECT_EQ(optimizer_profile("alt1").lr_penalty, 0.0);
  EXPECT_EQ(optimizer_profile("alt2").base_lr, 0.6);
  EXPECT_THROW(optimizer_profile("nope"), InputError);
}

TEST(OptimizerConfig, Validation) {
  OptimizerConfig c;
  c.momentum_ratio = 1.0;
  EXPECT_THROW(c.validate(), InputError);
  c = {};
  c.clip = 0.0;
  EXPECT_THROW(c.validate(), InputError);
}

TEST(RunOptimization, ZeroStepsReturnsInitialParams) {
  OptimizerConfig c;
  c.steps = 0;
  const std::vector<double> init = {0.1, 0.2};
  const auto r = run_optimization(Bowl{}, init, c, FixedTilt{-1.0}, 1);
  EXPECT_EQ(r.final_params, init);
  EXPECT_TRUE(r.steps.empty());
}

TEST(RunOptimization, ConvergesOnBowl) {
  OptimizerConfig c;
  c.steps = 400;
  c.lr_penalty = 0.0;
  c.base_lr = 1.0;
  const auto r = run_optimization(Bowl{}, {1.0, 5.0}, c, FixedTilt{0.0}, 1);
  for (double x : r.final_params) EXPECT_NEAR(x, kPi, 1e-3);
  EXPECT_LT(r.steps.back().loss, r.steps.front().loss);
}

TEST(RunOptimization, ReplayIsDeterministic) {
  OptimizerConfig c;
  c.steps = 30;
  const auto a = run_optimization(NoisyBowl{}, {1.0, 5.0}, c, LinearAscendingTilt{0.0, -2.0}, 42);
  const auto b = run_optimization(NoisyBowl{}, {1.0, 5.0}, c, LinearAscendingTilt{0.0, -2.0}, 42);
  const auto d = run_optimization(NoisyBowl{}, {1.0, 5.0}, c, LinearAscendingTilt{0.0, -2.0}, 43);
  EXPECT_EQ(a.final_params, b.final_params);
  EXPECT_NE(a.final_params, d.final_params);
  EXPECT_EQ(a.steps.front().gamma, 0.0);
  EXPECT_EQ(a.steps.back().gamma, -2.0);
}

TEST(RunOptimization, SeedsPerCoordinateAndSign) {
  OptimizerConfig c;
  c.steps = 2;
  SeedRecorder indep, crn;
  run_optimization(indep, {0.0, 0.0}, c, FixedTilt{0.0}, 9);
  c.common_random_numbers = true;
  run_optimization(crn, {0.0, 0.0}, c, FixedTilt{0.0}, 9);
  // Per step: one loss seed, then (k0+, k0-, k1+, k1-).
  ASSERT_EQ(indep.seeds.size(), 10u);
  std::set<std::uint64_t> distinct(indep.seeds.begin(), indep.seeds.end());
  EXPECT_EQ(distinct.size(), 10u);
  EXPECT_EQ(crn.seeds[1], crn.seeds[2]);
  EXPECT_EQ(crn.seeds[3], crn.seeds[4]);
  EXPECT_NE(crn.seeds[1], crn.seeds[3]);
  EXPECT_EQ(indep.seeds[1], gradient_seed(9, 0, 0, +1, false));
}

TEST(RunRecord, JsonLinesLayout) {
  OptimizerConfig c;
  c.steps = 3;
  const auto r = run_optimization(Bowl{}, {1.0, 2.0, 3.0, 4.0}, c, FixedTilt{-1.0}, 5);
  std::ostringstream os;
  r.write_jsonl(os);
  std::istringstream is(os.str());
  std::vector<nlohmann::json> lines;
  for (std::string l; std::getline(is, l);) lines.push_back(nlohmann::json::parse(l));
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0]["t"], 0);
  EXPECT_EQ(lines[2]["gamma"], -1.0);
  const auto& fin = lines[3]["final"];
  EXPECT_EQ(fin["theta"].size(), 2u);
  EXPECT_EQ(fin["tau"].size(), 2u);
  EXPECT_EQ(fin["master_seed"], 5);
}

TEST(RunOptimization, AscendingToZeroMatchesFixedZeroUnderSameConfig) {
  OptimizerConfig c;
  c.steps = 25;
  const auto fixed = run_optimization(NoisyBowl{}, {1.0, 5.0}, c, FixedTilt{0.0}, 77);
  const auto asc = run_optimization(NoisyBowl{}, {1.0, 5.0}, c, LinearAscendingTilt{0.0, 0.0}, 77);
  EXPECT_EQ(fixed.final_params, asc.final_params);
  for (const auto& s : asc.steps) EXPECT_EQ(s.gamma, 0.0);
}
