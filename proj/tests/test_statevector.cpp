#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "qtl/verify.hpp"

using namespace qtl;

namespace {

// Dense oracle: single-qubit unitary u on qubit q of n, with qubit 0 the
// least significant bit (rightmost Kronecker factor).
Matrix embed(const Matrix& u, unsigned q, unsigned n) {
  Matrix out = Matrix::identity(1);
  for (unsigned k = n; k-- > 0;) out = kron(out, k == q ? u : Matrix::identity(2));
  return out;
}

Matrix two_by_two(cplx a, cplx b, cplx c, cplx d) {
  Matrix m(2);
  m(0, 0) = a, m(0, 1) = b, m(1, 0) = c, m(1, 1) = d;
  return m;
}

std::vector<cplx> matvec(const Matrix& m, std::span<const amplitude> v) {
  std::vector<cplx> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += m(i, j) * v[j];
  return out;
}

StateVector random_state(unsigned n, Xoshiro256& rng) {
  std::vector<amplitude> a(std::size_t{1} << n);
  double s = 0.0;
  for (auto& x : a) s += std::norm(x = amplitude(gen::normal(rng), gen::normal(rng)));
  for (auto& x : a) x /= std::sqrt(s);
  return StateVector(n, std::move(a));
}

void expect_close(std::span<const amplitude> a, std::span<const cplx> b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LT(std::abs(a[i] - b[i]), tol) << "index " << i;
}

Graph triangle() { return Graph(3, {{0, 1}, {1, 2}, {0, 2}}); }

}  // namespace

TEST(PlusState, Amplitudes) {
  const auto one = plus_state(1);
  EXPECT_NEAR(one[0].real(), 1.0 / std::sqrt(2.0), 1e-16);
  EXPECT_NEAR(one[1].real(), 1.0 / std::sqrt(2.0), 1e-16);
  const auto two = plus_state(2);
  for (const auto& a : two.amplitudes()) EXPECT_EQ(a, amplitude(0.5));
  EXPECT_THROW(plus_state(0), InputError);
  EXPECT_THROW(plus_state(kMaxQubits + 1), ResourceError);
}

TEST(StateVector, RejectsUnnormalized) {
  EXPECT_THROW(StateVector(1, {1.0, 1.0}), InputError);
  EXPECT_THROW(StateVector(2, {1.0, 0.0}), InputError);
}

TEST(CostPhase, IdentityCases) {
  const auto h = maxcut_hamiltonian(triangle());
  Xoshiro256 rng(51);
  const auto s = random_state(3, rng);
  const auto same = apply_cost_phase(s, h, 0.0);
  const auto full = apply_cost_phase(s, h, kTwoPi);
  for (std::uint64_t z = 0; z < 8; ++z) {
    EXPECT_EQ(same[z], s[z]);
    EXPECT_LT(std::abs(full[z] - s[z]), 1e-14);
  }
  EXPECT_THROW(apply_cost_phase(s, maxcut_hamiltonian(Graph(2, {{0, 1}})), 1.0), InputError);
}

TEST(CostPhase, PhasesMatchEnergies) {
  const auto h = maxcut_hamiltonian(triangle());
  const auto s = apply_cost_phase(plus_state(3), h, 0.3);
  for (std::uint64_t z = 0; z < 8; ++z) EXPECT_LT(std::abs(s[z] - std::polar(1.0 / std::sqrt(8.0), -0.3 * h.energy(z))), 1e-15);
}

TEST(Mixer, Examples) {
  const auto zero = StateVector::basis(1, 0);
  const auto p = probabilities(apply_mixer(zero, kPi / 4));
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[1], 0.5, 1e-15);
  const auto plus = plus_state(3);
  for (double pr : probabilities(apply_mixer(plus, kPi))) EXPECT_NEAR(pr, 0.125, 1e-15);
  const auto id = apply_mixer(plus, 0.0);
  for (std::uint64_t z = 0; z < 8; ++z) EXPECT_EQ(id[z], plus[z]);
}

TEST(Mixer, MatchesKroneckerOracle) {
  Xoshiro256 rng(52);
  const unsigned n = 3;
  const double tau = 0.37;
  const auto s = random_state(n, rng);
  const Matrix u = two_by_two(std::cos(tau), cplx(0, -std::sin(tau)), cplx(0, -std::sin(tau)), std::cos(tau));
  Matrix full = Matrix::identity(8);
  for (unsigned q = 0; q < n; ++q) full = embed(u, q, n) * full;
  expect_close(apply_mixer(s, tau).amplitudes(), matvec(full, s.amplitudes()), 1e-14);
}

TEST(ProductRx, MatchesKroneckerOracleAndFlips) {
  Xoshiro256 rng(53);
  const std::vector<double> th = {0.3, -1.2, 2.5};
  const auto s = random_state(3, rng);
  Matrix full = Matrix::identity(8);
  for (unsigned q = 0; q < 3; ++q) {
    const double c = std::cos(th[q] / 2), sn = std::sin(th[q] / 2);
    full = embed(two_by_two(c, cplx(0, sn), cplx(0, sn), c), q, 3) * full;
  }
  expect_close(apply_product_rx(s, th).amplitudes(), matvec(full, s.amplitudes()), 1e-14);

  const auto zero = StateVector::basis(3, 0);
  const auto same = apply_product_rx(zero, std::vector<double>{0.0, 0.0, 0.0});
  EXPECT_EQ(same[0], amplitude(1.0));
  const auto flipped = probabilities(apply_product_rx(zero, std::vector<double>{0.0, kPi, 0.0}));
  EXPECT_NEAR(flipped[parse_bitstring("010")], 1.0, 1e-15);
  EXPECT_THROW(apply_product_rx(zero, std::vector<double>{0.0}), InputError);
}

TEST(Rotation, MatchesKroneckerOracle) {
  Xoshiro256 rng(54);
  const auto s = random_state(3, rng);
  const double th = 0.81, c = std::cos(th / 2), sn = std::sin(th / 2);
  const Matrix rx = two_by_two(c, cplx(0, -sn), cplx(0, -sn), c);
  const Matrix ry = two_by_two(c, -sn, sn, c);
  const Matrix rz = two_by_two(cplx(c, -sn), 0.0, 0.0, cplx(c, sn));
  expect_close(apply_rotation(s, 2, PauliAxis::X, th).amplitudes(), matvec(embed(rx, 2, 3), s.amplitudes()), 1e-14);
  expect_close(apply_rotation(s, 0, PauliAxis::Y, th).amplitudes(), matvec(embed(ry, 0, 3), s.amplitudes()), 1e-14);
  expect_close(apply_rotation(s, 1, PauliAxis::Z, th).amplitudes(), matvec(embed(rz, 1, 3), s.amplitudes()), 1e-14);
  EXPECT_THROW(apply_rotation(s, 3, PauliAxis::X, th), InputError);
}

TEST(Cz, SignOnBothSet) {
  const auto s = apply_cz(plus_state(2), 0, 1);
  EXPECT_EQ(s[3], amplitude(-0.5));
  EXPECT_EQ(s[1], amplitude(0.5));
  EXPECT_THROW(apply_cz(s, 1, 1), InputError);
}

TEST(Qaoa, ZeroAnglesGivePlusState) {
  const auto h = maxcut_hamiltonian(triangle());
  const auto s = qaoa_state(h, {{0.0}, {0.0}});
  for (const auto& a : s.amplitudes()) EXPECT_LT(std::abs(a - amplitude(1.0 / std::sqrt(8.0))), 1e-15);
  EXPECT_THROW(qaoa_state(h, {{0.1, 0.2}, {0.3}}), InputError);
}

TEST(Qaoa, DepthOneSingleEdgeClosedForm) {
  // Standard p = 1 edge formula 1/2 + sin(4 beta) sin(g) / 2, with g = -theta
  // because the phase uses H = -Cut.
  const auto h = maxcut_hamiltonian(Graph(2, {{0, 1}}));
  for (double th : {0.2, 1.1, 2.9})
    for (double tau : {0.1, 0.7, 2.0}) {
      const double cut = -expectation_diagonal(qaoa_state(h, {{th}, {tau}}), h);
      EXPECT_NEAR(cut, 0.5 - 0.5 * std::sin(4 * tau) * std::sin(th), 1e-14);
    }
}

TEST(QaoaParams, PackRoundTrip) {
  const QaoaParams p{{0.1, 0.2}, {0.3, 0.4}};
  const auto packed = p.pack();
  EXPECT_EQ(packed, (std::vector<double>{0.1, 0.2, 0.3, 0.4}));
  EXPECT_EQ(QaoaParams::unpack(packed).mixer_angles, p.mixer_angles);
  EXPECT_THROW(QaoaParams::unpack(std::vector<double>{0.1}), InputError);
}

TEST(Expectation, Examples) {
  for (unsigned n : {1u, 3u, 6u}) {
    const auto og = global_projector_observable(n);
    EXPECT_EQ(expectation_diagonal(StateVector::basis(n, 0), og), 0.0);
    EXPECT_NEAR(expectation_diagonal(plus_state(n), og), 1.0 - std::ldexp(1.0, -static_cast<int>(n)), 1e-15);
  }
  EXPECT_NEAR(expectation_diagonal(plus_state(3), maxcut_hamiltonian(triangle())), -1.5, 1e-15);
}

TEST(Probabilities, SumToOne) {
  Xoshiro256 rng(55);
  const auto h = maxcut_hamiltonian(erdos_renyi(6, 0.5, 1));
  const auto p = probabilities(qaoa_state(h, {{0.4, 1.3}, {0.2, 2.2}}));
  double s = 0.0;
  for (double x : p) s += x;
  EXPECT_NEAR(s, 1.0, 1e-13);
}

TEST(Sampling, DeterministicStateAndSeed) {
  const auto z0 = parse_bitstring("0110");
  for (auto z : sample_bitstrings(StateVector::basis(4, z0), 500, 9)) EXPECT_EQ(z, z0);
  for (auto z : sample_bitstrings(StateVector::basis(4, z0), 5, 9)) EXPECT_EQ(z, z0);
  const auto s = plus_state(3);
  EXPECT_EQ(sample_bitstrings(s, 1000, 77), sample_bitstrings(s, 1000, 77));
  EXPECT_NE(sample_bitstrings(s, 1000, 77), sample_bitstrings(s, 1000, 78));
  EXPECT_THROW(sample_bitstrings(s, 0, 1), InputError);
}

TEST(Sampling, PlusStateBinomial) {
  const auto z = sample_bitstrings(plus_state(1), 100000, 3);
  double zeros = 0;
  for (auto x : z) zeros += x == 0;
  const double p = zeros / 1e5, se = std::sqrt(0.25 / 1e5);
  EXPECT_NEAR(p, 0.5, 5 * se);
}

TEST(Sampling, AliasPathChiSquare) {
  const std::vector<double> probs = {0.05, 0.2, 0.0, 0.1, 0.3, 0.05, 0.25, 0.05};
  const std::size_t shots = 100000;  // > 2^3, alias table
  std::vector<double> counts(8, 0.0);
  for (auto z : sample_indices(probs, shots, 5)) counts[z] += 1;
  EXPECT_EQ(counts[2], 0.0);
  double chi2 = 0.0;
  for (std::size_t i = 0; i < 8; ++i)
    if (probs[i] > 0) chi2 += std::pow(counts[i] - shots * probs[i], 2) / (shots * probs[i]);
  EXPECT_LT(chi2, 22.46);  // chi-square, 6 dof, p = 0.001
}

TEST(Sampling, InverseCdfPathChiSquare) {
  std::vector<double> probs(1024, 0.0);
  probs[3] = 0.4, probs[100] = 0.1, probs[512] = 0.3, probs[1023] = 0.2;
  const std::size_t shots = 1000;  // <= 2^10, inverse CDF
  std::map<std::uint64_t, double> counts;
  for (auto z : sample_indices(probs, shots, 6)) counts[z] += 1;
  double chi2 = 0.0;
  for (auto [z, c] : counts) {
    ASSERT_GT(probs[z], 0.0) << "sampled a zero-probability outcome " << z;
    chi2 += std::pow(c - shots * probs[z], 2) / (shots * probs[z]);
  }
  EXPECT_LT(chi2, 16.27);  // 3 dof, p = 0.001
}

TEST(WriteState, OneLinePerAmplitude) {
  std::ostringstream os;
  write_state(os, StateVector::basis(2, 1));
  EXPECT_EQ(os.str(), "0 0 0\n1 1 0\n2 0 0\n3 0 0\n");
}
