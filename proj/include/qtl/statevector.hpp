#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "qtl/common.hpp"
#include "qtl/rng.hpp"
#include "qtl/spectra.hpp"

namespace qtl {

using amplitude = std::complex<double>;

/// n-qubit pure state; amplitude index bit j is qubit j.
class StateVector {
 public:
  static constexpr double kNormTolerance = 1e-10;

  StateVector(unsigned n, std::vector<amplitude> amps) : n_(n), amps_(std::move(amps)) {
    check_qubits(n);
    if (amps_.size() != (std::uint64_t{1} << n)) throw InputError("amplitude count must be 2^n");
    if (std::abs(norm_squared() - 1.0) > kNormTolerance) throw InputError("state is not normalized");
  }

  /// |z> for a computational basis index.
  static StateVector basis(unsigned n, std::uint64_t z) {
    check_qubits(n);
    std::vector<amplitude> a(std::uint64_t{1} << n);
    if (z >= a.size()) throw InputError("basis index out of range");
    a[z] = 1.0;
    return StateVector(n, std::move(a));
  }

  unsigned qubit_count() const { return n_; }
  std::uint64_t dimension() const { return amps_.size(); }
  std::span<const amplitude> amplitudes() const { return amps_; }
  std::span<amplitude> amplitudes() { return amps_; }
  const amplitude& operator[](std::uint64_t z) const { return amps_[z]; }

  double norm_squared() const {
    double s = 0.0;
    for (const auto& a : amps_) s += std::norm(a);
    return s;
  }

  static void check_qubits(unsigned n) {
    if (n == 0) throw InputError("state needs at least one qubit");
    if (n > kMaxQubits) throw ResourceError("qubit count must lie in [1, 24]");
  }

 private:
  unsigned n_;
  std::vector<amplitude> amps_;
};

/// Hadamard layer on |0...0>.
inline StateVector plus_state(unsigned n) {
  StateVector::check_qubits(n);
  const std::uint64_t dim = std::uint64_t{1} << n;
  return StateVector(n, std::vector<amplitude>(dim, amplitude(1.0 / std::sqrt(static_cast<double>(dim)))));
}

/// a_z <- exp(-i theta E(z)) a_z.
inline StateVector apply_cost_phase(StateVector state, const DiagonalObservable& obs, double theta) {
  if (obs.qubit_count() != state.qubit_count()) throw InputError("observable and state qubit counts differ");
  auto a = state.amplitudes();
  for (std::uint64_t z = 0; z < a.size(); ++z) a[z] *= std::polar(1.0, -theta * obs.energy(z));
  return state;
}

namespace detail {

// Apply the 2x2 unitary [[u00, u01], [u10, u11]] to one qubit.
inline void apply_one_qubit(std::span<amplitude> a, unsigned qubit, amplitude u00, amplitude u01, amplitude u10,
                            amplitude u11) {
  const std::uint64_t stride = std::uint64_t{1} << qubit;
  for (std::uint64_t base = 0; base < a.size(); base += 2 * stride)
    for (std::uint64_t z = base; z < base + stride; ++z) {
      const amplitude a0 = a[z], a1 = a[z + stride];
      a[z] = u00 * a0 + u01 * a1;
      a[z + stride] = u10 * a0 + u11 * a1;
    }
}

}  // namespace detail

/// exp(-i tau X) on every qubit, i.e. exp(-i tau H_M) with H_M = sum_i X_i.
inline StateVector apply_mixer(StateVector state, double tau) {
  const double c = std::cos(tau), s = std::sin(tau);
  const amplitude diag(c, 0.0), off(0.0, -s);
  for (unsigned q = 0; q < state.qubit_count(); ++q) detail::apply_one_qubit(state.amplitudes(), q, diag, off, off, diag);
  return state;
}

/// Product of exp(+i theta_j X_j / 2): the tensor-product benchmark ansatz.
inline StateVector apply_product_rx(StateVector state, std::span<const double> angles) {
  if (angles.size() != state.qubit_count()) throw InputError("need one angle per qubit");
  for (unsigned q = 0; q < state.qubit_count(); ++q) {
    const double c = std::cos(angles[q] / 2), s = std::sin(angles[q] / 2);
    detail::apply_one_qubit(state.amplitudes(), q, c, amplitude(0, s), amplitude(0, s), c);
  }
  return state;
}

enum class PauliAxis { X, Y, Z };

/// exp(-i theta P / 2) on one qubit; generator P/2 has eigenvalues +-1/2.
inline StateVector apply_rotation(StateVector state, unsigned qubit, PauliAxis axis, double theta) {
  if (qubit >= state.qubit_count()) throw InputError("qubit index out of range");
  const double c = std::cos(theta / 2), s = std::sin(theta / 2);
  switch (axis) {
    case PauliAxis::X:
      detail::apply_one_qubit(state.amplitudes(), qubit, c, amplitude(0, -s), amplitude(0, -s), c);
      break;
    case PauliAxis::Y:
      detail::apply_one_qubit(state.amplitudes(), qubit, c, -s, s, c);
      break;
    case PauliAxis::Z:
      detail::apply_one_qubit(state.amplitudes(), qubit, amplitude(c, -s), 0.0, 0.0, amplitude(c, s));
      break;
  }
  return state;
}

inline StateVector apply_cz(StateVector state, unsigned a, unsigned b) {
  if (a >= state.qubit_count() || b >= state.qubit_count() || a == b) throw InputError("bad CZ qubits");
  auto amps = state.amplitudes();
  const std::uint64_t mask = (std::uint64_t{1} << a) | (std::uint64_t{1} << b);
  for (std::uint64_t z = 0; z < amps.size(); ++z)
    if ((z & mask) == mask) amps[z] = -amps[z];
  return state;
}

/// Depth-p QAOA parameters: cost angles theta_k and mixer angles tau_k.
struct QaoaParams {
  std::vector<double> cost_angles;
  std::vector<double> mixer_angles;

  std::size_t depth() const { return cost_angles.size(); }

  /// Packed layout [theta_1..theta_p, tau_1..tau_p] used by the optimizer.
  static QaoaParams unpack(std::span<const double> packed) {
    if (packed.empty() || packed.size() % 2 != 0) throw InputError("packed QAOA parameters need even length >= 2");
    const std::size_t p = packed.size() / 2;
    return {std::vector<double>(packed.begin(), packed.begin() + p), std::vector<double>(packed.begin() + p, packed.end())};
  }

  std::vector<double> pack() const {
    std::vector<double> out(cost_angles);
    out.insert(out.end(), mixer_angles.begin(), mixer_angles.end());
    return out;
  }
};

/// U_M(tau_p) U_C(theta_p) ... U_M(tau_1) U_C(theta_1) |+>^n.
inline StateVector qaoa_state(const DiagonalObservable& obs, const QaoaParams& params) {
  if (params.depth() < 1 || params.mixer_angles.size() != params.depth())
    throw InputError("QAOA needs depth >= 1 with matching angle counts");
  StateVector s = plus_state(obs.qubit_count());
  for (std::size_t k = 0; k < params.depth(); ++k) {
    s = apply_cost_phase(std::move(s), obs, params.cost_angles[k]);
    s = apply_mixer(std::move(s), params.mixer_angles[k]);
  }
  return s;
}

inline std::vector<double> probabilities(const StateVector& state) {
  std::vector<double> p(state.dimension());
  for (std::uint64_t z = 0; z < p.size(); ++z) p[z] = std::norm(state[z]);
  return p;
}

inline double expectation_diagonal(const StateVector& state, const DiagonalObservable& obs) {
  if (obs.qubit_count() != state.qubit_count()) throw InputError("observable and state qubit counts differ");
  double e = 0.0;
  for (std::uint64_t z = 0; z < state.dimension(); ++z) e += std::norm(state[z]) * obs.energy(z);
  return e;
}

/// Walker/Vose alias table for O(1) draws from a fixed distribution.
class AliasTable {
 public:
  explicit AliasTable(std::span<const double> weights) : prob_(weights.size()), alias_(weights.size()) {
    const std::size_t k = weights.size();
    double total = 0.0;
    for (double w : weights) total += w;
    std::vector<double> scaled(k);
    std::vector<std::uint64_t> small, large;
    for (std::size_t i = 0; i < k; ++i) {
      scaled[i] = weights[i] * static_cast<double>(k) / total;
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const auto s = small.back(), l = large.back();
      small.pop_back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (auto i : large) prob_[i] = 1.0, alias_[i] = i;
    for (auto i : small) prob_[i] = 1.0, alias_[i] = i;
  }

  std::uint64_t sample(Xoshiro256& rng) const {
    const std::uint64_t column = rng.below(prob_.size());
    return rng.uniform() < prob_[column] ? column : alias_[column];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::uint64_t> alias_;
};

/// i.i.d. computational-basis outcomes. Uses an alias table when shots
/// exceed 2^n, otherwise inverse-CDF binary search on the cumulative table.
inline std::vector<std::uint64_t> sample_indices(std::span<const double> probs, std::size_t shots, std::uint64_t seed) {
  if (shots < 1) throw InputError("shots must be positive");
  Xoshiro256 rng(seed);
  std::vector<std::uint64_t> out(shots);
  if (shots > probs.size()) {
    AliasTable table(probs);
    for (auto& z : out) z = table.sample(rng);
    return out;
  }
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (std::size_t z = 0; z < probs.size(); ++z) cdf[z] = (acc += probs[z]);
  // Never land on a trailing zero-probability outcome.
  std::size_t last = probs.size() - 1;
  while (last > 0 && probs[last] <= 0.0) --last;
  for (auto& z : out) {
    const double u = rng.uniform() * acc;
    const auto idx = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    z = std::min(idx, last);
  }
  return out;
}

inline std::vector<std::uint64_t> sample_bitstrings(const StateVector& state, std::size_t shots, std::uint64_t seed) {
  const auto p = probabilities(state);
  return sample_indices(p, shots, seed);
}

/// Diagnostic dump: "index real imag" per line, 17 significant digits.
inline void write_state(std::ostream& os, const StateVector& state) {
  std::ostringstream buf;
  buf.precision(17);
  for (std::uint64_t z = 0; z < state.dimension(); ++z) buf << z << ' ' << state[z].real() << ' ' << state[z].imag() << '\n';
  os << buf.str();
}

}  // namespace qtl
