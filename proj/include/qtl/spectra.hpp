#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qtl/common.hpp"
#include "qtl/rng.hpp"

namespace qtl {

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

/// Undirected simple graph on nodes 0..n-1. Edges are stored with i < j,
/// sorted, without duplicates.
class Graph {
 public:
  using Edge = std::pair<unsigned, unsigned>;

  explicit Graph(unsigned node_count, std::vector<Edge> edges = {}) : n_(node_count) {
    if (node_count == 0) throw InputError("graph needs at least one node");
    std::set<Edge> seen;
    for (auto [a, b] : edges) {
      if (a == b) throw InputError("self-loop on node " + std::to_string(a));
      if (a >= n_ || b >= n_) throw InputError("edge endpoint out of range");
      if (!seen.insert(a < b ? Edge{a, b} : Edge{b, a}).second)
        throw InputError("duplicate edge (" + std::to_string(a) + ", " + std::to_string(b) + ")");
    }
    edges_.assign(seen.begin(), seen.end());
  }

  unsigned node_count() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  unsigned n_;
  std::vector<Edge> edges_;
};

inline unsigned cut_value(const Graph& g, std::uint64_t z) {
  unsigned cut = 0;
  for (auto [i, j] : g.edges()) cut += ((z >> i) ^ (z >> j)) & 1u;
  return cut;
}

inline unsigned cut_value(const Graph& g, const std::string& assignment) {
  if (assignment.size() != g.node_count())
    throw InputError("assignment length " + std::to_string(assignment.size()) +
                     " does not match node count " + std::to_string(g.node_count()));
  return cut_value(g, parse_bitstring(assignment));
}

/// G(n, p) with candidate edges visited in (i, j), i < j, lexicographic order.
inline Graph erdos_renyi(unsigned n, double p_edge, std::uint64_t seed) {
  if (!(p_edge >= 0.0 && p_edge <= 1.0)) throw InputError("p_edge must lie in [0, 1]");
  Xoshiro256 rng(seed);
  std::vector<Graph::Edge> edges;
  for (unsigned i = 0; i < n; ++i)
    for (unsigned j = i + 1; j < n; ++j)
      if (rng.uniform() < p_edge) edges.emplace_back(i, j);
  return Graph(n, std::move(edges));
}

/// Edge-list text: a header line "n <node_count>" followed by one "i j" per line.
inline void write_graph(std::ostream& os, const Graph& g) {
  os << "n " << g.node_count() << '\n';
  for (auto [i, j] : g.edges()) os << i << ' ' << j << '\n';
}

inline Graph read_graph(std::istream& is) {
  std::string line;
  std::optional<unsigned> n;
  std::vector<Graph::Edge> edges;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (!n) {
      std::string tag;
      long long count = -1;
      if (!(ls >> tag >> count) || tag != "n" || count <= 0)
        throw InputError("graph file must start with 'n <node_count>'");
      n = static_cast<unsigned>(count);
      continue;
    }
    long long a = -1, b = -1;
    if (!(ls >> a >> b) || a < 0 || b < 0) throw InputError("malformed edge line: " + line);
    edges.emplace_back(static_cast<unsigned>(a), static_cast<unsigned>(b));
  }
  if (!n) throw InputError("empty graph file");
  return Graph(*n, std::move(edges));
}

// ---------------------------------------------------------------------------
// DiagonalObservable
// ---------------------------------------------------------------------------

/// O = sum_z E(z)|z><z| on n qubits. Up to kTableLimit qubits the energies
/// are tabulated; above that they are evaluated on demand.
class DiagonalObservable {
 public:
  using EnergyFn = std::function<double(std::uint64_t)>;

  static DiagonalObservable from_table(unsigned n, std::vector<double> table) {
    check_qubits(n);
    if (table.size() != (std::uint64_t{1} << n)) throw InputError("energy table size must be 2^n");
    DiagonalObservable o;
    o.n_ = n;
    auto [lo, hi] = std::minmax_element(table.begin(), table.end());
    o.min_ = *lo;
    o.max_ = *hi;
    o.table_ = std::move(table);
    return o;
  }

  /// Tabulates when n <= kTableLimit; otherwise keeps fn and scans once for
  /// the extremes.
  static DiagonalObservable from_function(unsigned n, EnergyFn fn) {
    check_qubits(n);
    const std::uint64_t dim = std::uint64_t{1} << n;
    if (n <= kTableLimit) {
      std::vector<double> table(dim);
      for (std::uint64_t z = 0; z < dim; ++z) table[z] = fn(z);
      return from_table(n, std::move(table));
    }
    DiagonalObservable o;
    o.n_ = n;
    o.min_ = std::numeric_limits<double>::infinity();
    o.max_ = -std::numeric_limits<double>::infinity();
    for (std::uint64_t z = 0; z < dim; ++z) {
      const double e = fn(z);
      o.min_ = std::min(o.min_, e);
      o.max_ = std::max(o.max_, e);
    }
    o.fn_ = std::move(fn);
    return o;
  }

  unsigned qubit_count() const { return n_; }
  std::uint64_t dimension() const { return std::uint64_t{1} << n_; }
  double min_energy() const { return min_; }
  double max_energy() const { return max_; }
  double spectral_width() const { return max_ - min_; }
  bool tabulated() const { return !table_.empty(); }

  double energy(std::uint64_t z) const { return table_.empty() ? fn_(z) : table_[z]; }
  double operator()(std::uint64_t z) const { return energy(z); }

  /// Full table; materialized on the fly for function-backed observables.
  std::vector<double> energies() const {
    if (!table_.empty()) return table_;
    std::vector<double> out(dimension());
    for (std::uint64_t z = 0; z < out.size(); ++z) out[z] = fn_(z);
    return out;
  }

 private:
  DiagonalObservable() = default;

  static void check_qubits(unsigned n) {
    if (n == 0) throw InputError("observable needs at least one qubit");
    if (n > kMaxQubits) throw ResourceError("observable exceeds the qubit cap");
  }

  unsigned n_ = 0;
  double min_ = 0.0;
  double max_ = 0.0;
  std::vector<double> table_;
  EnergyFn fn_;
};

/// H_C = sum_(i,j) (Z_i Z_j - I)/2, which evaluates to E(z) = -Cut(z).
inline DiagonalObservable maxcut_hamiltonian(const Graph& g) {
  return DiagonalObservable::from_function(
      g.node_count(), [g](std::uint64_t z) { return -static_cast<double>(cut_value(g, z)); });
}

/// O_G = I - |0...0><0...0|.
inline DiagonalObservable global_projector_observable(unsigned n) {
  return DiagonalObservable::from_function(n, [](std::uint64_t z) { return z == 0 ? 0.0 : 1.0; });
}

struct MaxCutResult {
  unsigned max_cut = 0;
  std::string witness;
};

inline constexpr unsigned kBruteForceLimit = 24;

/// Exhaustive search. Ties go to the lexicographically smallest witness
/// string (character j is qubit j).
inline MaxCutResult brute_force_maxcut(const Graph& g) {
  const unsigned n = g.node_count();
  if (n > kBruteForceLimit) throw ResourceError("brute-force MaxCut is limited to 24 nodes");
  auto reversed = [n](std::uint64_t z) {
    std::uint64_t r = 0;
    for (unsigned j = 0; j < n; ++j) r |= ((z >> j) & 1u) << (n - 1 - j);
    return r;
  };
  unsigned best = 0;
  std::uint64_t best_z = 0, best_key = 0;
  const std::uint64_t dim = std::uint64_t{1} << n;
  for (std::uint64_t z = 0; z < dim; ++z) {
    const unsigned c = cut_value(g, z);
    if (c < best) continue;
    const std::uint64_t key = reversed(z);
    if (c > best || key < best_key) {
      best = c;
      best_z = z;
      best_key = key;
    }
  }
  return {best, bitstring(best_z, n)};
}

// ---------------------------------------------------------------------------
// OutcomeDistribution
// ---------------------------------------------------------------------------

struct Outcome {
  double value = 0.0;
  double probability = 0.0;
  friend bool operator==(const Outcome&, const Outcome&) = default;
};

/// Finite distribution over real outcomes. Always held in canonical form:
/// values strictly ascending, equal values merged, zero-mass atoms dropped.
class OutcomeDistribution {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit OutcomeDistribution(std::vector<Outcome> outcomes) {
    if (outcomes.empty()) throw InputError("distribution needs at least one outcome");
    double total = 0.0;
    for (const auto& o : outcomes) {
      if (!std::isfinite(o.value)) throw InputError("outcome values must be finite");
      if (!(o.probability >= 0.0 && o.probability <= 1.0 + kSumTolerance))
        throw InputError("probabilities must lie in [0, 1]");
      total += o.probability;
    }
    if (std::abs(total - 1.0) > kSumTolerance)
      throw InputError("probabilities sum to " + std::to_string(total) + ", not 1");
    canonicalize(std::move(outcomes));
  }

  /// Builds from parallel arrays, dividing by the total mass. For Born
  /// probabilities that carry rounding error.
  static OutcomeDistribution normalized(std::span<const double> values, std::span<const double> weights) {
    if (values.size() != weights.size()) throw InputError("values and weights differ in length");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw InputError("weights must be non-negative");
      total += w;
    }
    if (!(total > 0.0)) throw InputError("weights have zero total mass");
    std::vector<Outcome> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = {values[i], weights[i] / total};
    OutcomeDistribution d;
    d.canonicalize(std::move(out));
    return d;
  }

  static OutcomeDistribution point_mass(double value) { return OutcomeDistribution({{value, 1.0}}); }

  const std::vector<Outcome>& outcomes() const { return outcomes_; }
  std::size_t size() const { return outcomes_.size(); }
  double min_value() const { return outcomes_.front().value; }
  double max_value() const { return outcomes_.back().value; }

  double mean() const {
    double m = 0.0;
    for (const auto& o : outcomes_) m += o.probability * o.value;
    return m;
  }

  double variance() const {
    const double mu = mean();
    double v = 0.0;
    for (const auto& o : outcomes_) v += o.probability * (o.value - mu) * (o.value - mu);
    return v;
  }

  OutcomeDistribution shifted(double c) const {
    auto out = outcomes_;
    for (auto& o : out) o.value += c;
    OutcomeDistribution d;
    d.canonicalize(std::move(out));
    return d;
  }

  /// Law of X + Y for independent X ~ *this, Y ~ other.
  OutcomeDistribution convolve(const OutcomeDistribution& other) const {
    std::vector<Outcome> out;
    out.reserve(size() * other.size());
    for (const auto& a : outcomes_)
      for (const auto& b : other.outcomes_) out.push_back({a.value + b.value, a.probability * b.probability});
    OutcomeDistribution d;
    d.canonicalize(std::move(out));
    return d;
  }

  /// One "value probability" pair per line, 17 significant digits.
  std::string to_text() const {
    std::ostringstream os;
    os.precision(17);
    for (const auto& o : outcomes_) os << o.value << ' ' << o.probability << '\n';
    return os.str();
  }

  static OutcomeDistribution from_text(const std::string& text) {
    std::istringstream is(text);
    std::vector<Outcome> out;
    double v = 0.0, p = 0.0;
    while (is >> v >> p) out.push_back({v, p});
    if (!is.eof()) throw InputError("malformed distribution text");
    return OutcomeDistribution(std::move(out));
  }

  friend bool operator==(const OutcomeDistribution&, const OutcomeDistribution&) = default;

 private:
  OutcomeDistribution() = default;

  void canonicalize(std::vector<Outcome> raw) {
    std::stable_sort(raw.begin(), raw.end(), [](const Outcome& a, const Outcome& b) { return a.value < b.value; });
    outcomes_.clear();
    for (const auto& o : raw) {
      if (o.probability <= 0.0) continue;
      if (!outcomes_.empty() && outcomes_.back().value == o.value)
        outcomes_.back().probability += o.probability;
      else
        outcomes_.push_back(o);
    }
    if (outcomes_.empty()) throw InputError("distribution has no positive-mass outcome");
  }

  std::vector<Outcome> outcomes_;
};

/// Born distribution of a diagonal observable for the given per-basis-state
/// probabilities.
inline OutcomeDistribution born_distribution(const DiagonalObservable& obs, std::span<const double> probs) {
  if (probs.size() != obs.dimension()) throw InputError("probability vector does not match observable");
  return OutcomeDistribution::normalized(obs.energies(), probs);
}

// ---------------------------------------------------------------------------
// Gibbs distributions
// ---------------------------------------------------------------------------

/// p_i proportional to exp(-beta E_i), shifted by the ground energy so the
/// largest weight is exactly 1.
inline OutcomeDistribution gibbs_distribution(std::span<const double> spectrum, double beta) {
  if (!std::isfinite(beta)) throw InputError("beta must be finite");
  if (spectrum.empty()) throw InputError("empty spectrum");
  const double ref = beta >= 0 ? *std::min_element(spectrum.begin(), spectrum.end())
                               : *std::max_element(spectrum.begin(), spectrum.end());
  std::vector<double> w(spectrum.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(-beta * (spectrum[i] - ref));
  return OutcomeDistribution::normalized(spectrum, w);
}

inline OutcomeDistribution gibbs_distribution(const DiagonalObservable& obs, double beta) {
  const auto e = obs.energies();
  return gibbs_distribution(std::span<const double>(e), beta);
}

/// log Z_beta = log sum_i exp(-beta E_i), stabilized.
inline double log_partition(std::span<const double> spectrum, double beta) {
  const double ref = beta >= 0 ? *std::min_element(spectrum.begin(), spectrum.end())
                               : *std::max_element(spectrum.begin(), spectrum.end());
  double s = 0.0;
  for (double e : spectrum) s += std::exp(-beta * (e - ref));
  return -beta * ref + std::log(s);
}

}  // namespace qtl
