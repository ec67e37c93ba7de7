#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace qtl {

// Error taxonomy shared by all modules.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ResourceError : std::length_error {
  using std::length_error::length_error;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Tilts with |gamma| at or below this use the expectation branch.
inline constexpr double kGammaZeroThreshold = 1e-12;

// Eigenvalues below this fraction of the largest one are treated as zero.
inline constexpr double kRankThreshold = 1e-10;

inline constexpr unsigned kMaxQubits = 24;
inline constexpr unsigned kTableLimit = 20;

/// Infinite divergence is reported as +inf rather than thrown.
inline bool is_infinite_divergence(double d) { return std::isinf(d) && d > 0; }

inline bool is_zero_tilt(double gamma) { return std::abs(gamma) <= kGammaZeroThreshold; }

inline std::string bitstring(std::uint64_t z, unsigned n) {
  // Character j is qubit j, so "010" means qubit 1 is set.
  std::string s(n, '0');
  for (unsigned j = 0; j < n; ++j)
    if ((z >> j) & 1u) s[j] = '1';
  return s;
}

inline std::uint64_t parse_bitstring(const std::string& s) {
  if (s.size() > 64) throw InputError("bitstring longer than 64 bits");
  std::uint64_t z = 0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s[j] == '1')
      z |= std::uint64_t{1} << j;
    else if (s[j] != '0')
      throw InputError("bitstring contains a character other than 0/1");
  }
  return z;
}

}  // namespace qtl
