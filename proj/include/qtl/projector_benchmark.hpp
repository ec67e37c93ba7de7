#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "qtl/common.hpp"
#include "qtl/rng.hpp"
#include "qtl/tilted_loss.hpp"

namespace qtl {

/// 1 - prod_j cos^2(theta_j / 2).
inline double c_global(std::span<const double> theta) {
  double overlap = 1.0;
  for (double t : theta) {
    const double c = std::cos(0.5 * t);
    overlap *= c * c;
  }
  return 1.0 - overlap;
}

inline double qtl_projector(std::span<const double> theta, Tilt tilt) { return phi_gamma(c_global(theta), tilt); }

/// Analytic partial derivative of phi_gamma(C_G) in theta_k:
///   -alpha f'(theta_k) B / (1 + beta (1 - f(theta_k) B))
/// with f = cos^2(theta/2), B the product over j != k, alpha = (e^g - 1)/g,
/// beta = e^g - 1.
inline double grad_qtl_projector(std::span<const double> theta, std::size_t k, Tilt tilt) {
  if (k >= theta.size()) throw InputError("coordinate out of range");
  double b = 1.0;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    if (j == k) continue;
    const double c = std::cos(0.5 * theta[j]);
    b *= c * c;
  }
  const double ck = std::cos(0.5 * theta[k]);
  const double f = ck * ck;
  const double fprime = -0.5 * std::sin(theta[k]);
  if (tilt.is_zero()) return -fprime * b;
  const double g = tilt.gamma;
  const double beta = std::expm1(g);
  const double alpha = beta / g;
  return -alpha * fprime * b / (1.0 + beta * (1.0 - f * b));
}

/// 2 (n - 1) log(3/8).
inline double schedule_gamma(unsigned n) {
  if (n < 1) throw InputError("n must be at least 1");
  return 2.0 * (static_cast<double>(n) - 1.0) * std::log(3.0 / 8.0);
}

/// (1/8)(3/8)^{n-1}.
inline double analytic_variance_gamma0(unsigned n) {
  if (n < 1) throw InputError("n must be at least 1");
  return 0.125 * std::pow(0.375, static_cast<double>(n) - 1.0);
}

/// ((e^g - 1)/(2g))^2 (3/8)^{n-1} 2 / (sqrt(e^g) (1 + sqrt(e^g))^2), g < 0.
inline double variance_lower_bound(unsigned n, double gamma) {
  if (n < 1) throw InputError("n must be at least 1");
  if (!(gamma < 0.0)) throw DomainError("the variance lower bound needs gamma < 0");
  const double a = std::expm1(gamma) / (2.0 * gamma);
  const double r = std::exp(0.5 * gamma);
  return a * a * std::pow(0.375, static_cast<double>(n) - 1.0) * 2.0 / (r * (1.0 + r) * (1.0 + r));
}

/// (1/8)(5/8)^2 / log^2(3/8): the n-independent floor of Var (n - 1)^2 on the
/// scheduled tilt.
inline double scheduled_variance_constant() {
  const double l = std::log(3.0 / 8.0);
  return 0.125 * 0.390625 / (l * l);
}

/// Streaming central moments up to fourth order (Welford/Pebay), with an
/// exact pairwise merge.
class MomentAccumulator {
 public:
  void push(double x) {
    const double n1 = static_cast<double>(n_);
    ++n_;
    const double n = static_cast<double>(n_);
    const double delta = x - mean_;
    const double dn = delta / n;
    const double dn2 = dn * dn;
    const double term1 = delta * dn * n1;
    mean_ += dn;
    m4_ += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * m2_ - 4.0 * dn * m3_;
    m3_ += term1 * dn * (n - 2.0) - 3.0 * dn * m2_;
    m2_ += term1;
  }

  void merge(const MomentAccumulator& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
    const double n = na + nb;
    const double d = o.mean_ - mean_;
    const double d2 = d * d, d3 = d2 * d, d4 = d2 * d2;
    const double m2 = m2_ + o.m2_ + d2 * na * nb / n;
    const double m3 = m3_ + o.m3_ + d3 * na * nb * (na - nb) / (n * n) + 3.0 * d * (na * o.m2_ - nb * m2_) / n;
    const double m4 = m4_ + o.m4_ + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                      6.0 * d2 * (na * na * o.m2_ + nb * nb * m2_) / (n * n) + 4.0 * d * (na * o.m3_ - nb * m3_) / n;
    mean_ = (na * mean_ + nb * o.mean_) / n;
    m2_ = m2;
    m3_ = m3;
    m4_ = m4;
    n_ += o.n_;
  }

  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  /// Unbiased sample variance.
  double variance() const { return m2_ / (static_cast<double>(n_) - 1.0); }
  double m2() const { return m2_; }
  double m4() const { return m4_; }

  /// Jackknife standard error of the sample variance, in closed form from
  /// the central sums M2 and M4.
  double variance_std_error() const {
    const double n = static_cast<double>(n_);
    if (n_ < 3) return kInf;
    const double b = n / ((n - 1.0) * (n - 2.0));
    const double spread = std::max(0.0, m4_ - m2_ * m2_ / n);
    return std::sqrt((n - 1.0) / n * b * b * spread);
  }

  double mean_std_error() const { return std::sqrt(variance() / static_cast<double>(n_)); }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0, m2_ = 0.0, m3_ = 0.0, m4_ = 0.0;
};

struct VarianceEstimate {
  double variance = 0.0;
  double std_error = 0.0;
  double mean = 0.0;
  double mean_std_error = 0.0;
  std::uint64_t trials = 0;
};

inline constexpr std::uint64_t kMcChunk = 1 << 16;

/// Sample variance of d L / d theta_0 over theta_j ~ Unif(-pi, pi).
/// Trials are split into fixed chunks with their own derived streams and
/// merged in chunk order, so the result does not depend on `workers`.
inline VarianceEstimate gradient_variance_mc(unsigned n, double gamma, std::uint64_t trials, std::uint64_t seed,
                                             unsigned workers = 1) {
  if (n < 1) throw InputError("n must be at least 1");
  if (trials < 100) throw InputError("need at least 100 trials");
  const std::uint64_t chunks = (trials + kMcChunk - 1) / kMcChunk;
  std::vector<MomentAccumulator> acc(chunks);
  auto run_chunk = [&](std::uint64_t c) {
    Xoshiro256 rng(derive_seed(seed, {c}));
    std::vector<double> theta(n);
    const std::uint64_t lo = c * kMcChunk, hi = std::min(trials, lo + kMcChunk);
    for (std::uint64_t i = lo; i < hi; ++i) {
      for (auto& t : theta) t = rng.uniform(-kPi, kPi);
      acc[c].push(grad_qtl_projector(theta, 0, Tilt(gamma)));
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(chunks)));
  if (workers == 1) {
    for (std::uint64_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::uint64_t c = w; c < chunks; c += workers) run_chunk(c);
      });
    for (auto& th : pool) th.join();
  }
  MomentAccumulator total;
  for (const auto& a : acc) total.merge(a);
  return {total.variance(), total.variance_std_error(), total.mean(), total.mean_std_error(), total.count()};
}

}  // namespace qtl
