#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "qtl/common.hpp"

namespace qtl {

using cplx = std::complex<double>;

/// Dense square complex matrix, row-major.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(std::size_t dim) : dim_(dim), data_(dim * dim) {}

  static Matrix identity(std::size_t dim) {
    Matrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(std::span<const double> d) {
    Matrix m(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  /// |v><v| for a (not necessarily normalized) vector.
  static Matrix outer(std::span<const cplx> v) {
    Matrix m(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = v[i] * std::conj(v[j]);
    return m;
  }

  std::size_t dim() const { return dim_; }
  cplx& operator()(std::size_t i, std::size_t j) { return data_[i * dim_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }

  Matrix adjoint() const {
    Matrix m(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j) m(i, j) = std::conj((*this)(j, i));
    return m;
  }

  cplx trace() const {
    cplx t = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) t += (*this)(i, i);
    return t;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (const auto& x : data_) s += std::norm(x);
    return std::sqrt(s);
  }

  Matrix& operator+=(const Matrix& o) {
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Matrix& operator*=(cplx s) {
    for (auto& x : data_) x *= s;
    return *this;
  }
  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, cplx s) { return a *= s; }
  friend Matrix operator*(cplx s, Matrix a) { return a *= s; }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    Matrix c(a.dim_);
    for (std::size_t i = 0; i < a.dim_; ++i)
      for (std::size_t k = 0; k < a.dim_; ++k) {
        const cplx aik = a(i, k);
        if (aik == cplx{}) continue;
        for (std::size_t j = 0; j < a.dim_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }

  /// Kronecker product a (x) b.
  friend Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix c(a.dim_ * b.dim_);
    for (std::size_t i = 0; i < a.dim_; ++i)
      for (std::size_t j = 0; j < a.dim_; ++j)
        for (std::size_t k = 0; k < b.dim_; ++k)
          for (std::size_t l = 0; l < b.dim_; ++l) c(i * b.dim_ + k, j * b.dim_ + l) = a(i, j) * b(k, l);
    return c;
  }

  double hermiticity_defect() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = i; j < dim_; ++j) worst = std::max(worst, std::abs((*this)(i, j) - std::conj((*this)(j, i))));
    return worst;
  }

  bool commutes_with(const Matrix& o, double tol) const {
    return ((*this) * o - o * (*this)).frobenius_norm() <= tol;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<cplx> data_;
};

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending; column k of
/// `vectors` is the eigenvector for values[k].
struct EigenSystem {
  std::vector<double> values;
  Matrix vectors;

  std::span<const cplx> column(std::size_t k, std::vector<cplx>& buffer) const {
    buffer.resize(vectors.dim());
    for (std::size_t i = 0; i < vectors.dim(); ++i) buffer[i] = vectors(i, k);
    return buffer;
  }

  /// <v_k| A |v_k>, real part.
  double expectation(std::size_t k, const Matrix& a) const {
    const std::size_t d = vectors.dim();
    cplx acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      cplx row = 0.0;
      for (std::size_t j = 0; j < d; ++j) row += a(i, j) * vectors(j, k);
      acc += std::conj(vectors(i, k)) * row;
    }
    return acc.real();
  }

  /// |<v_k | w_l>|^2 against another eigensystem.
  double overlap(std::size_t k, const EigenSystem& other, std::size_t l) const {
    cplx acc = 0.0;
    for (std::size_t i = 0; i < vectors.dim(); ++i) acc += std::conj(vectors(i, k)) * other.vectors(i, l);
    return std::norm(acc);
  }
};

inline constexpr std::size_t kMaxDenseDim = 256;
inline constexpr int kJacobiMaxSweeps = 100;
inline constexpr double kJacobiTolerance = 1e-12;

/// Cyclic complex Jacobi. Each rotation is a phase that makes the pivot
/// real followed by the classical real rotation. Stops when the
/// off-diagonal Frobenius norm falls below 1e-12 * ||A||_F.
inline EigenSystem eigh(const Matrix& input) {
  const std::size_t d = input.dim();
  if (d == 0) throw InputError("empty matrix");
  if (d > kMaxDenseDim) throw ResourceError("dense operators are limited to dimension 256");
  Matrix a = input;
  // Symmetrize away rounding-level anti-Hermitian parts.
  for (std::size_t i = 0; i < d; ++i) {
    a(i, i) = a(i, i).real();
    for (std::size_t j = i + 1; j < d; ++j) {
      const cplx h = 0.5 * (a(i, j) + std::conj(a(j, i)));
      a(i, j) = h;
      a(j, i) = std::conj(h);
    }
  }
  Matrix v = Matrix::identity(d);
  const double scale = a.frobenius_norm();

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) s += 2.0 * std::norm(a(i, j));
    return std::sqrt(s);
  };

  int sweep = 0;
  while (off_norm() > kJacobiTolerance * scale) {
    if (++sweep > kJacobiMaxSweeps) throw NumericError("Jacobi eigensolver did not converge in 100 sweeps");
    for (std::size_t p = 0; p + 1 < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double r = std::abs(a(p, q));
        if (r == 0.0) continue;
        const cplx phase = a(p, q) / r;  // e^{i phi}
        const double app = a(p, p).real(), aqq = a(q, q).real();
        const double theta = (aqq - app) / (2.0 * r);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // V restricted to (p, q): [[c, s], [-s e^{-i phi}, c e^{-i phi}]].
        const cplx vpp = c, vpq = s, vqp = -s * std::conj(phase), vqq = c * std::conj(phase);
        for (std::size_t k = 0; k < d; ++k) {  // A <- A V
          const cplx akp = a(k, p), akq = a(k, q);
          a(k, p) = akp * vpp + akq * vqp;
          a(k, q) = akp * vpq + akq * vqq;
        }
        for (std::size_t k = 0; k < d; ++k) {  // A <- V^H A
          const cplx apk = a(p, k), aqk = a(q, k);
          a(p, k) = std::conj(vpp) * apk + std::conj(vqp) * aqk;
          a(q, k) = std::conj(vpq) * apk + std::conj(vqq) * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (std::size_t k = 0; k < d; ++k) {  // W <- W V
          const cplx wkp = v(k, p), wkq = v(k, q);
          v(k, p) = wkp * vpp + wkq * vqp;
          v(k, q) = wkp * vpq + wkq * vqq;
        }
      }
    }
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x).real() < a(y, y).real(); });
  EigenSystem es{std::vector<double>(d), Matrix(d)};
  for (std::size_t k = 0; k < d; ++k) {
    es.values[k] = a(order[k], order[k]).real();
    for (std::size_t i = 0; i < d; ++i) es.vectors(i, k) = v(i, order[k]);
  }
  return es;
}

/// V f(Lambda) V^H.
inline Matrix apply_function(const EigenSystem& es, const std::function<double(double)>& f) {
  const std::size_t d = es.vectors.dim();
  std::vector<double> fv(d);
  for (std::size_t k = 0; k < d; ++k) fv[k] = f(es.values[k]);
  Matrix m(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      cplx acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += es.vectors(i, k) * fv[k] * std::conj(es.vectors(j, k));
      m(i, j) = acc;
    }
  return m;
}

inline Matrix hermitian_function(const Matrix& a, const std::function<double(double)>& f) {
  return apply_function(eigh(a), f);
}

/// Numerical-zero cutoff for eigenvalues of a positive semidefinite matrix.
inline double rank_cutoff(const EigenSystem& es) {
  const double top = std::max(0.0, es.values.back());
  return kRankThreshold * top;
}

}  // namespace qtl
