#pragma once

// Conversions to Eigen, which serves as an independent dense oracle.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "qtl/linalg.hpp"

namespace oracle {

using CMat = Eigen::MatrixXcd;

inline CMat to_eigen(const qtl::Matrix& m) {
  CMat out(m.dim(), m.dim());
  for (std::size_t i = 0; i < m.dim(); ++i)
    for (std::size_t j = 0; j < m.dim(); ++j) out(i, j) = m(i, j);
  return out;
}

// (1/g) log tr(e^{gO} rho) through the matrix exponential.
inline double qtl(const qtl::Matrix& o, const qtl::Matrix& rho, double g) {
  const CMat e = (g * to_eigen(o)).exp();
  return std::log((e * to_eigen(rho)).trace().real()) / g;
}

// (1/g) log tr exp(log rho + gO), full-rank rho.
inline double comparator(const qtl::Matrix& o, const qtl::Matrix& rho, double g) {
  const CMat l = to_eigen(rho).log() + g * to_eigen(o);
  return std::log(l.exp().trace().real()) / g;
}

}  // namespace oracle
