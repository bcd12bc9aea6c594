#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "subcorr/problem.hpp"

namespace subcorr {

/// Eigenvalues of the pencil S x = lambda A x with S symmetric and A SPD,
/// computed by congruence with the Cholesky factor of A: the pencil shares
/// its spectrum with the symmetric matrix L^-1 S L^-T.
inline Vector pencil_eigenvalues(const SpdOperator& a, const Matrix& s) {
  const Matrix& l = a.cholesky_factor();
  const auto lower = l.triangularView<Eigen::Lower>();
  const Matrix half = lower.solve(s);        // L^-1 S
  Matrix w = lower.solve(half.transpose());  // L^-1 S L^-T for symmetric S
  w = ((w + w.transpose()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(w, Eigen::EigenvaluesOnly);
  return eig.eigenvalues();
}

/// Operator norm sup ||Mv||_A / ||v||_A, i.e. the square root of the largest
/// eigenvalue of M^T A M x = lambda A x.
inline double a_operator_norm(const SpdOperator& a, const Matrix& m) {
  if (m.rows() != a.dim() || m.cols() != a.dim()) {
    throw DimensionError("a_operator_norm: dimension mismatch");
  }
  Matrix s = m.transpose() * a.matrix() * m;
  s = ((s + s.transpose()) / 2.0).eval();
  const Vector lambda = pencil_eigenvalues(a, s);
  return std::sqrt(std::max(lambda.maxCoeff(), 0.0));
}

/// Eigenvalues of an A-self-adjoint operator G, i.e. one with A G symmetric
/// (for instance G = B A with symmetric B).  They are real and coincide with
/// the spectrum of the pencil (A G, A).
inline Vector a_selfadjoint_eigenvalues(const SpdOperator& a, const Matrix& g) {
  Matrix s = a.matrix() * g;
  s = ((s + s.transpose()) / 2.0).eval();
  return pencil_eigenvalues(a, s);
}

}  // namespace subcorr
