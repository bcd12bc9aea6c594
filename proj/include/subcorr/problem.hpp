#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

#include "subcorr/errors.hpp"
#include "subcorr/rng.hpp"

namespace subcorr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Relative pivot threshold for the symmetric triangular factorization.
inline constexpr double kPivotTolerance = 1e-12;

/// Dense symmetric positive definite operator on an N-dimensional space.
///
/// Symmetry is enforced exactly at construction (entries compared as stored).
/// Positive definiteness is established by the Cholesky factorization, which
/// is computed on the first exact solve and cached; every pivot must exceed
/// kPivotTolerance times the largest diagonal entry.  Instances are immutable
/// and cheap to copy (copies share the cached factorization).
class SpdOperator {
 public:
  explicit SpdOperator(Matrix entries) {
    if (entries.rows() == 0 || entries.rows() != entries.cols()) {
      throw DimensionError("SpdOperator: matrix must be square and non-empty");
    }
    for (Index i = 0; i < entries.rows(); ++i) {
      for (Index j = i + 1; j < entries.cols(); ++j) {
        if (entries(i, j) != entries(j, i)) {
          throw NotPositiveDefiniteError(
              "SpdOperator: matrix is not symmetric at (" + std::to_string(i) +
              ", " + std::to_string(j) + ")");
        }
      }
    }
    auto state = std::make_shared<State>();
    state->entries = std::move(entries);
    state_ = std::move(state);
  }

  Index dim() const { return state_->entries.rows(); }

  const Matrix& matrix() const { return state_->entries; }

  Vector apply(const Vector& v) const {
    require_dim(v.size());
    return state_->entries * v;
  }

  /// Exact solve via the cached Cholesky factorization.
  Vector solve(const Vector& f) const {
    require_dim(f.size());
    return factorization().solve(f);
  }

  Matrix solve(const Matrix& rhs) const {
    if (rhs.rows() != dim()) {
      throw DimensionError("SpdOperator::solve: row count mismatch");
    }
    return factorization().solve(rhs);
  }

  /// Lower-triangular Cholesky factor L with A = L L^T.
  const Matrix& cholesky_factor() const {
    factorization();
    return state_->factor;
  }

 private:
  struct State {
    Matrix entries;
    mutable std::once_flag factored;
    mutable Eigen::LLT<Matrix> llt;
    mutable Matrix factor;
  };

  void require_dim(Index n) const {
    if (n != dim()) {
      throw DimensionError("SpdOperator: dimension mismatch (expected " +
                           std::to_string(dim()) + ", got " +
                           std::to_string(n) + ")");
    }
  }

  const Eigen::LLT<Matrix>& factorization() const {
    std::call_once(state_->factored, [this] {
      const Matrix& a = state_->entries;
      state_->llt.compute(a);
      if (state_->llt.info() != Eigen::Success) {
        throw NotPositiveDefiniteError(
            "SpdOperator: factorization failed, matrix is not positive "
            "definite");
      }
      state_->factor = state_->llt.matrixL();
      // Pivots of the LDL^T form are the squared diagonal entries of L.
      const double floor = kPivotTolerance * a.diagonal().maxCoeff();
      for (Index i = 0; i < a.rows(); ++i) {
        const double pivot = state_->factor(i, i) * state_->factor(i, i);
        if (!(pivot > floor)) {
          throw NotPositiveDefiniteError(
              "SpdOperator: pivot " + std::to_string(pivot) + " at index " +
              std::to_string(i) + " below threshold " + std::to_string(floor));
        }
      }
    });
    return state_->llt;
  }

  std::shared_ptr<const State> state_;
};

/// Energy inner product (Au, v).
inline double a_inner(const SpdOperator& a, const Vector& u, const Vector& v) {
  if (u.size() != a.dim() || v.size() != a.dim()) {
    throw DimensionError("a_inner: dimension mismatch");
  }
  return v.dot(a.matrix() * u);
}

/// Energy norm sqrt((Av, v)); diagnoses numerical loss of definiteness.
inline double a_norm(const SpdOperator& a, const Vector& v) {
  const double q = a_inner(a, v, v);
  if (q < -1e-10 * v.squaredNorm()) {
    throw NumericalError("a_norm: (Av, v) = " + std::to_string(q) +
                         " is negative beyond roundoff");
  }
  return std::sqrt(std::max(q, 0.0));
}

/// SPD system Au = f with the reference solution computed on demand.
class LinearSystem {
 public:
  LinearSystem(SpdOperator op, Vector rhs)
      : op_(std::move(op)),
        rhs_(std::move(rhs)),
        state_(std::make_shared<State>()) {
    if (rhs_.size() != op_.dim()) {
      throw DimensionError("LinearSystem: rhs length does not match operator");
    }
  }

  const SpdOperator& op() const { return op_; }
  const Vector& rhs() const { return rhs_; }

  /// Exact solution, solved once and cached.
  const Vector& solution() const {
    std::call_once(state_->solved, [this] { state_->u = op_.solve(rhs_); });
    return state_->u;
  }

 private:
  struct State {
    mutable std::once_flag solved;
    mutable Vector u;
  };

  SpdOperator op_;
  Vector rhs_;
  std::shared_ptr<const State> state_;
};

inline Vector solve_exact(const LinearSystem& sys) { return sys.solution(); }

/// n-by-n tridiagonal operator with 2 on the diagonal and -1 off it
/// (unit scaling, no mesh factor).
inline SpdOperator build_laplacian_1d(Index n) {
  if (n < 1) throw DimensionError("build_laplacian_1d: n must be >= 1");
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    a(i, i) = 2.0;
    if (i + 1 < n) {
      a(i, i + 1) = -1.0;
      a(i + 1, i) = -1.0;
    }
  }
  return SpdOperator(std::move(a));
}

/// m^2-by-m^2 five-point stencil operator on an m-by-m grid in lexicographic
/// ordering (4 on the diagonal, -1 between grid neighbors).
inline SpdOperator build_laplacian_2d(Index m) {
  if (m < 1) throw DimensionError("build_laplacian_2d: m must be >= 1");
  const Index n = m * m;
  Matrix a = Matrix::Zero(n, n);
  for (Index row = 0; row < m; ++row) {
    for (Index col = 0; col < m; ++col) {
      const Index k = row * m + col;
      a(k, k) = 4.0;
      if (col + 1 < m) {
        a(k, k + 1) = -1.0;
        a(k + 1, k) = -1.0;
      }
      if (row + 1 < m) {
        a(k, k + m) = -1.0;
        a(k + m, k) = -1.0;
      }
    }
  }
  return SpdOperator(std::move(a));
}

/// Seeded random SPD operator Q D Q^T with a pinned spectrum: D is the
/// geometric ladder from 1 to condition_target, so the condition number is
/// exactly condition_target up to roundoff.  Deterministic for fixed
/// (n, seed, condition_target).
inline SpdOperator build_random_spd(Index n, std::uint64_t seed,
                                    double condition_target) {
  if (n < 1) throw DimensionError("build_random_spd: n must be >= 1");
  if (!(condition_target > 1.0)) {
    throw ParameterError("build_random_spd: condition_target must exceed 1");
  }
  Vector d(n);
  for (Index i = 0; i < n; ++i) {
    d(i) = n == 1 ? 1.0
                  : std::exp(std::log(condition_target) *
                             static_cast<double>(i) /
                             static_cast<double>(n - 1));
  }
  RngStream rng(seed, 0);
  Matrix g(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  // Fix the sign convention so Q is unique given G.
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  const Matrix a = q * d.asDiagonal() * q.transpose();
  // The triple product is symmetric only up to roundoff; symmetrize exactly.
  Matrix sym = (a + a.transpose()) / 2.0;
  return SpdOperator(std::move(sym));
}

/// Unit vector with seeded Gaussian direction.
inline Vector random_unit_vector(Index n, std::uint64_t master_seed,
                                 std::uint64_t stream_index = kRhsStreamIndex) {
  RngStream rng(master_seed, stream_index);
  Vector v(n);
  do {
    for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  } while (v.norm() < 1e-8);
  return v / v.norm();
}

/// Default system for experiments: f = A x with x a seeded unit vector, so
/// the exact solution is known and nontrivial.
inline LinearSystem make_default_system(const SpdOperator& a,
                                        std::uint64_t master_seed) {
  const Vector x = random_unit_vector(a.dim(), master_seed);
  return LinearSystem(a, a.apply(x));
}

}  // namespace subcorr
