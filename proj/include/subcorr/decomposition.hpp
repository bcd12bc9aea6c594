#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "subcorr/problem.hpp"
#include "subcorr/spectral.hpp"

namespace subcorr {

/// Relative tolerance for rank decisions on inclusion bases.
inline constexpr double kRankTolerance = 1e-10;

/// One subspace V_i of the decomposition, stored by an explicit inclusion
/// basis: the columns of `inclusion` span V_i inside the ambient space.
class Subspace {
 public:
  explicit Subspace(Matrix inclusion) : inclusion_(std::move(inclusion)) {
    const Index n = inclusion_.rows();
    const Index ni = inclusion_.cols();
    if (ni < 1 || ni > n) {
      throw DecompositionError(
          "Subspace: basis must have between 1 and N columns");
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(inclusion_);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() != ni) {
      throw DecompositionError(
          "Subspace: inclusion columns are not linearly independent");
    }
  }

  const Matrix& inclusion() const { return inclusion_; }
  Index ambient_dim() const { return inclusion_.rows(); }
  Index dim() const { return inclusion_.cols(); }

 private:
  Matrix inclusion_;
};

enum class SolverKind { kExact, kScaledRichardson };

/// Requested subspace solver: exact (R_i = A_i^-1) or scaled Richardson
/// (R_i = omega / lambda_max(A_i) * Id on V_i, omega in (0,2)).
struct SolverSpec {
  SolverKind kind = SolverKind::kExact;
  double omega = 1.0;

  static SolverSpec exact() { return {SolverKind::kExact, 0.0}; }
  static SolverSpec richardson(double omega) {
    if (!(omega > 0.0 && omega < 2.0)) {
      throw ParameterError("SolverSpec: omega must lie in (0, 2)");
    }
    return {SolverKind::kScaledRichardson, omega};
  }
};

/// Concrete solver for one subspace: caches A_i and either its factorization
/// (exact) or the Richardson scaling constant.
class SubspaceSolver {
 public:
  SubspaceSolver(SolverSpec spec, Matrix a_i)
      : kind_(spec.kind), a_i_(std::move(a_i)) {
    Matrix sym = (a_i_ + a_i_.transpose()) / 2.0;
    a_i_ = std::move(sym);
    if (kind_ == SolverKind::kExact) {
      llt_.compute(a_i_);
      if (llt_.info() != Eigen::Success) {
        throw NotPositiveDefiniteError(
            "SubspaceSolver: restricted operator is not positive definite");
      }
      r_ = llt_.solve(Matrix::Identity(a_i_.rows(), a_i_.cols()));
      r_ = ((r_ + r_.transpose()) / 2.0).eval();
    } else {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(a_i_, Eigen::EigenvaluesOnly);
      scale_ = spec.omega / eig.eigenvalues().maxCoeff();
      r_ = scale_ * Matrix::Identity(a_i_.rows(), a_i_.cols());
    }
  }

  SolverKind kind() const { return kind_; }
  bool is_exact() const { return kind_ == SolverKind::kExact; }
  const Matrix& restricted_operator() const { return a_i_; }

  /// Dense matrix of R_i (both provided kinds are symmetric).
  const Matrix& matrix() const { return r_; }

  Vector apply(const Vector& r) const {
    return kind_ == SolverKind::kExact ? llt_.solve(r).eval()
                                       : (scale_ * r).eval();
  }

  /// Symmetrized solver R_i^t + R_i - R_i^t A_i R_i; equals A_i^-1 for the
  /// exact solver.
  Matrix symmetrized() const {
    Matrix rbar = r_.transpose() + r_ - r_.transpose() * a_i_ * r_;
    return ((rbar + rbar.transpose()) / 2.0).eval();
  }

 private:
  SolverKind kind_;
  Matrix a_i_;
  Eigen::LLT<Matrix> llt_;
  double scale_ = 0.0;
  Matrix r_;
};

/// Everything attached to one subspace: the restriction Q_i = I_i^T, the
/// restricted operator A_i = Q_i A I_i, the A-orthogonal projection
/// coordinates P_i (A_i P_i = Q_i A), the iteration operator T_i =
/// I_i R_i Q_i A, its A-adjoint, and the symmetrized form.
struct SubspaceOperators {
  Matrix q;       // n_i x N
  Matrix a_i;     // n_i x n_i
  Matrix p;       // n_i x N
  Matrix t;       // N x N
  Matrix t_star;  // N x N
  Matrix t_bar;   // N x N
};

/// Space decomposition V = sum V_i with one solver per subspace.
///
/// Immutable after construction; subspace operators are assembled on demand.
class Decomposition {
 public:
  Decomposition(SpdOperator ambient, std::vector<Subspace> subspaces,
                std::vector<SubspaceSolver> solvers)
      : ambient_(std::move(ambient)),
        subspaces_(std::move(subspaces)),
        solvers_(std::move(solvers)) {
    if (subspaces_.empty()) {
      throw DecompositionError("Decomposition: needs at least one subspace");
    }
    if (solvers_.size() != subspaces_.size()) {
      throw DecompositionError(
          "Decomposition: solver list length differs from subspace count");
    }
    const Index n = ambient_.dim();
    Index total = 0;
    for (const Subspace& s : subspaces_) {
      if (s.ambient_dim() != n) {
        throw DecompositionError(
            "Decomposition: subspace ambient dimension mismatch");
      }
      total += s.dim();
    }
    Matrix stacked(n, total);
    Index col = 0;
    for (const Subspace& s : subspaces_) {
      stacked.middleCols(col, s.dim()) = s.inclusion();
      col += s.dim();
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(stacked);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() != n) {
      throw DecompositionError(
          "Decomposition: subspaces do not span the whole space (rank " +
          std::to_string(qr.rank()) + " of " + std::to_string(n) + ")");
    }
  }

  const SpdOperator& ambient() const { return ambient_; }
  int count() const { return static_cast<int>(subspaces_.size()); }
  const Subspace& subspace(int i) const {
    return subspaces_[static_cast<std::size_t>(check_index(i))];
  }
  const SubspaceSolver& solver(int i) const {
    return solvers_[static_cast<std::size_t>(check_index(i))];
  }

  bool all_exact() const {
    for (const auto& s : solvers_) {
      if (!s.is_exact()) return false;
    }
    return true;
  }

  /// Total dimension sum n_i of the stacked inclusion bases.
  Index stacked_dim() const {
    Index total = 0;
    for (const Subspace& s : subspaces_) total += s.dim();
    return total;
  }

 private:
  int check_index(int i) const {
    if (i < 0 || i >= count()) {
      throw DecompositionError("Decomposition: subspace index " +
                               std::to_string(i) + " out of range");
    }
    return i;
  }

  SpdOperator ambient_;
  std::vector<Subspace> subspaces_;
  std::vector<SubspaceSolver> solvers_;
};

namespace detail {

inline std::vector<SubspaceSolver> make_solvers(
    const SpdOperator& a, const std::vector<Subspace>& subspaces,
    const SolverSpec& spec) {
  std::vector<SubspaceSolver> solvers;
  solvers.reserve(subspaces.size());
  for (const Subspace& s : subspaces) {
    Matrix a_i = s.inclusion().transpose() * a.matrix() * s.inclusion();
    solvers.emplace_back(spec, std::move(a_i));
  }
  return solvers;
}

}  // namespace detail

/// Decomposition from explicit inclusion bases with a uniform solver kind.
inline Decomposition make_decomposition(const SpdOperator& a,
                                        std::vector<Matrix> inclusions,
                                        SolverSpec spec = SolverSpec::exact()) {
  std::vector<Subspace> subspaces;
  subspaces.reserve(inclusions.size());
  for (Matrix& m : inclusions) subspaces.emplace_back(std::move(m));
  auto solvers = detail::make_solvers(a, subspaces, spec);
  return Decomposition(a, std::move(subspaces), std::move(solvers));
}

/// J = N one-dimensional subspaces spanned by the coordinate unit vectors.
inline Decomposition make_coordinate_decomposition(
    const SpdOperator& a, SolverSpec spec = SolverSpec::exact()) {
  std::vector<Matrix> inclusions;
  inclusions.reserve(static_cast<std::size_t>(a.dim()));
  for (Index i = 0; i < a.dim(); ++i) {
    Matrix e = Matrix::Zero(a.dim(), 1);
    e(i, 0) = 1.0;
    inclusions.push_back(std::move(e));
  }
  return make_decomposition(a, std::move(inclusions), spec);
}

/// Subspaces spanned by the unit vectors of each index block (0-based).
/// Blocks may overlap; together they must cover every index.
inline Decomposition make_block_decomposition(
    const SpdOperator& a, const std::vector<std::vector<int>>& blocks,
    SolverSpec spec = SolverSpec::exact()) {
  const Index n = a.dim();
  if (blocks.empty()) {
    throw DecompositionError("make_block_decomposition: no blocks given");
  }
  std::vector<bool> covered(static_cast<std::size_t>(n), false);
  std::vector<Matrix> inclusions;
  inclusions.reserve(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].empty()) {
      throw DecompositionError("make_block_decomposition: block " +
                               std::to_string(b) + " is empty");
    }
    Matrix inc = Matrix::Zero(n, static_cast<Index>(blocks[b].size()));
    for (std::size_t k = 0; k < blocks[b].size(); ++k) {
      const int idx = blocks[b][k];
      if (idx < 0 || idx >= n) {
        throw DecompositionError("make_block_decomposition: index " +
                                 std::to_string(idx) + " out of range");
      }
      inc(idx, static_cast<Index>(k)) = 1.0;
      covered[static_cast<std::size_t>(idx)] = true;
    }
    inclusions.push_back(std::move(inc));
  }
  for (Index i = 0; i < n; ++i) {
    if (!covered[static_cast<std::size_t>(i)]) {
      throw DecompositionError("make_block_decomposition: index " +
                               std::to_string(i) + " is not covered");
    }
  }
  return make_decomposition(a, std::move(inclusions), spec);
}

/// Assembles Q_i, A_i, P_i, T_i, T_i^* and the symmetrized T-bar for one
/// subspace.  The A-adjoint is computed exactly as A^-1 T_i^T A using the
/// ambient factorization.
inline SubspaceOperators assemble_operators(const Decomposition& d, int i) {
  const Subspace& s = d.subspace(i);
  const SubspaceSolver& solver = d.solver(i);
  const Matrix& a = d.ambient().matrix();
  SubspaceOperators ops;
  ops.q = s.inclusion().transpose();
  ops.a_i = solver.restricted_operator();
  const Matrix qa = ops.q * a;
  Eigen::LLT<Matrix> llt(ops.a_i);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError(
        "assemble_operators: restricted operator is not positive definite");
  }
  ops.p = llt.solve(qa);  // A_i P_i = Q_i A
  ops.t = s.inclusion() * (solver.matrix() * qa);
  ops.t_star = d.ambient().solve(Matrix(ops.t.transpose() * a));
  ops.t_bar = ops.t + ops.t_star - ops.t_star * ops.t;
  return ops;
}

/// R-bar_i = R_i^t + R_i - R_i^t A_i R_i.
inline Matrix symmetrized_solver(const Decomposition& d, int i) {
  return d.solver(i).symmetrized();
}

/// ||I - T_i||_A over the whole space; equal to one for an exact solver on a
/// proper subspace (I - P_i is an A-orthogonal projection).
inline double contraction_factor(const Decomposition& d, int i) {
  const SubspaceOperators ops = assemble_operators(d, i);
  const Index n = d.ambient().dim();
  return a_operator_norm(d.ambient(), Matrix::Identity(n, n) - ops.t);
}

/// ||(I - T_i)|_{V_i}||_A, the contraction of the subspace iteration on its
/// own subspace.  This is the quantity that must be below one for the
/// almost-sure convergence hypotheses; the full-space norm cannot drop below
/// one when V_i is proper.
inline double subspace_contraction_factor(const Decomposition& d, int i) {
  const SubspaceOperators ops = assemble_operators(d, i);
  const Subspace& s = d.subspace(i);
  const Index n = d.ambient().dim();
  const Matrix m = (Matrix::Identity(n, n) - ops.t) * s.inclusion();
  Matrix num = m.transpose() * d.ambient().matrix() * m;
  num = ((num + num.transpose()) / 2.0).eval();
  // Pencil (M^T A M, A_i) on the subspace coordinates.
  Eigen::LLT<Matrix> llt(ops.a_i);
  const Matrix l = llt.matrixL();
  const auto lower = l.triangularView<Eigen::Lower>();
  const Matrix half = lower.solve(num);
  Matrix w = lower.solve(half.transpose());
  w = ((w + w.transpose()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(w, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(eig.eigenvalues().maxCoeff(), 0.0));
}

}  // namespace subcorr
