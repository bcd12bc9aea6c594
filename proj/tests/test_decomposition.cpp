#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "subcorr/decomposition.hpp"
#include "subcorr/problem.hpp"
#include "subcorr/rng.hpp"
#include "subcorr/solvers.hpp"

using namespace subcorr;

namespace {

Vector random_vector(Index n, std::uint64_t seed) {
  RngStream rng(seed, 0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("coordinate decomposition spans with unit vectors") {
  const SpdOperator id2{Matrix::Identity(2, 2)};
  const Decomposition d = make_coordinate_decomposition(id2);
  REQUIRE(d.count() == 2);
  REQUIRE(d.subspace(0).inclusion() == Matrix::Identity(2, 2).col(0));
  REQUIRE(d.subspace(1).inclusion() == Matrix::Identity(2, 2).col(1));

  const SpdOperator a3 = build_laplacian_1d(3);
  const Decomposition d3 = make_coordinate_decomposition(a3);
  for (int i = 0; i < 3; ++i) {
    REQUIRE(d3.solver(i).restricted_operator()(0, 0) == 2.0);
  }
}

TEST_CASE("block decomposition accepts overlap and rejects gaps") {
  const SpdOperator a4 = build_laplacian_1d(4);
  const Decomposition plain = make_block_decomposition(a4, {{0, 1}, {2, 3}});
  REQUIRE(plain.count() == 2);
  REQUIRE(plain.subspace(0).dim() == 2);

  const Decomposition overlap =
      make_block_decomposition(a4, {{0, 1, 2}, {1, 2, 3}});
  REQUIRE(overlap.count() == 2);
  REQUIRE(overlap.stacked_dim() == 6);

  const SpdOperator a2 = build_laplacian_1d(2);
  REQUIRE_THROWS_AS(make_block_decomposition(a2, {{0}}), DecompositionError);
  REQUIRE_THROWS_AS(make_block_decomposition(a2, {{0}, {}}),
                    DecompositionError);
  REQUIRE_THROWS_AS(make_block_decomposition(a2, {{0, 5}}),
                    DecompositionError);
}

TEST_CASE("dependent inclusion columns are rejected") {
  Matrix dependent(3, 2);
  dependent << 1, 2, 1, 2, 0, 0;
  REQUIRE_THROWS_AS(Subspace(dependent), DecompositionError);
}

TEST_CASE("assembled operators satisfy the defining relations") {
  const SpdOperator a2 = build_laplacian_1d(2);
  const Decomposition d = make_coordinate_decomposition(a2);
  const SubspaceOperators ops = assemble_operators(d, 0);

  Matrix expected_t(2, 2);
  expected_t << 1, -0.5, 0, 0;
  REQUIRE((ops.t - expected_t).cwiseAbs().maxCoeff() < 1e-14);

  // A_i P_i = Q_i A
  REQUIRE((ops.a_i * ops.p - ops.q * a2.matrix()).cwiseAbs().maxCoeff() <
          1e-12);

  REQUIRE_THROWS_AS(assemble_operators(d, 2), DecompositionError);
  REQUIRE_THROWS_AS(assemble_operators(d, -1), DecompositionError);
}

TEST_CASE("identity operator gives coordinate projections") {
  const SpdOperator id2{Matrix::Identity(2, 2)};
  const Decomposition d = make_coordinate_decomposition(id2);
  const SubspaceOperators ops = assemble_operators(d, 0);
  Matrix e11 = Matrix::Zero(2, 2);
  e11(0, 0) = 1.0;
  REQUIRE((ops.t - e11).cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE((d.subspace(0).inclusion() * ops.p - e11).cwiseAbs().maxCoeff() <
          1e-14);
}

TEST_CASE("structural relations hold on every test decomposition") {
  const std::vector<Decomposition> instances = {
      make_coordinate_decomposition(build_laplacian_1d(5)),
      make_block_decomposition(build_laplacian_1d(4), {{0, 1}, {1, 2, 3}}),
      make_coordinate_decomposition(build_random_spd(4, 7, 30.0)),
      make_coordinate_decomposition(build_laplacian_1d(4),
                                    SolverSpec::richardson(1.3)),
  };
  for (const Decomposition& d : instances) {
    const Matrix& a = d.ambient().matrix();
    for (int i = 0; i < d.count(); ++i) {
      const SubspaceOperators ops = assemble_operators(d, i);
      const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
      REQUIRE((ops.a_i * ops.p - ops.q * a).cwiseAbs().maxCoeff() <
              1e-12 * scale);
      REQUIRE((ops.t - d.subspace(i).inclusion() * d.solver(i).matrix() *
                           ops.q * a)
                  .cwiseAbs()
                  .maxCoeff() < 1e-12 * scale);
      REQUIRE((ops.t_bar - (ops.t + ops.t_star - ops.t_star * ops.t))
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("exact solvers make T an A-orthogonal projection") {
  const Decomposition d =
      make_block_decomposition(build_laplacian_1d(4), {{0, 1}, {1, 2, 3}});
  const SpdOperator& a = d.ambient();
  for (int i = 0; i < d.count(); ++i) {
    const SubspaceOperators ops = assemble_operators(d, i);
    REQUIRE((ops.t * ops.t - ops.t).cwiseAbs().maxCoeff() < 1e-12);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Vector u = random_vector(4, 2 * seed);
      const Vector v = random_vector(4, 2 * seed + 1);
      REQUIRE_THAT(a_inner(a, ops.t * u, v),
                   Catch::Matchers::WithinAbs(a_inner(a, u, ops.t * v), 1e-12));
    }
  }
}

TEST_CASE("symmetrized solver examples") {
  const SpdOperator a2 = build_laplacian_1d(2);

  const Decomposition exact = make_coordinate_decomposition(a2);
  // Exact: R-bar = A_i^-1 = [1/2].
  REQUIRE_THAT(symmetrized_solver(exact, 0)(0, 0),
               Catch::Matchers::WithinAbs(0.5, 1e-14));

  // Scalar Richardson oracle: A_i = [2], R = omega/2,
  // R-bar = 2R - 2R^2 = omega - omega^2/2.
  const double omega = 0.8;
  const Decomposition richardson =
      make_coordinate_decomposition(a2, SolverSpec::richardson(omega));
  REQUIRE_THAT(symmetrized_solver(richardson, 0)(0, 0),
               Catch::Matchers::WithinAbs(omega - omega * omega / 2.0, 1e-14));
}

TEST_CASE("symmetrized iteration matches the squared step") {
  // (I - T-bar_i) e == (I - T_i)* (I - T_i) e in the A inner product, i.e.
  // ||(I - T_i) e||_A^2 == ((I - T-bar_i) e, e)_A.
  const Decomposition d = make_coordinate_decomposition(
      build_laplacian_1d(4), SolverSpec::richardson(0.9));
  const SpdOperator& a = d.ambient();
  for (int i = 0; i < d.count(); ++i) {
    const SubspaceOperators ops = assemble_operators(d, i);
    const Matrix step = Matrix::Identity(4, 4) - ops.t;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Vector e = random_vector(4, seed);
      const double lhs = a_norm(a, step * e);
      const double rhs =
          a_inner(a, (Matrix::Identity(4, 4) - ops.t_bar) * e, e);
      REQUIRE_THAT(lhs * lhs, Catch::Matchers::WithinAbs(rhs, 1e-10));
    }
  }
}

TEST_CASE("contraction factor examples") {
  const SpdOperator id2{Matrix::Identity(2, 2)};
  REQUIRE_THAT(contraction_factor(make_coordinate_decomposition(id2), 0),
               Catch::Matchers::WithinAbs(1.0, 1e-12));

  const SpdOperator a2 = build_laplacian_1d(2);
  const Decomposition exact = make_coordinate_decomposition(a2);
  for (int i = 0; i < 2; ++i) {
    REQUIRE_THAT(contraction_factor(exact, i),
                 Catch::Matchers::WithinAbs(1.0, 1e-12));
    // Exact subspace solve: zero contraction on the subspace itself.
    REQUIRE(subspace_contraction_factor(exact, i) < 1e-12);
  }

  // Single whole-space subspace with Richardson omega = 1:
  // ||I - A / lambda_max||_A = 1 - lambda_min / lambda_max = 2/3.
  const Decomposition whole =
      make_block_decomposition(a2, {{0, 1}}, SolverSpec::richardson(1.0));
  REQUIRE_THAT(contraction_factor(whole, 0),
               Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-12));
}

TEST_CASE("Richardson steps contract strictly inside the subspace") {
  const Decomposition d = make_block_decomposition(
      build_laplacian_1d(4), {{0, 1}, {1, 2, 3}}, SolverSpec::richardson(1.5));
  const SpdOperator& a = d.ambient();
  const Index n = a.dim();
  for (int i = 0; i < d.count(); ++i) {
    REQUIRE(subspace_contraction_factor(d, i) < 1.0);
    const SubspaceOperators ops = assemble_operators(d, i);
    const Matrix step = Matrix::Identity(n, n) - ops.t;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Vector v = random_vector(n, seed);
      REQUIRE(a_norm(a, step * v) <= a_norm(a, v) * (1.0 + 1e-12));
      const Vector w = d.subspace(i).inclusion() *
                       random_vector(d.subspace(i).dim(), seed + 100);
      if (a_norm(a, w) > 1e-12) {
        REQUIRE(a_norm(a, step * w) < a_norm(a, w));
      }
    }
  }
}

TEST_CASE("PSC operator built from symmetrized solvers sums the T-bars") {
  const std::vector<Decomposition> instances = {
      make_coordinate_decomposition(build_laplacian_1d(4)),
      make_coordinate_decomposition(build_laplacian_1d(4),
                                    SolverSpec::richardson(0.7)),
      make_block_decomposition(build_laplacian_1d(5), {{0, 1, 2}, {2, 3, 4}},
                               SolverSpec::richardson(1.2)),
  };
  for (const Decomposition& d : instances) {
    const SpdOperator& a = d.ambient();
    const Index n = a.dim();
    const Matrix ba = psc_operator(d, /*symmetrized=*/true);
    Matrix tbar_sum = Matrix::Zero(n, n);
    for (int i = 0; i < d.count(); ++i) {
      tbar_sum += assemble_operators(d, i).t_bar;
    }
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Vector v = random_vector(n, seed);
      REQUIRE_THAT(a_inner(a, ba * a.apply(v), v),
                   Catch::Matchers::WithinAbs(a_inner(a, tbar_sum * v, v),
                                              1e-12 * v.squaredNorm() * 4));
    }
  }
}

TEST_CASE("completeness is enforced") {
  // Two copies of the same line do not span R^2.
  Matrix line(2, 1);
  line << 1, 1;
  const SpdOperator id2{Matrix::Identity(2, 2)};
  REQUIRE_THROWS_AS(make_decomposition(id2, {line, line}),
                    DecompositionError);
}

TEST_CASE("omega outside the open interval is rejected") {
  REQUIRE_THROWS_AS(SolverSpec::richardson(0.0), ParameterError);
  REQUIRE_THROWS_AS(SolverSpec::richardson(2.0), ParameterError);
  REQUIRE_THROWS_AS(SolverSpec::richardson(2.5), ParameterError);
}
