#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "subcorr/analysis.hpp"
#include "subcorr/problem.hpp"
#include "subcorr/solvers.hpp"

using namespace subcorr;

TEST_CASE("psc step examples") {
  const SpdOperator id2{Matrix::Identity(2, 2)};
  const Decomposition di = make_coordinate_decomposition(id2);
  const LinearSystem sysi(id2, (Vector(2) << 1, 2).finished());
  // Orthogonal subspaces: exact after one parallel step.
  REQUIRE((psc_step(di, sysi, Vector::Zero(2)) -
           (Vector(2) << 1, 2).finished())
              .norm() < 1e-14);

  const SpdOperator a2 = build_laplacian_1d(2);
  const Decomposition d2 = make_coordinate_decomposition(a2);
  const LinearSystem sys2(a2, (Vector(2) << 1, 1).finished());
  // Coordinate PSC is the Jacobi step u + D^-1 r.
  const Vector u1 = psc_step(d2, sys2, Vector::Zero(2));
  REQUIRE_THAT(u1(0), Catch::Matchers::WithinAbs(0.5, 1e-14));
  REQUIRE_THAT(u1(1), Catch::Matchers::WithinAbs(0.5, 1e-14));

  // Zero residual: returns the iterate unchanged.
  const Vector fixed = psc_step(d2, sys2, sys2.solution());
  REQUIRE((fixed - sys2.solution()).norm() < 1e-12);
}

TEST_CASE("psc operator examples") {
  const SpdOperator a2 = build_laplacian_1d(2);
  const Decomposition d2 = make_coordinate_decomposition(a2);
  const Matrix ba = psc_operator(d2);
  REQUIRE((ba - Matrix::Identity(2, 2) * 0.5).cwiseAbs().maxCoeff() < 1e-14);

  const SpdOperator id2{Matrix::Identity(2, 2)};
  const Decomposition di = make_coordinate_decomposition(id2);
  REQUIRE((psc_operator(di) * id2.matrix() - Matrix::Identity(2, 2))
              .cwiseAbs()
              .maxCoeff() < 1e-14);

  // Eigenvalues of D^-1 A for the 2-point chain are 1/2 and 3/2.
  const Vector lambda = a_selfadjoint_eigenvalues(a2, ba * a2.matrix());
  REQUIRE_THAT(lambda.minCoeff(), Catch::Matchers::WithinAbs(0.5, 1e-12));
  REQUIRE_THAT(lambda.maxCoeff(), Catch::Matchers::WithinAbs(1.5, 1e-12));
}

TEST_CASE("ssc sweep examples") {
  const SpdOperator id2{Matrix::Identity(2, 2)};
  const Decomposition di = make_coordinate_decomposition(id2);
  const LinearSystem sysi(id2, (Vector(2) << 1, 2).finished());
  REQUIRE((ssc_sweep(di, sysi, Vector::Zero(2), {0, 1}) -
           (Vector(2) << 1, 2).finished())
              .norm() < 1e-14);

  // Forward Gauss-Seidel by hand: f = (1,0), u0 = 0 gives (1/2, 1/4).
  const SpdOperator a2 = build_laplacian_1d(2);
  const Decomposition d2 = make_coordinate_decomposition(a2);
  const LinearSystem sys2(a2, (Vector(2) << 1, 0).finished());
  const Vector u = ssc_sweep(d2, sys2, Vector::Zero(2), {0, 1});
  REQUIRE_THAT(u(0), Catch::Matchers::WithinAbs(0.5, 1e-14));
  REQUIRE_THAT(u(1), Catch::Matchers::WithinAbs(0.25, 1e-14));

  const Vector fixed = ssc_sweep(d2, sys2, sys2.solution(), {0, 1});
  REQUIRE((fixed - sys2.solution()).norm() < 1e-12);

  REQUIRE_THROWS_AS(ssc_sweep(d2, sys2, Vector::Zero(2), {0, 0}),
                    ParameterError);
  REQUIRE_THROWS_AS(ssc_sweep(d2, sys2, Vector::Zero(2), {0}),
                    ParameterError);
}

TEST_CASE("ssc error propagator examples") {
  const SpdOperator id2{Matrix::Identity(2, 2)};
  const Decomposition di = make_coordinate_decomposition(id2);
  REQUIRE(ssc_error_propagator(di, {0, 1}).cwiseAbs().maxCoeff() < 1e-14);

  const SpdOperator a2 = build_laplacian_1d(2);
  const Decomposition d2 = make_coordinate_decomposition(a2);
  Matrix expected(2, 2);
  expected << 0, 0.5, 0, 0.25;
  REQUIRE((ssc_error_propagator(d2, {0, 1}) - expected).cwiseAbs().maxCoeff() <
          1e-14);
}

TEST_CASE("sweep equals the propagator acting on the error") {
  const SpdOperator a = build_laplacian_1d(4);
  const Decomposition d =
      make_coordinate_decomposition(a, SolverSpec::richardson(1.1));
  const LinearSystem sys = make_default_system(a, 5);
  const std::vector<int> order = {2, 0, 3, 1};
  const Matrix e = ssc_error_propagator(d, order);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Vector u0 = random_unit_vector(4, seed, 0);
    const Vector swept = ssc_sweep(d, sys, u0, order);
    const Vector propagated = sys.solution() - e * (sys.solution() - u0);
    REQUIRE((swept - propagated).norm() < 1e-12);
  }
}

TEST_CASE("random index step draws uniformly and deterministically") {
  const SpdOperator a = build_laplacian_1d(3);
  const Decomposition d = make_coordinate_decomposition(a);
  const LinearSystem sys = make_default_system(a, 2);

  RngStream r1(9, 0);
  RngStream r2(9, 0);
  const Vector u = Vector::Zero(3);
  const auto [v1, i1] = random_index_step(d, sys, u, r1);
  const auto [v2, i2] = random_index_step(d, sys, u, r2);
  REQUIRE(i1 == i2);
  REQUIRE(v1 == v2);

  // J = 1: always index 0 and identical to the one-subspace sweep.
  const Decomposition whole = make_block_decomposition(a, {{0, 1, 2}});
  RngStream r3(9, 0);
  const auto [vw, iw] = random_index_step(whole, sys, u, r3);
  REQUIRE(iw == 0);
  REQUIRE((vw - ssc_sweep(whole, sys, u, {0})).norm() < 1e-14);
}

TEST_CASE("corrected component solves exactly on the identity") {
  const SpdOperator id2{Matrix::Identity(2, 2)};
  const Decomposition d = make_coordinate_decomposition(id2);
  const LinearSystem sys(id2, (Vector(2) << 1, 1).finished());
  // Find a seed whose first draw is index 0.
  for (std::uint64_t seed = 0; seed < 32; ++seed) {
    RngStream rng(seed, 0);
    const auto [v, i] = random_index_step(d, sys, Vector::Zero(2), rng);
    if (i == 0) {
      REQUIRE((v - (Vector(2) << 1, 0).finished()).norm() < 1e-14);
      return;
    }
  }
  FAIL("no seed produced index 0");
}

TEST_CASE("random permutation sweep reproduces the plain sweep") {
  const SpdOperator a = build_laplacian_1d(4);
  const Decomposition d = make_coordinate_decomposition(a);
  const LinearSystem sys = make_default_system(a, 3);
  const Vector u = Vector::Zero(4);

  RngStream draw(21, 0);
  const auto [next, order] = random_permutation_sweep(d, sys, u, draw);
  REQUIRE(order.size() == 4);
  REQUIRE((next - ssc_sweep(d, sys, u, order)).norm() == 0.0);

  const Decomposition whole = make_block_decomposition(a, {{0, 1, 2, 3}});
  RngStream single(21, 0);
  const auto [_, only] = random_permutation_sweep(whole, sys, u, single);
  REQUIRE(only == std::vector<int>{0});
}

TEST_CASE("fault step rejects bitwise and aligns with the index step") {
  const SpdOperator a = build_laplacian_1d(3);
  const Decomposition d = make_coordinate_decomposition(a);
  const LinearSystem sys = make_default_system(a, 4);
  const Vector u = random_unit_vector(3, 17, 0);

  // theta close to one: faults dominate; faulted steps must be bitwise no-ops.
  const FaultModel heavy(0.999);
  RngStream rng(5, 0);
  int faults = 0;
  Vector current = u;
  for (int k = 0; k < 200; ++k) {
    const auto [next, event] = fault_tolerant_step(d, sys, current, rng, heavy);
    if (event.kind == StepEvent::Kind::kFaulted) {
      ++faults;
      REQUIRE(next == current);
    }
    current = next;
  }
  REQUIRE(faults > 150);

  // theta = 0 never faults and matches random_index_step once the fault draw
  // is accounted for.
  const FaultModel none(0.0);
  RngStream fault_stream(7, 3);
  RngStream index_stream(7, 3);
  index_stream.uniform_double();  // burn the fault draw
  const auto [fv, fe] = fault_tolerant_step(d, sys, u, fault_stream, none);
  const auto [iv, ii] = random_index_step(d, sys, u, index_stream);
  REQUIRE(fe.kind == StepEvent::Kind::kCorrected);
  REQUIRE(fe.index == ii);
  REQUIRE(fv == iv);
}

TEST_CASE("fault fraction concentrates near theta") {
  const SpdOperator a = build_laplacian_1d(2);
  const Decomposition d = make_coordinate_decomposition(a);
  const LinearSystem sys = make_default_system(a, 6);
  const double theta = 0.999;
  const long steps = 100000;
  RngStream rng(8, 0);
  Vector u = Vector::Zero(2);
  long faults = 0;
  for (long k = 0; k < steps; ++k) {
    const auto [next, event] =
        fault_tolerant_step(d, sys, u, rng, FaultModel(theta));
    if (event.kind == StepEvent::Kind::kFaulted) ++faults;
    u = next;
  }
  const double fraction = static_cast<double>(faults) / steps;
  const double sigma = std::sqrt(theta * (1.0 - theta) / steps);
  REQUIRE(std::abs(fraction - theta) <= 5.0 * sigma);
}

TEST_CASE("fault model validates theta") {
  REQUIRE_NOTHROW(FaultModel(0.0));
  REQUIRE_THROWS_AS(FaultModel(1.0), ParameterError);
  REQUIRE_THROWS_AS(FaultModel(-0.1), ParameterError);
}

TEST_CASE("trajectories record energies and events consistently") {
  const SpdOperator a = build_laplacian_1d(3);
  const Decomposition d = make_coordinate_decomposition(a);
  const LinearSystem sys = make_default_system(a, 10);
  const Vector u0 = Vector::Zero(3);

  const IterationTrace empty = run_trajectory(
      AlgorithmKind::kRandomIndex, d, sys, u0, 0, RngStream(1, 0));
  REQUIRE(empty.energies.size() == 1);
  REQUIRE(empty.events.empty());
  const Vector e0 = sys.solution() - u0;
  REQUIRE_THAT(empty.energies[0],
               Catch::Matchers::WithinRel(a_inner(a, e0, e0), 1e-14));

  const IterationTrace t1 = run_trajectory(
      AlgorithmKind::kRandomIndex, d, sys, u0, 20, RngStream(2, 5));
  const IterationTrace t2 = run_trajectory(
      AlgorithmKind::kRandomIndex, d, sys, u0, 20, RngStream(2, 5));
  REQUIRE(t1.energies == t2.energies);
  REQUIRE(t1.events.size() == 20);
  REQUIRE(t1.master_seed == 2);
  REQUIRE(t1.stream_index == 5);
}

TEST_CASE("energies never increase when every step is non-expansive") {
  const SpdOperator a = build_laplacian_1d(4);
  const std::vector<Decomposition> instances = {
      make_coordinate_decomposition(a),
      make_coordinate_decomposition(a, SolverSpec::richardson(1.0)),
  };
  const LinearSystem sys = make_default_system(a, 11);
  const Vector u0 = Vector::Zero(4);
  for (const Decomposition& d : instances) {
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
      const IterationTrace trace =
          run_trajectory(AlgorithmKind::kRandomIndex, d, sys, u0, 30,
                         RngStream(13, trial));
      for (std::size_t k = 1; k < trace.energies.size(); ++k) {
        REQUIRE(trace.energies[k] <=
                trace.energies[k - 1] * (1.0 + 1e-12) + 1e-300);
      }
    }
  }
}

TEST_CASE("identity problem zeroes one component per step") {
  const SpdOperator id2{Matrix::Identity(2, 2)};
  const Decomposition d = make_coordinate_decomposition(id2);
  const LinearSystem sys(id2, (Vector(2) << 1, 1).finished());
  const IterationTrace trace = run_trajectory(
      AlgorithmKind::kRandomIndex, d, sys, Vector::Zero(2), 2, RngStream(3, 0));
  REQUIRE(trace.energies[0] == 2.0);
  for (std::size_t k = 1; k < trace.energies.size(); ++k) {
    REQUIRE(trace.energies[k] <= trace.energies[k - 1]);
    REQUIRE((trace.energies[k] == 0.0 || trace.energies[k] == 1.0 ||
             trace.energies[k] == 2.0));
  }
}

TEST_CASE("every algorithm solves a single whole-space subspace in one step") {
  const SpdOperator a = build_laplacian_1d(5);
  const Decomposition whole = make_block_decomposition(a, {{0, 1, 2, 3, 4}});
  const LinearSystem sys = make_default_system(a, 14);
  const Vector u0 = Vector::Zero(5);
  const double initial = a_norm(a, sys.solution());

  for (const AlgorithmKind kind :
       {AlgorithmKind::kPsc, AlgorithmKind::kSsc, AlgorithmKind::kRandomIndex,
        AlgorithmKind::kRandomPermutation, AlgorithmKind::kFaultTolerant}) {
    TrajectoryOptions options;
    if (kind == AlgorithmKind::kFaultTolerant) {
      options.fault = FaultModel(0.0);
    }
    const IterationTrace trace =
        run_trajectory(kind, whole, sys, u0, 1, RngStream(1, 0), options);
    REQUIRE(trace.energies[1] <= 1e-20 * initial * initial + 1e-20);
  }
}
