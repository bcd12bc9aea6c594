#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "subcorr/decomposition.hpp"
#include "subcorr/problem.hpp"
#include "subcorr/rng.hpp"

namespace subcorr {

/// Per-step Bernoulli fault injector: with probability theta the whole
/// correction is rejected and the iterate left unchanged.
struct FaultModel {
  explicit FaultModel(double theta_) : theta(theta_) {
    if (!(theta >= 0.0 && theta < 1.0)) {
      throw ParameterError("FaultModel: theta must lie in [0, 1)");
    }
  }
  double theta;
};

enum class AlgorithmKind {
  kPsc,
  kSsc,
  kRandomIndex,
  kRandomPermutation,
  kFaultTolerant,
};

inline const char* algorithm_name(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::kPsc: return "psc";
    case AlgorithmKind::kSsc: return "ssc";
    case AlgorithmKind::kRandomIndex: return "random_index";
    case AlgorithmKind::kRandomPermutation: return "random_permutation";
    case AlgorithmKind::kFaultTolerant: return "fault_tolerant";
  }
  return "unknown";
}

/// What happened in one recorded step.
struct StepEvent {
  enum class Kind { kCorrected, kFaulted, kSweep, kParallel };
  Kind kind = Kind::kCorrected;
  int index = -1;           // kCorrected
  std::vector<int> order;   // kSweep

  static StepEvent corrected(int i) { return {Kind::kCorrected, i, {}}; }
  static StepEvent faulted() { return {Kind::kFaulted, -1, {}}; }
  static StepEvent sweep(std::vector<int> order) {
    return {Kind::kSweep, -1, std::move(order)};
  }
  static StepEvent parallel() { return {Kind::kParallel, -1, {}}; }
};

/// Seeded execution record: squared energy-norm errors per step plus the
/// per-step events.  energies has K+1 entries, events has K.
struct IterationTrace {
  std::vector<double> energies;
  std::vector<StepEvent> events;
  std::uint64_t master_seed = 0;
  std::uint64_t stream_index = 0;
  AlgorithmKind algorithm = AlgorithmKind::kPsc;
};

namespace detail {

/// u + I_i R_i Q_i r for a residual r.
inline void add_correction(const Decomposition& d, int i, const Vector& r,
                           Vector& u) {
  const Matrix& inc = d.subspace(i).inclusion();
  const Vector r_i = inc.transpose() * r;
  u += inc * d.solver(i).apply(r_i);
}

inline void check_permutation(const std::vector<int>& order, int j) {
  if (static_cast<int>(order.size()) != j) {
    throw ParameterError("order must list each subspace exactly once");
  }
  std::vector<bool> seen(static_cast<std::size_t>(j), false);
  for (int i : order) {
    if (i < 0 || i >= j || seen[static_cast<std::size_t>(i)]) {
      throw ParameterError("order is not a permutation of the subspaces");
    }
    seen[static_cast<std::size_t>(i)] = true;
  }
}

}  // namespace detail

/// One parallel-subspace-correction step: all corrections are computed from
/// the same residual and summed, u + sum_i I_i R_i Q_i (f - A u).
inline Vector psc_step(const Decomposition& d, const LinearSystem& sys,
                       const Vector& u) {
  const Vector r = sys.rhs() - d.ambient().apply(u);
  Vector next = u;
  for (int i = 0; i < d.count(); ++i) detail::add_correction(d, i, r, next);
  return next;
}

/// The PSC operator B_a = sum_i I_i R_i Q_i, assembled densely; with
/// `symmetrized` the solvers are replaced by R-bar_i (the convention used by
/// the expected-decay identities).
inline Matrix psc_operator(const Decomposition& d, bool symmetrized = false) {
  const Index n = d.ambient().dim();
  Matrix b = Matrix::Zero(n, n);
  for (int i = 0; i < d.count(); ++i) {
    const Matrix& inc = d.subspace(i).inclusion();
    const Matrix r =
        symmetrized ? d.solver(i).symmetrized() : d.solver(i).matrix();
    b += inc * r * inc.transpose();
  }
  return b;
}

/// One successive sweep in the given order: each correction sees the residual
/// left by the previous one.
inline Vector ssc_sweep(const Decomposition& d, const LinearSystem& sys,
                        const Vector& u, const std::vector<int>& order) {
  detail::check_permutation(order, d.count());
  Vector v = u;
  for (int i : order) {
    const Vector r = sys.rhs() - d.ambient().apply(v);
    detail::add_correction(d, i, r, v);
  }
  return v;
}

inline std::vector<int> identity_order(int j) {
  std::vector<int> order(static_cast<std::size_t>(j));
  for (int i = 0; i < j; ++i) order[static_cast<std::size_t>(i)] = i;
  return order;
}

/// Error propagator of a sweep: (I - T_{order(J)}) ... (I - T_{order(1)}),
/// applied right to left in the order corrections occur.
inline Matrix ssc_error_propagator(const Decomposition& d,
                                   const std::vector<int>& order) {
  detail::check_permutation(order, d.count());
  const Index n = d.ambient().dim();
  Matrix e = Matrix::Identity(n, n);
  for (int i : order) {
    const SubspaceOperators ops = assemble_operators(d, i);
    e = ((Matrix::Identity(n, n) - ops.t) * e).eval();
  }
  return e;
}

/// One step of the randomized method: a uniformly drawn subspace is
/// corrected.  Returns the new iterate and the drawn index.
inline std::pair<Vector, int> random_index_step(const Decomposition& d,
                                                const LinearSystem& sys,
                                                const Vector& u,
                                                RngStream& rng) {
  const int i = static_cast<int>(
      rng.uniform_below(static_cast<std::uint64_t>(d.count())));
  const Vector r = sys.rhs() - d.ambient().apply(u);
  Vector next = u;
  detail::add_correction(d, i, r, next);
  return {std::move(next), i};
}

/// One full sweep in a permutation drawn uniformly over all J! orderings.
inline std::pair<Vector, std::vector<int>> random_permutation_sweep(
    const Decomposition& d, const LinearSystem& sys, const Vector& u,
    RngStream& rng) {
  std::vector<int> order = rng.permutation(d.count());
  Vector next = ssc_sweep(d, sys, u, order);
  return {std::move(next), std::move(order)};
}

/// Fault-tolerant randomized step.  The rng is consumed in a fixed order:
/// the fault draw first, then the index draw only when no fault occurred, so
/// traces are reproducible.  On a fault the iterate is returned unchanged.
inline std::pair<Vector, StepEvent> fault_tolerant_step(
    const Decomposition& d, const LinearSystem& sys, const Vector& u,
    RngStream& rng, const FaultModel& fm) {
  if (rng.bernoulli(fm.theta)) {
    return {u, StepEvent::faulted()};
  }
  auto [next, i] = random_index_step(d, sys, u, rng);
  return {std::move(next), StepEvent::corrected(i)};
}

struct TrajectoryOptions {
  std::optional<FaultModel> fault;
  std::optional<std::vector<int>> order;  // ssc only; defaults to 0..J-1
};

/// Runs `steps` iterations of the chosen algorithm from u0, recording
/// ||u - u^k||_A^2 for every k.  For the permutation algorithm one step is a
/// full J-sweep and the event records the drawn order.
inline IterationTrace run_trajectory(AlgorithmKind algorithm,
                                     const Decomposition& d,
                                     const LinearSystem& sys, const Vector& u0,
                                     int steps, RngStream rng,
                                     TrajectoryOptions options = {}) {
  if (steps < 0) throw ParameterError("run_trajectory: steps must be >= 0");
  if (algorithm == AlgorithmKind::kFaultTolerant && !options.fault) {
    throw ParameterError("run_trajectory: fault model required");
  }
  const Vector& exact = sys.solution();
  const std::vector<int> ssc_order =
      options.order ? *options.order : identity_order(d.count());

  IterationTrace trace;
  trace.master_seed = rng.master_seed();
  trace.stream_index = rng.stream_index();
  trace.algorithm = algorithm;
  trace.energies.reserve(static_cast<std::size_t>(steps) + 1);
  trace.events.reserve(static_cast<std::size_t>(steps));

  Vector u = u0;
  auto record_energy = [&] {
    const Vector e = exact - u;
    trace.energies.push_back(std::max(a_inner(d.ambient(), e, e), 0.0));
  };
  record_energy();
  for (int k = 0; k < steps; ++k) {
    switch (algorithm) {
      case AlgorithmKind::kPsc:
        u = psc_step(d, sys, u);
        trace.events.push_back(StepEvent::parallel());
        break;
      case AlgorithmKind::kSsc:
        u = ssc_sweep(d, sys, u, ssc_order);
        trace.events.push_back(StepEvent::sweep(ssc_order));
        break;
      case AlgorithmKind::kRandomIndex: {
        auto [next, i] = random_index_step(d, sys, u, rng);
        u = std::move(next);
        trace.events.push_back(StepEvent::corrected(i));
        break;
      }
      case AlgorithmKind::kRandomPermutation: {
        auto [next, order] = random_permutation_sweep(d, sys, u, rng);
        u = std::move(next);
        trace.events.push_back(StepEvent::sweep(std::move(order)));
        break;
      }
      case AlgorithmKind::kFaultTolerant: {
        auto [next, event] = fault_tolerant_step(d, sys, u, rng, *options.fault);
        u = std::move(next);
        trace.events.push_back(std::move(event));
        break;
      }
    }
    record_energy();
  }
  return trace;
}

}  // namespace subcorr
