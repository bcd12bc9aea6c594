#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "subcorr/decomposition.hpp"
#include "subcorr/problem.hpp"
#include "subcorr/solvers.hpp"
#include "subcorr/spectral.hpp"

namespace subcorr {

/// Default cap on exact enumeration (number of event paths).
inline constexpr double kDefaultPathBudget = 1e7;

/// Default cap on J for the J!-permutation enumeration.
inline constexpr int kDefaultFactorialBudget = 8;

struct SpectrumSummary {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  std::string of;
};

/// Extreme eigenvalues of B_a A with B_a assembled from the symmetrized
/// subspace solvers (the convention the expected-decay identities use).
inline SpectrumSummary spectrum_of_BaA(const Decomposition& d) {
  const Matrix ba = psc_operator(d, /*symmetrized=*/true);
  const Vector lambda =
      a_selfadjoint_eigenvalues(d.ambient(), ba * d.ambient().matrix());
  return {lambda.minCoeff(), lambda.maxCoeff(), "BaA"};
}

/// Oracle or Monte Carlo estimate of the expected squared energy error per
/// step, together with the identity-predicted values.
struct ExpectationReport {
  std::vector<int> k_values;
  bool exact = false;
  std::vector<double> expected_energy;   // E(||e^k||_A^2)
  std::vector<double> quadratic_energy;  // E((B_a A e^k, e^k)_A)
  std::vector<double> delta;             // per-k ratio of the two
  std::vector<double> predicted_energy;  // recursion from E_0
  double max_discrepancy = 0.0;
  double theta = 0.0;
  bool has_fault_model = false;
  long trials = 0;                 // Monte Carlo only
  std::vector<double> std_error;   // Monte Carlo only

  int steps() const { return static_cast<int>(k_values.size()) - 1; }
};

namespace detail {

struct EnumerationContext {
  std::vector<Matrix> propagators;  // I - T_i
  Matrix energy_form;               // A
  Matrix quadratic_form;            // A B_a A (symmetrized solvers)
  double corr_probability = 0.0;    // (1 - theta)/J, or 1/J without faults
  double fault_probability = 0.0;
  bool has_fault_branch = false;
};

inline EnumerationContext make_enumeration_context(
    const Decomposition& d, const std::optional<FaultModel>& fm) {
  EnumerationContext ctx;
  const Index n = d.ambient().dim();
  ctx.propagators.reserve(static_cast<std::size_t>(d.count()));
  for (int i = 0; i < d.count(); ++i) {
    ctx.propagators.push_back(Matrix::Identity(n, n) -
                              assemble_operators(d, i).t);
  }
  ctx.energy_form = d.ambient().matrix();
  Matrix quad = ctx.energy_form * psc_operator(d, true) * ctx.energy_form;
  ctx.quadratic_form = ((quad + quad.transpose()) / 2.0).eval();
  const double theta = fm ? fm->theta : 0.0;
  ctx.corr_probability = (1.0 - theta) / static_cast<double>(d.count());
  ctx.fault_probability = theta;
  ctx.has_fault_branch = fm.has_value();
  return ctx;
}

inline void check_path_budget(int branches, int steps, double budget) {
  const double paths =
      std::pow(static_cast<double>(branches), static_cast<double>(steps));
  if (paths > budget) {
    throw BudgetError("enumeration of " + std::to_string(paths) +
                      " paths exceeds the budget of " +
                      std::to_string(budget) +
                      "; reduce the step count or the subspace count");
  }
}

/// Depth-first walk over all event sequences, fault branch first and then
/// subspace indices in ascending order, so path visitation (and therefore
/// floating-point accumulation) order is fixed.
template <typename Visit>
void enumerate_paths(const EnumerationContext& ctx, const Vector& e0,
                     int steps, Visit&& visit) {
  std::function<void(const Vector&, double, int)> walk =
      [&](const Vector& e, double probability, int depth) {
        visit(e, probability, depth);
        if (depth == steps) return;
        if (ctx.has_fault_branch) {
          walk(e, probability * ctx.fault_probability, depth + 1);
        }
        for (const Matrix& prop : ctx.propagators) {
          walk(prop * e, probability * ctx.corr_probability, depth + 1);
        }
      };
  walk(e0, 1.0, 0);
}

inline void fill_predictions(ExpectationReport& report, int j) {
  const int steps = report.steps();
  report.delta.assign(static_cast<std::size_t>(steps) + 1, 0.0);
  report.predicted_energy.assign(static_cast<std::size_t>(steps) + 1, 0.0);
  report.predicted_energy[0] = report.expected_energy[0];
  report.max_discrepancy = 0.0;
  for (int k = 0; k <= steps; ++k) {
    const double energy = report.expected_energy[static_cast<std::size_t>(k)];
    if (energy > 0.0) {
      report.delta[static_cast<std::size_t>(k)] =
          report.quadratic_energy[static_cast<std::size_t>(k)] / energy;
    }
    if (k == steps) break;
    const double factor = 1.0 - (1.0 - report.theta) *
                                    report.delta[static_cast<std::size_t>(k)] /
                                    static_cast<double>(j);
    report.predicted_energy[static_cast<std::size_t>(k) + 1] =
        factor * report.predicted_energy[static_cast<std::size_t>(k)];
    if (energy > 0.0) {
      const double next =
          report.expected_energy[static_cast<std::size_t>(k) + 1];
      const double discrepancy = std::abs(next - factor * energy) / energy;
      report.max_discrepancy = std::max(report.max_discrepancy, discrepancy);
    }
  }
}

}  // namespace detail

/// Exact expected energies by enumerating every event sequence with its
/// product probability: theta for a fault, (1 - theta)/J per index (1/J each
/// when no fault model is given).  Also evaluates the expected-decay
/// recursion and records its worst relative discrepancy.
inline ExpectationReport oracle_expected_energy(
    const Decomposition& d, const LinearSystem& sys, const Vector& u0,
    int steps, std::optional<FaultModel> fm = {},
    double path_budget = kDefaultPathBudget) {
  if (steps < 0) throw ParameterError("oracle: steps must be >= 0");
  const int branches = d.count() + (fm ? 1 : 0);
  detail::check_path_budget(branches, steps, path_budget);
  const auto ctx = detail::make_enumeration_context(d, fm);

  ExpectationReport report;
  report.exact = true;
  report.theta = fm ? fm->theta : 0.0;
  report.has_fault_model = fm.has_value();
  report.k_values.resize(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) report.k_values[static_cast<std::size_t>(k)] = k;
  report.expected_energy.assign(static_cast<std::size_t>(steps) + 1, 0.0);
  report.quadratic_energy.assign(static_cast<std::size_t>(steps) + 1, 0.0);

  const Vector e0 = sys.solution() - u0;
  detail::enumerate_paths(
      ctx, e0, steps, [&](const Vector& e, double probability, int depth) {
        const auto k = static_cast<std::size_t>(depth);
        report.expected_energy[k] +=
            probability * std::max(e.dot(ctx.energy_form * e), 0.0);
        report.quadratic_energy[k] +=
            probability * e.dot(ctx.quadratic_form * e);
      });
  detail::fill_predictions(report, d.count());
  return report;
}

/// Monte Carlo estimate over independent seeded trajectories (stream index =
/// trial number), averaged in ascending trial order so the report is
/// bit-reproducible for a fixed master seed.
inline ExpectationReport monte_carlo_expected_energy(
    const Decomposition& d, const LinearSystem& sys, const Vector& u0,
    int steps, long trials, std::uint64_t master_seed,
    std::optional<FaultModel> fm = {}) {
  if (steps < 0) throw ParameterError("monte carlo: steps must be >= 0");
  if (trials < 2) {
    throw ParameterError(
        "monte carlo: at least two trials are required for a variance "
        "estimate");
  }
  const auto ctx = detail::make_enumeration_context(d, fm);
  const Vector& exact = sys.solution();

  const auto size = static_cast<std::size_t>(steps) + 1;
  std::vector<double> sum(size, 0.0), sum_sq(size, 0.0), quad_sum(size, 0.0);
  for (long t = 0; t < trials; ++t) {
    RngStream rng(master_seed, static_cast<std::uint64_t>(t));
    Vector u = u0;
    for (int k = 0; k <= steps; ++k) {
      const Vector e = exact - u;
      const double energy = std::max(e.dot(ctx.energy_form * e), 0.0);
      const auto idx = static_cast<std::size_t>(k);
      sum[idx] += energy;
      sum_sq[idx] += energy * energy;
      quad_sum[idx] += e.dot(ctx.quadratic_form * e);
      if (k == steps) break;
      if (fm) {
        u = fault_tolerant_step(d, sys, u, rng, *fm).first;
      } else {
        u = random_index_step(d, sys, u, rng).first;
      }
    }
  }

  ExpectationReport report;
  report.exact = false;
  report.theta = fm ? fm->theta : 0.0;
  report.has_fault_model = fm.has_value();
  report.trials = trials;
  report.k_values.resize(size);
  report.expected_energy.resize(size);
  report.quadratic_energy.resize(size);
  report.std_error.resize(size);
  const auto n = static_cast<double>(trials);
  for (std::size_t k = 0; k < size; ++k) {
    report.k_values[k] = static_cast<int>(k);
    const double mean = sum[k] / n;
    report.expected_energy[k] = mean;
    report.quadratic_energy[k] = quad_sum[k] / n;
    const double variance =
        std::max(sum_sq[k] - n * mean * mean, 0.0) / (n - 1.0);
    report.std_error[k] = std::sqrt(variance / n);
  }
  detail::fill_predictions(report, d.count());
  return report;
}

/// Exact average of ||I - B_sigma A||_A^2 over all J! sweep orders.
struct PermutationRateReport {
  std::vector<std::vector<int>> permutations;  // lexicographic order
  std::vector<double> squared_norms;           // ||I - B_sigma A||_A^2
  std::vector<double> c_sigma;                 // 1/(1 - rho^2); +inf sentinel
  double mean_squared_norm = 0.0;
  double identity_rhs = 0.0;  // 1 - (1/J!) sum 1/c_sigma
  int excluded = 0;           // sentinel count (non-contractive sweeps)
};

inline PermutationRateReport permutation_expected_rate(
    const Decomposition& d, int factorial_budget = kDefaultFactorialBudget) {
  const int j = d.count();
  if (j > factorial_budget) {
    throw BudgetError("permutation enumeration needs J <= " +
                      std::to_string(factorial_budget) + ", got J = " +
                      std::to_string(j));
  }
  const Index n = d.ambient().dim();
  std::vector<Matrix> propagators;
  propagators.reserve(static_cast<std::size_t>(j));
  for (int i = 0; i < j; ++i) {
    propagators.push_back(Matrix::Identity(n, n) -
                          assemble_operators(d, i).t);
  }

  PermutationRateReport report;
  std::vector<int> order = identity_order(j);
  double norm_sum = 0.0;
  double reciprocal_sum = 0.0;
  do {
    Matrix e = Matrix::Identity(n, n);
    for (int i : order) e = (propagators[static_cast<std::size_t>(i)] * e).eval();
    const double rho = a_operator_norm(d.ambient(), e);
    const double squared = rho * rho;
    double c = std::numeric_limits<double>::infinity();
    if (rho < 1.0 - 1e-14) {
      c = 1.0 / (1.0 - squared);
      reciprocal_sum += 1.0 / c;
    } else {
      ++report.excluded;
    }
    report.permutations.push_back(order);
    report.squared_norms.push_back(squared);
    report.c_sigma.push_back(c);
    norm_sum += squared;
  } while (std::next_permutation(order.begin(), order.end()));

  const auto count = static_cast<double>(report.permutations.size());
  report.mean_squared_norm = norm_sum / count;
  report.identity_rhs = 1.0 - reciprocal_sum / count;
  return report;
}

/// Convergence constants of one sweep read off the norm identity
/// ||I - B_m A||_A^2 = 1 - 1/c1, c0 = c1 - 1.
struct XzConstants {
  double c0 = 0.0;
  double c1 = 1.0;
  double squared_norm = 0.0;
};

inline XzConstants xz_c1_from_norm(const Decomposition& d,
                                   const std::vector<int>& order) {
  const Matrix e = ssc_error_propagator(d, order);
  const double rho = a_operator_norm(d.ambient(), e);
  if (rho >= 1.0) {
    throw NonConvergentSweepError(
        "sweep propagator norm " + std::to_string(rho) +
        " is not below one; constants are undefined");
  }
  XzConstants out;
  out.squared_norm = rho * rho;
  out.c1 = 1.0 / (1.0 - out.squared_norm);
  out.c0 = out.c1 - 1.0;
  return out;
}

/// Direct variational evaluation of c1 for exact subspace solvers:
/// c1 = sup over ||v||_A = 1 of inf over splittings v = sum v_i of
/// sum_i ||P_i(sum_{j>=i} v_j)||_A^2, with subspaces taken in sweep order.
/// The inner minimization is an equality-constrained quadratic program
/// solved through its KKT system; the outer supremum is the largest
/// eigenvalue of the resulting quadratic form relative to A.
inline double xz_c1_supinf_exact(const Decomposition& d,
                                 const std::vector<int>& order,
                                 Index stacked_budget = 64) {
  if (!d.all_exact()) {
    throw UnsupportedError(
        "variational c1 requires exact subspace solvers");
  }
  const int j = d.count();
  detail::check_permutation(order, j);
  if (d.stacked_dim() > stacked_budget) {
    throw BudgetError("stacked decomposition dimension " +
                      std::to_string(d.stacked_dim()) +
                      " exceeds the variational budget");
  }
  const Index n = d.ambient().dim();
  const Index m = d.stacked_dim();

  std::vector<Index> offsets(static_cast<std::size_t>(j) + 1, 0);
  std::vector<Matrix> inclusions(static_cast<std::size_t>(j));
  std::vector<Matrix> projections(static_cast<std::size_t>(j));
  std::vector<Matrix> restricted(static_cast<std::size_t>(j));
  for (int k = 0; k < j; ++k) {
    const int i = order[static_cast<std::size_t>(k)];
    const auto ops = assemble_operators(d, i);
    inclusions[static_cast<std::size_t>(k)] = d.subspace(i).inclusion();
    projections[static_cast<std::size_t>(k)] = ops.p;
    restricted[static_cast<std::size_t>(k)] = ops.a_i;
    offsets[static_cast<std::size_t>(k) + 1] =
        offsets[static_cast<std::size_t>(k)] + d.subspace(i).dim();
  }

  Matrix constraint(n, m);  // v = C x stacks the splitting coordinates
  for (int k = 0; k < j; ++k) {
    constraint.middleCols(offsets[static_cast<std::size_t>(k)],
                          inclusions[static_cast<std::size_t>(k)].cols()) =
        inclusions[static_cast<std::size_t>(k)];
  }

  // Objective sum_k || P_k (sum_{l >= k} I_l x_l) ||_A^2 = x^T G x.
  Matrix g = Matrix::Zero(m, m);
  for (int k = 0; k < j; ++k) {
    const Matrix& p = projections[static_cast<std::size_t>(k)];
    Matrix w = Matrix::Zero(p.rows(), m);
    for (int l = k; l < j; ++l) {
      w.middleCols(offsets[static_cast<std::size_t>(l)],
                   inclusions[static_cast<std::size_t>(l)].cols()) =
          p * inclusions[static_cast<std::size_t>(l)];
    }
    g += w.transpose() * restricted[static_cast<std::size_t>(k)] * w;
  }
  g = ((g + g.transpose()) / 2.0).eval();

  Matrix kkt = Matrix::Zero(m + n, m + n);
  kkt.topLeftCorner(m, m) = 2.0 * g;
  kkt.topRightCorner(m, n) = constraint.transpose();
  kkt.bottomLeftCorner(n, m) = constraint;
  Matrix rhs = Matrix::Zero(m + n, n);
  rhs.bottomRows(n) = Matrix::Identity(n, n);

  Eigen::FullPivLU<Matrix> lu(kkt);
  lu.setThreshold(kPivotTolerance);
  Matrix solution;
  if (lu.isInvertible()) {
    solution = lu.solve(rhs);
  } else {
    // Rank-deficient stacked system: fall back to the minimum-norm solution.
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(kkt);
    solution = cod.solve(rhs);
  }
  const Matrix x = solution.topRows(m);
  if ((constraint * x - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-8) {
    throw DecompositionError(
        "variational c1: KKT system is singular (degenerate decomposition)");
  }

  Matrix h = x.transpose() * g * x;
  h = ((h + h.transpose()) / 2.0).eval();
  const Vector lambda = pencil_eigenvalues(d.ambient(), h);
  return lambda.maxCoeff();
}

/// Uniform J-state transition matrix of the index chain.
struct MarkovChain {
  int states = 0;
  Matrix transition;

  Matrix power(int n) const {
    Matrix out = Matrix::Identity(states, states);
    for (int i = 0; i < n; ++i) out = (out * transition).eval();
    return out;
  }
};

inline MarkovChain markov_chain(int j) {
  if (j < 1) throw ParameterError("markov_chain: J must be >= 1");
  MarkovChain chain;
  chain.states = j;
  chain.transition =
      Matrix::Constant(j, j, 1.0 / static_cast<double>(j));
  return chain;
}

/// One-step conditional expectation of the squared error energy given the
/// current error: ||e||_A^2 - ((1 - theta)/J)(B_a A e, e)_A.
inline double conditional_expected_energy(const Decomposition& d,
                                          const Vector& e,
                                          double theta = 0.0) {
  const Matrix& a = d.ambient().matrix();
  const Matrix ba = psc_operator(d, true);
  const double energy = e.dot(a * e);
  const double quadratic = e.dot(a * (ba * (a * e)));
  return energy - (1.0 - theta) * quadratic / static_cast<double>(d.count());
}

/// Worst per-state mismatch between the enumerated child average and the
/// closed-form conditional expectation, relative to the state energy.
inline double conditional_expectation_discrepancy(
    const Decomposition& d, const LinearSystem& sys, const Vector& u0,
    int steps, std::optional<FaultModel> fm = {},
    double path_budget = kDefaultPathBudget) {
  if (steps < 1) throw ParameterError("conditional check: steps must be >= 1");
  const int branches = d.count() + (fm ? 1 : 0);
  detail::check_path_budget(branches, steps, path_budget);
  const auto ctx = detail::make_enumeration_context(d, fm);
  const Vector e0 = sys.solution() - u0;

  double worst = 0.0;
  detail::enumerate_paths(
      ctx, e0, steps - 1, [&](const Vector& e, double, int) {
        const double energy = std::max(e.dot(ctx.energy_form * e), 0.0);
        double children = 0.0;
        if (ctx.has_fault_branch) children += ctx.fault_probability * energy;
        for (const Matrix& prop : ctx.propagators) {
          const Vector child = prop * e;
          children +=
              ctx.corr_probability * std::max(child.dot(ctx.energy_form * child), 0.0);
        }
        const double theta = ctx.has_fault_branch ? ctx.fault_probability : 0.0;
        const double predicted =
            energy - (1.0 - theta) * e.dot(ctx.quadratic_form * e) /
                         static_cast<double>(d.count());
        if (energy > 0.0) {
          worst = std::max(worst, std::abs(children - predicted) / energy);
        } else {
          worst = std::max(worst, std::abs(children - predicted));
        }
      });
  return worst;
}

/// Empirical tail behaviour of seeded trajectories against the Markov-bound
/// prediction, plus per-trajectory monotonicity bookkeeping.
struct AlmostSureReport {
  std::vector<double> exceedance;       // #{||e^k||^2 >= eps} / trials
  std::vector<double> markov_bound;     // E(||e^k||^2)/eps
  std::vector<double> slack;            // 5 sigma allowance per k
  bool bound_satisfied = true;
  double max_violation = 0.0;           // worst (exceedance - bound - slack)
  bool hypothesis_ok = false;           // all subspace contractions < 1
  bool exact_bound = false;             // bound from the enumeration oracle
  int monotonicity_violations = 0;      // trajectories with an energy uptick
  double initial_energy = 0.0;
  std::vector<double> final_energies;   // one per trajectory
};

inline AlmostSureReport almost_sure_diagnostics(
    const Decomposition& d, const LinearSystem& sys, const Vector& u0,
    int steps, long trials, std::uint64_t master_seed,
    std::optional<FaultModel> fm, double eps,
    double path_budget = kDefaultPathBudget) {
  if (!(eps > 0.0)) throw ParameterError("eps must be positive");
  if (trials < 1) throw ParameterError("at least one trajectory is required");

  AlmostSureReport report;
  report.hypothesis_ok = true;
  for (int i = 0; i < d.count(); ++i) {
    if (!(subspace_contraction_factor(d, i) < 1.0)) {
      report.hypothesis_ok = false;
      break;
    }
  }

  const auto size = static_cast<std::size_t>(steps) + 1;
  std::vector<double> sum(size, 0.0), sum_sq(size, 0.0);
  std::vector<long> exceed_count(size, 0);
  report.final_energies.reserve(static_cast<std::size_t>(trials));
  const TrajectoryOptions options{fm, std::nullopt};
  const AlgorithmKind kind =
      fm ? AlgorithmKind::kFaultTolerant : AlgorithmKind::kRandomIndex;
  for (long t = 0; t < trials; ++t) {
    const IterationTrace trace =
        run_trajectory(kind, d, sys, u0, steps,
                       RngStream(master_seed, static_cast<std::uint64_t>(t)),
                       options);
    bool monotone = true;
    for (std::size_t k = 0; k < size; ++k) {
      const double energy = trace.energies[k];
      sum[k] += energy;
      sum_sq[k] += energy * energy;
      if (energy >= eps) ++exceed_count[k];
      if (k > 0 && energy > trace.energies[k - 1] * (1.0 + 1e-12)) {
        monotone = false;
      }
    }
    if (!monotone) ++report.monotonicity_violations;
    report.final_energies.push_back(trace.energies.back());
  }
  report.initial_energy = sum[0] / static_cast<double>(trials);

  // Bound side: exact expectation when the enumeration fits the budget,
  // otherwise the Monte Carlo mean with its standard error.
  const int branches = d.count() + (fm ? 1 : 0);
  const double paths =
      std::pow(static_cast<double>(branches), static_cast<double>(steps));
  std::vector<double> bound_energy(size, 0.0), bound_stderr(size, 0.0);
  if (paths <= path_budget) {
    const auto oracle =
        oracle_expected_energy(d, sys, u0, steps, fm, path_budget);
    for (std::size_t k = 0; k < size; ++k) {
      bound_energy[k] = oracle.expected_energy[k];
    }
    report.exact_bound = true;
  } else {
    const auto n = static_cast<double>(trials);
    for (std::size_t k = 0; k < size; ++k) {
      const double mean = sum[k] / n;
      bound_energy[k] = mean;
      const double variance =
          trials > 1 ? std::max(sum_sq[k] - n * mean * mean, 0.0) / (n - 1.0)
                     : 0.0;
      bound_stderr[k] = std::sqrt(variance / n);
    }
  }

  report.exceedance.resize(size);
  report.markov_bound.resize(size);
  report.slack.resize(size);
  const auto n = static_cast<double>(trials);
  for (std::size_t k = 0; k < size; ++k) {
    const double fraction = static_cast<double>(exceed_count[k]) / n;
    report.exceedance[k] = fraction;
    report.markov_bound[k] = bound_energy[k] / eps;
    const double binomial_sigma = std::sqrt(fraction * (1.0 - fraction) / n);
    report.slack[k] = 5.0 * (binomial_sigma + bound_stderr[k] / eps);
    const double violation =
        fraction - report.markov_bound[k] - report.slack[k];
    if (violation > report.max_violation) report.max_violation = violation;
    if (violation > 0.0) report.bound_satisfied = false;
  }
  return report;
}

}  // namespace subcorr
