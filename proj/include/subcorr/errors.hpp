#pragma once

#include <stdexcept>
#include <string>

namespace subcorr {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Mismatched or invalid dimensions (empty operator, length disagreement).
struct DimensionError : Error {
  using Error::Error;
};

/// A matrix expected to be SPD failed the symmetry or pivot checks.
struct NotPositiveDefiniteError : Error {
  using Error::Error;
};

/// Invalid parameter value (e.g. condition target <= 1, omega outside (0,2)).
struct ParameterError : Error {
  using Error::Error;
};

/// A subspace family that does not form a valid decomposition.
struct DecompositionError : Error {
  using Error::Error;
};

/// Exact enumeration or permutation count exceeds the configured budget.
struct BudgetError : Error {
  using Error::Error;
};

/// A sweep whose error propagator is not a contraction.
struct NonConvergentSweepError : Error {
  using Error::Error;
};

/// Operation not supported for the given inputs (e.g. variational constant
/// requested with inexact subspace solvers).
struct UnsupportedError : Error {
  using Error::Error;
};

/// Loss of numerical definiteness detected at run time.
struct NumericalError : Error {
  using Error::Error;
};

/// Configuration text rejected by the parser; carries the offending line.
struct ConfigError : Error {
  ConfigError(const std::string& what, int line_number = 0)
      : Error(what), line(line_number) {}
  int line;
};

}  // namespace subcorr
