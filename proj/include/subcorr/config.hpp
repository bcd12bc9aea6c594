#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "subcorr/analysis.hpp"
#include "subcorr/decomposition.hpp"
#include "subcorr/problem.hpp"
#include "subcorr/solvers.hpp"

namespace subcorr {

/// Parsed experiment description.
///
/// The text format is flat `section.key = value` lines: `#` starts a comment,
/// blank lines are ignored, duplicate or unknown keys are rejected.  Integer
/// lists are bracketed and comma-separated (`[1,2,3]`); block lists are
/// bracketed lists separated by commas (`[1,2],[2,3]`).  Indices in files are
/// 1-based and converted on parse.
struct ExperimentConfig {
  enum class ProblemKind { kLaplacian1d, kLaplacian2d, kRandomSpd };
  enum class DecompositionKind { kCoordinate, kBlocks };

  ProblemKind problem_kind = ProblemKind::kLaplacian1d;
  Index n = 0;  // laplacian1d / randomspd dimension, laplacian2d grid side
  std::uint64_t problem_seed = 1;
  double condition_target = 100.0;

  DecompositionKind decomposition_kind = DecompositionKind::kCoordinate;
  std::vector<std::vector<int>> blocks;  // 0-based

  SolverKind solver_kind = SolverKind::kExact;
  double omega = 1.0;

  AlgorithmKind algorithm = AlgorithmKind::kRandomIndex;
  std::optional<std::vector<int>> order;  // 0-based
  std::optional<double> theta;

  int steps = 0;
  long trials = 10000;
  std::uint64_t master_seed = 0;
  double path_budget = kDefaultPathBudget;
  int factorial_budget = kDefaultFactorialBudget;
  std::optional<double> eps;
};

namespace detail {

struct ConfigEntry {
  std::string value;
  int line = 0;
  bool consumed = false;
};

class ConfigReader {
 public:
  explicit ConfigReader(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("expected `key = value` on line " +
                              std::to_string(number),
                          number);
      }
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) {
        throw ConfigError("missing key on line " + std::to_string(number),
                          number);
      }
      const auto [it, inserted] =
          entries_.emplace(key, ConfigEntry{value, number, false});
      if (!inserted) {
        throw ConfigError("duplicate key `" + key + "` on lines " +
                              std::to_string(it->second.line) + " and " +
                              std::to_string(number),
                          number);
      }
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::optional<std::string> take(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    it->second.consumed = true;
    return it->second.value;
  }

  int line_of(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  void reject_unconsumed() const {
    for (const auto& [key, entry] : entries_) {
      if (!entry.consumed) {
        throw ConfigError("unknown key `" + key + "` on line " +
                              std::to_string(entry.line),
                          entry.line);
      }
    }
  }

  [[noreturn]] void fail(const std::string& key,
                         const std::string& message) const {
    throw ConfigError("key `" + key + "` (line " +
                          std::to_string(line_of(key)) + "): " + message,
                      line_of(key));
  }

 private:
  static std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
  }

  std::map<std::string, ConfigEntry> entries_;
};

inline long parse_integer(ConfigReader& reader, const std::string& key,
                          const std::string& text) {
  try {
    std::size_t used = 0;
    const long value = std::stol(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    reader.fail(key, "expected an integer, got `" + text + "`");
  }
}

inline std::uint64_t parse_u64(ConfigReader& reader, const std::string& key,
                               const std::string& text) {
  try {
    std::size_t used = 0;
    const unsigned long long value = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<std::uint64_t>(value);
  } catch (const std::exception&) {
    reader.fail(key, "expected an unsigned integer, got `" + text + "`");
  }
}

inline double parse_real(ConfigReader& reader, const std::string& key,
                         const std::string& text) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    reader.fail(key, "expected a number, got `" + text + "`");
  }
}

/// One bracketed 1-based integer list, e.g. `[1,2,3]` -> {0,1,2}.
inline std::vector<int> parse_index_list(ConfigReader& reader,
                                         const std::string& key,
                                         const std::string& text) {
  const auto open = text.find('[');
  const auto close = text.rfind(']');
  if (open == std::string::npos || close == std::string::npos ||
      close < open || open != 0 || close != text.size() - 1) {
    reader.fail(key, "expected a bracketed list like [1,2,3]");
  }
  std::vector<int> out;
  std::string inner = text.substr(open + 1, close - open - 1);
  std::istringstream items(inner);
  std::string item;
  while (std::getline(items, item, ',')) {
    const long value = parse_integer(reader, key, std::string(item.begin(),
                                                              item.end()));
    if (value < 1) reader.fail(key, "indices are 1-based and positive");
    out.push_back(static_cast<int>(value - 1));
  }
  if (out.empty()) reader.fail(key, "list must not be empty");
  return out;
}

/// One or more bracketed lists separated by commas: `[1,2],[2,3]`.
inline std::vector<std::vector<int>> parse_block_list(ConfigReader& reader,
                                                      const std::string& key,
                                                      const std::string& text) {
  std::vector<std::vector<int>> blocks;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find('[', pos);
    if (open == std::string::npos) break;
    const auto close = text.find(']', open);
    if (close == std::string::npos) {
      reader.fail(key, "unterminated `[` in block list");
    }
    blocks.push_back(
        parse_index_list(reader, key, text.substr(open, close - open + 1)));
    pos = close + 1;
  }
  if (blocks.empty()) {
    reader.fail(key, "expected one or more bracketed blocks like [1,2],[3,4]");
  }
  return blocks;
}

}  // namespace detail

/// Parses configuration text; throws ConfigError naming the offending key
/// and line on any violation.
inline ExperimentConfig parse_config_text(const std::string& text) {
  detail::ConfigReader reader(text);
  ExperimentConfig config;

  // problem
  {
    const auto kind = reader.take("problem.kind");
    if (!kind) throw ConfigError("missing required key `problem.kind`");
    if (*kind == "laplacian1d") {
      config.problem_kind = ExperimentConfig::ProblemKind::kLaplacian1d;
    } else if (*kind == "laplacian2d") {
      config.problem_kind = ExperimentConfig::ProblemKind::kLaplacian2d;
    } else if (*kind == "randomspd") {
      config.problem_kind = ExperimentConfig::ProblemKind::kRandomSpd;
    } else {
      reader.fail("problem.kind",
                  "expected laplacian1d, laplacian2d or randomspd");
    }
    const bool is_2d =
        config.problem_kind == ExperimentConfig::ProblemKind::kLaplacian2d;
    const auto n = reader.take("problem.n");
    const auto m = reader.take("problem.m");
    if (is_2d) {
      if (!m) throw ConfigError("laplacian2d requires `problem.m`");
      if (n) reader.fail("problem.n", "only valid for laplacian1d/randomspd");
      config.n = detail::parse_integer(reader, "problem.m", *m);
    } else {
      if (!n) throw ConfigError("`problem.n` is required");
      if (m) reader.fail("problem.m", "only valid for laplacian2d");
      config.n = detail::parse_integer(reader, "problem.n", *n);
    }
    if (config.n < 1) {
      reader.fail(is_2d ? "problem.m" : "problem.n", "must be >= 1");
    }
    const auto seed = reader.take("problem.seed");
    const auto cond = reader.take("problem.condition_target");
    const bool is_random =
        config.problem_kind == ExperimentConfig::ProblemKind::kRandomSpd;
    if (seed) {
      if (!is_random) reader.fail("problem.seed", "only valid for randomspd");
      config.problem_seed = detail::parse_u64(reader, "problem.seed", *seed);
    }
    if (cond) {
      if (!is_random) {
        reader.fail("problem.condition_target", "only valid for randomspd");
      }
      config.condition_target =
          detail::parse_real(reader, "problem.condition_target", *cond);
      if (!(config.condition_target > 1.0)) {
        reader.fail("problem.condition_target", "must exceed 1");
      }
    }
  }

  // decomposition
  {
    const auto kind = reader.take("decomposition.kind");
    if (!kind) throw ConfigError("missing required key `decomposition.kind`");
    if (*kind == "coordinate") {
      config.decomposition_kind =
          ExperimentConfig::DecompositionKind::kCoordinate;
    } else if (*kind == "blocks") {
      config.decomposition_kind = ExperimentConfig::DecompositionKind::kBlocks;
    } else {
      reader.fail("decomposition.kind", "expected coordinate or blocks");
    }
    const auto blocks = reader.take("decomposition.blocks");
    if (config.decomposition_kind ==
        ExperimentConfig::DecompositionKind::kBlocks) {
      if (!blocks) {
        throw ConfigError(
            "decomposition.kind = blocks requires `decomposition.blocks`");
      }
      config.blocks =
          detail::parse_block_list(reader, "decomposition.blocks", *blocks);
    } else if (blocks) {
      reader.fail("decomposition.blocks",
                  "only valid when decomposition.kind = blocks");
    }
  }

  // solver
  {
    const auto kind = reader.take("solver.kind");
    if (kind) {
      if (*kind == "exact") {
        config.solver_kind = SolverKind::kExact;
      } else if (*kind == "richardson") {
        config.solver_kind = SolverKind::kScaledRichardson;
      } else {
        reader.fail("solver.kind", "expected exact or richardson");
      }
    }
    const auto omega = reader.take("solver.omega");
    if (omega) {
      if (config.solver_kind != SolverKind::kScaledRichardson) {
        reader.fail("solver.omega", "only valid when solver.kind = richardson");
      }
      config.omega = detail::parse_real(reader, "solver.omega", *omega);
      if (!(config.omega > 0.0 && config.omega < 2.0)) {
        reader.fail("solver.omega", "must lie in the open interval (0, 2)");
      }
    }
  }

  // algorithm
  {
    const auto kind = reader.take("algorithm.kind");
    if (!kind) throw ConfigError("missing required key `algorithm.kind`");
    if (*kind == "psc") {
      config.algorithm = AlgorithmKind::kPsc;
    } else if (*kind == "ssc") {
      config.algorithm = AlgorithmKind::kSsc;
    } else if (*kind == "random_index") {
      config.algorithm = AlgorithmKind::kRandomIndex;
    } else if (*kind == "random_permutation") {
      config.algorithm = AlgorithmKind::kRandomPermutation;
    } else if (*kind == "fault_tolerant") {
      config.algorithm = AlgorithmKind::kFaultTolerant;
    } else {
      reader.fail("algorithm.kind",
                  "expected psc, ssc, random_index, random_permutation or "
                  "fault_tolerant");
    }
    const auto order = reader.take("algorithm.order");
    if (order) {
      if (config.algorithm != AlgorithmKind::kSsc) {
        reader.fail("algorithm.order", "only valid for algorithm.kind = ssc");
      }
      config.order = detail::parse_index_list(reader, "algorithm.order", *order);
    }
    const auto sampling = reader.take("algorithm.sampling");
    if (sampling && *sampling != "uniform") {
      reader.fail("algorithm.sampling",
                  "only uniform index sampling is supported");
    }
  }

  // scalars
  {
    const auto steps = reader.take("steps");
    if (!steps) throw ConfigError("missing required key `steps`");
    const long value = detail::parse_integer(reader, "steps", *steps);
    if (value < 0) reader.fail("steps", "must be >= 0");
    config.steps = static_cast<int>(value);

    const auto theta = reader.take("theta");
    if (theta) {
      if (config.algorithm != AlgorithmKind::kFaultTolerant) {
        reader.fail("theta",
                    "only valid for algorithm.kind = fault_tolerant");
      }
      const double value_theta = detail::parse_real(reader, "theta", *theta);
      if (!(value_theta >= 0.0 && value_theta < 1.0)) {
        reader.fail("theta", "must lie in the half-open interval [0, 1)");
      }
      config.theta = value_theta;
    } else if (config.algorithm == AlgorithmKind::kFaultTolerant) {
      throw ConfigError("algorithm.kind = fault_tolerant requires `theta`");
    }

    const auto trials = reader.take("trials");
    if (trials) {
      const long value_trials = detail::parse_integer(reader, "trials", *trials);
      if (value_trials < 2) reader.fail("trials", "must be >= 2");
      config.trials = value_trials;
    }

    const auto seed = reader.take("master_seed");
    if (!seed) throw ConfigError("missing required key `master_seed`");
    config.master_seed = detail::parse_u64(reader, "master_seed", *seed);

    const auto paths = reader.take("budgets.paths");
    if (paths) {
      config.path_budget = detail::parse_real(reader, "budgets.paths", *paths);
      if (!(config.path_budget >= 1.0)) {
        reader.fail("budgets.paths", "must be >= 1");
      }
    }
    const auto factorial = reader.take("budgets.factorial_j");
    if (factorial) {
      const long value_fact =
          detail::parse_integer(reader, "budgets.factorial_j", *factorial);
      if (value_fact < 1) reader.fail("budgets.factorial_j", "must be >= 1");
      config.factorial_budget = static_cast<int>(value_fact);
    }
    const auto eps = reader.take("eps");
    if (eps) {
      const double value_eps = detail::parse_real(reader, "eps", *eps);
      if (!(value_eps > 0.0)) reader.fail("eps", "must be positive");
      config.eps = value_eps;
    }
  }

  reader.reject_unconsumed();
  return config;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file `" + path + "`");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

/// Instantiates the operator described by the config.
inline SpdOperator build_problem(const ExperimentConfig& config) {
  switch (config.problem_kind) {
    case ExperimentConfig::ProblemKind::kLaplacian1d:
      return build_laplacian_1d(config.n);
    case ExperimentConfig::ProblemKind::kLaplacian2d:
      return build_laplacian_2d(config.n);
    case ExperimentConfig::ProblemKind::kRandomSpd:
      return build_random_spd(config.n, config.problem_seed,
                              config.condition_target);
  }
  throw ConfigError("unreachable problem kind");
}

inline Decomposition build_decomposition(const ExperimentConfig& config,
                                         const SpdOperator& a) {
  const SolverSpec spec = config.solver_kind == SolverKind::kExact
                              ? SolverSpec::exact()
                              : SolverSpec::richardson(config.omega);
  if (config.decomposition_kind ==
      ExperimentConfig::DecompositionKind::kCoordinate) {
    return make_coordinate_decomposition(a, spec);
  }
  return make_block_decomposition(a, config.blocks, spec);
}

}  // namespace subcorr
