// Command-line front end: parse an experiment config, run the requested
// command, and write CSV traces or verification tables.
//
// Exit codes: 0 all checks pass, 1 check or numerical failure, 2 budget
// refusal, 3 configuration error.

#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "subcorr/subcorr.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_path;
  std::optional<long> trials;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config file")
      ->required();
  cmd->add_option("--out", opts.out_path, "write output to this file");
  cmd->add_option("--trials", opts.trials, "override config trials");
  cmd->add_option("--seed", opts.seed, "override config master_seed");
}

subcorr::ExperimentConfig load(const CommonOptions& opts) {
  subcorr::ExperimentConfig config =
      subcorr::parse_config_file(opts.config_path);
  if (opts.trials) {
    if (*opts.trials < 2) {
      throw subcorr::ConfigError("--trials must be >= 2");
    }
    config.trials = *opts.trials;
  }
  if (opts.seed) config.master_seed = *opts.seed;
  return config;
}

int emit(const subcorr::CommandResult& result, const CommonOptions& opts) {
  if (opts.out_path.empty()) {
    std::cout << result.output;
  } else {
    std::ofstream out(opts.out_path, std::ios::binary);
    if (!out) {
      std::cerr << "error: cannot open output file " << opts.out_path << "\n";
      return 1;
    }
    out << result.output;
  }
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subspace correction experiments"};
  app.require_subcommand(1);

  CommonOptions run_opts, verify_opts, spectrum_opts;
  CLI::App* run = app.add_subcommand("run", "run an algorithm, emit CSV");
  add_common(run, run_opts);
  CLI::App* verify =
      app.add_subcommand("verify", "check the convergence identities");
  add_common(verify, verify_opts);
  CLI::App* spectrum =
      app.add_subcommand("spectrum", "print the spectrum of BaA and bounds");
  add_common(spectrum, spectrum_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return emit(subcorr::cmd_run(load(run_opts)), run_opts);
    }
    if (verify->parsed()) {
      return emit(subcorr::cmd_verify(load(verify_opts)), verify_opts);
    }
    return emit(subcorr::cmd_spectrum(load(spectrum_opts)), spectrum_opts);
  } catch (const subcorr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const subcorr::BudgetError& e) {
    std::cerr << "budget exceeded: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
