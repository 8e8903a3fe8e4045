#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dipper/benchmark.hpp"
#include "dipper/data.hpp"

namespace dipper {

/// Process exit statuses of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInputError = 2,
  kExitConvergenceWarning = 3,
  kExitInternalError = 4,
};

/// Fully resolved settings of one command invocation. Every field has a
/// default, so the JSON echo written next to each output reproduces the run.
struct RunConfig {
  std::vector<std::string> inputs;
  std::string method = "dipper";  // dipper, dipper_gaussian, wald, lrt, firth
  std::string preset = "default";
  std::string parameterization = "mixture";
  double alpha = 0.10;
  std::uint64_t seed = 1;
  int chains = 4;
  int iterations = 3000;
  int warmup = 1000;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  int threads = 1;
  std::string out = "dipper_out";
  TableSchema schema;
  int min_present = 4;
  bool profile_ci = false;
  /// "beta" writes posterior draws of the effects next to Bayesian results.
  std::string draws = "beta";
  bool record_timing = false;
  // null-bench
  int n_splits = 10;
  int null_group = 0;
  // replicate
  std::vector<double> alphas = {0.01, 0.05, 0.10, 0.20};
  std::string draws_a;
  std::string draws_b;
  // simulate (its seed is `seed`)
  SyntheticSpec simulate;

  bool bayesian() const;
  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

/// Ordered JSON with every field expanded.
std::string run_config_to_json(const RunConfig& config);
/// Reads a (possibly partial) JSON config on top of `base`.
RunConfig run_config_from_json(std::string_view json, const RunConfig& base = {});

/// Each command writes its files under `config.out` and returns an ExitCode.
/// Errors in the input map to kExitInputError with a message on `log`.
int cmd_run(const RunConfig& config, std::ostream& log);
int cmd_null_bench(const RunConfig& config, std::ostream& log);
int cmd_replicate(const RunConfig& config, std::ostream& log);
int cmd_simulate(const RunConfig& config, std::ostream& log);

/// Dispatches by subcommand name ("run", "null-bench", "replicate", "simulate").
int run_command(std::string_view name, const RunConfig& config, std::ostream& log);

}  // namespace dipper
