#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "wdrkf/convergence.hpp"
#include "wdrkf/model.hpp"

namespace wdrkf::cli {

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kMathError = 2 };

struct CommandOptions {
  std::optional<std::uint64_t> seed;     // overrides every seed in the config
  std::optional<std::string> out;        // overrides output.path
  int threads = 1;                       // worker cap for sweeps; <= 1 is serial
};

/// Where results go: the file named by --out / output.path, else `stdout_sink`.
/// Diagnostics go to `log`.
int cmd_certify(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& stdout_sink,
                std::ostream& log);
int cmd_converge(const ExperimentConfig& cfg, const CommandOptions& opts,
                 std::ostream& stdout_sink, std::ostream& log);
int cmd_track(const ExperimentConfig& cfg, const CommandOptions& opts, std::ostream& stdout_sink,
              std::ostream& log);

NominalModel to_model(const ModelSpec& spec);

/// Default block length max(n_x, 2).
int default_block_length(const NominalModel& model);

/// Random system with controllable (A, Sigma_w^{1/2}) and observable (A, C):
/// A and C have standard-normal entries, each covariance is G G^T + 0.1 I with
/// G ~ N(0, 1/n) entrywise. Redraws until the rank tests pass.
NominalModel random_system(int nx, int ny, std::uint64_t seed, std::uint64_t index);

struct ConvergenceTrace {
  double theta_x;
  double trace_ss;               // Tr of the steady-state posterior covariance
  std::vector<double> trace_tv;  // Tr of the time-varying posterior covariance per step
  std::vector<double> relative_diff;
  std::optional<int> first_below;  // first step with relative_diff < threshold
};

/// Time-varying versus steady-state DR filter at theta_v = 0.
ConvergenceTrace convergence_trace(const NominalModel& model, double theta_x, int steps,
                                   double threshold);

struct RandomSystemResult {
  int index;
  bool failed;
  std::string failure;
  double theta_max;
  double phi;
  double trace_ss;
  double final_relative_diff;
  std::optional<int> first_below;
  bool passed;
};

std::vector<RandomSystemResult> random_systems_study(const RandomSystemsSpec& spec);

/// Worker count from WDRKF_THREADS (0 = serial); hardware concurrency when
/// unset. Throws ConfigError on malformed values.
int threads_from_env();

/// 9 significant digits, locale independent; empty for NaN-free optionals.
std::string format_number(double v);

}  // namespace wdrkf::cli
