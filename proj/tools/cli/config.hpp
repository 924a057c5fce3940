#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "wdrkf/matops.hpp"
#include "wdrkf/sim.hpp"

namespace wdrkf::cli {

/// Malformed, unknown or out-of-range configuration entries.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelSpec {
  Matrix a;
  Matrix c;
  Matrix sigma_w;
  Matrix sigma_v;
};

struct CertifySpec {
  int q = 20;
  /// Block length; max(n_x, 2) when empty.
  std::optional<int> n;
  double theta_v = 0.0;
};

struct ConvergeSpec {
  /// Certified theta_max when empty.
  std::optional<double> theta_x;
  int steps = 60;
  /// Relative trace difference reported as the first step below it.
  double threshold = 1e-4;
};

struct RandomSystemsSpec {
  int count = 100;
  int nx = 2;
  int ny = 2;
  std::uint64_t seed = 0;
  int q = 20;
  int n = 5;
  int steps = 100;
  /// Pass criterion on the final relative trace difference.
  double threshold = 0.02;
};

struct TrackingSpec {
  TrackingConfig config;
  std::vector<NoiseSetting> noises{NoiseSetting::kGaussian, NoiseSetting::kUQuadratic};
  std::vector<FilterKind> filters{FilterKind::kKfTv, FilterKind::kKfSs,
                                  FilterKind::kRiskSensitive, FilterKind::kDrkfSs};
};

struct OutputSpec {
  std::optional<std::string> path;
  /// Aggregate table of `track`; derived from `path` when empty.
  std::optional<std::string> summary_path;
};

/// Every section is optional; each command checks for the ones it needs.
struct ExperimentConfig {
  std::optional<ModelSpec> model;
  std::optional<CertifySpec> certify;
  std::optional<ConvergeSpec> converge;
  std::optional<RandomSystemsSpec> random_systems;
  std::optional<TrackingSpec> tracking;
  OutputSpec output;
};

/// Strict parse: unknown keys, wrong types and invalid values throw ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace wdrkf::cli
