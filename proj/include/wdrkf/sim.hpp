#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "wdrkf/matops.hpp"

namespace wdrkf {

// ---------------------------------------------------------------------------
// Noise and random streams
// ---------------------------------------------------------------------------

/// Gaussian N(mean, cov) or independent per-coordinate U-quadratic on [lo, hi].
class NoiseSpec {
 public:
  enum class Kind { kGaussian, kUQuadratic };

  static NoiseSpec gaussian(Vector mean, const Matrix& cov);
  static NoiseSpec u_quadratic(Vector lo, Vector hi);

  Kind kind() const noexcept { return kind_; }
  Eigen::Index dim() const noexcept { return mean_.size(); }
  /// Mean of the distribution ((lo + hi) / 2 for U-quadratic).
  const Vector& mean() const noexcept { return mean_; }
  /// Covariance (diag(3 (hi - lo)^2 / 20) for U-quadratic).
  Matrix covariance() const;
  const Matrix& factor() const noexcept { return factor_; }
  const Vector& lo() const noexcept { return lo_; }
  const Vector& hi() const noexcept { return hi_; }

 private:
  NoiseSpec() = default;

  Kind kind_ = Kind::kGaussian;
  Vector mean_;
  Matrix factor_;  // F with F F^T = cov
  Vector lo_;
  Vector hi_;
};

using Rng = std::mt19937_64;

enum class Stream : std::uint64_t { kCalib = 0, kProcess = 1, kMeas = 2, kInit = 3 };

/// Independent generator keyed by (master_seed, run_index, stream).
Rng make_stream(std::uint64_t master_seed, std::uint64_t run_index, Stream stream);

Vector sample_noise(const NoiseSpec& spec, Rng& rng);

/// Inverse CDF of the U-quadratic distribution on [lo, hi] at u in [0, 1].
double u_quadratic_quantile(double u, double lo, double hi);

// ---------------------------------------------------------------------------
// Systems and configuration
// ---------------------------------------------------------------------------

struct ControlledSystem {
  ControlledSystem(Matrix a, Matrix b, Matrix c, NoiseSpec process, NoiseSpec meas, NoiseSpec init);

  Eigen::Index nx() const noexcept { return a.rows(); }
  Eigen::Index nu() const noexcept { return b.cols(); }
  Eigen::Index ny() const noexcept { return c.rows(); }

  Matrix a;
  Matrix b;
  Matrix c;
  NoiseSpec process;
  NoiseSpec meas;
  NoiseSpec init;
};

enum class NoiseSetting { kGaussian, kUQuadratic };

std::string_view to_string(NoiseSetting s);
std::optional<NoiseSetting> parse_noise_setting(std::string_view s);

/// Planar double integrator with state [p^x, v^x, p^y, v^y] and position
/// measurements. Gaussian: x0, w ~ N(0, 0.01 I), v ~ N(0, 0.01 I).
/// U-quadratic: every coordinate UQ[-0.1, 0.1].
ControlledSystem tracking_system(double dt, NoiseSetting setting);

struct TrackingConfig {
  double dt = 0.2;
  int horizon = 50;
  Matrix q_lqr = Eigen::Vector4d(10.0, 1.0, 10.0, 1.0).asDiagonal();
  Matrix r_lqr = 0.1 * Matrix::Identity(2, 2);
  std::vector<double> theta_grid{0.1, 0.2, 0.4, 0.5, 1.0, 2.0};
  int runs = 20;
  std::uint64_t master_seed = 0;
  double nominal_data_seconds = 1.0;
  int em_iters = 20;
  /// Iteration cap of the steady-state DR solve; a run that hits it fails.
  int ss_max_iter = 2000;
  /// Sampled reference with horizon + 1 states; the sine arc when empty.
  std::vector<Vector> reference;

  /// Throws std::invalid_argument on violated invariants.
  void validate() const;
  int calibration_steps() const;
};

struct RunMetrics {
  double lqr_cost = 0.0;
  double avg_mse = 0.0;
  std::vector<double> per_step_mse;
  bool failed = false;
  std::string failure;
};

enum class FilterKind { kKfTv, kKfSs, kRiskSensitive, kDrkfSs };

std::string_view to_string(FilterKind k);
std::optional<FilterKind> parse_filter_kind(std::string_view s);
/// Whether theta affects the filter.
bool uses_theta(FilterKind k);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// K_c = (R + B^T P B)^{-1} B^T P A with P from the control DARE.
Matrix lqr_gain(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r);

struct EmResult {
  PsdMatrix sigma_w;
  PsdMatrix sigma_v;
  /// Observed-data log-likelihood before each iteration and after the last.
  std::vector<double> log_likelihood;
  /// Set when an estimate had to be raised to the eigenvalue floor.
  bool floored = false;
};

/// EM estimate of (Sigma_w, Sigma_v) for known (A, B, C) with initial state
/// prior N(0, I). `measurements` holds y_0..y_{T-1}; `inputs` holds at least
/// u_0..u_{T-2}.
EmResult em_estimate(const Matrix& a, const Matrix& b, const Matrix& c,
                     const std::vector<Vector>& inputs, const std::vector<Vector>& measurements,
                     int iters);

/// Desired state at step t (0 <= t <= horizon).
Vector reference_trajectory(int t, const TrackingConfig& cfg);

/// Nominal covariances from a fresh calibration trajectory of this run driven
/// by i.i.d. standard-normal inputs.
EmResult calibrate(const ControlledSystem& system, const TrackingConfig& cfg,
                   std::uint64_t run_index);

/// Closed-loop run with given nominal covariances.
RunMetrics simulate_tracking(const ControlledSystem& system, FilterKind kind, double theta,
                             const TrackingConfig& cfg, std::uint64_t run_index,
                             const PsdMatrix& sigma_w_hat, const PsdMatrix& sigma_v_hat);

/// Closed-loop run with nominal covariances from calibrate().
RunMetrics simulate_tracking(const ControlledSystem& system, FilterKind kind, double theta,
                             const TrackingConfig& cfg, std::uint64_t run_index);

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct TrackingRecord {
  NoiseSetting noise;
  FilterKind filter;
  std::optional<double> theta;  // empty when the filter ignores theta
  int run_index;
  RunMetrics metrics;
};

/// Every (noise, filter, theta, run) combination, in that canonical order.
/// `threads` <= 1 runs serially; results do not depend on it.
std::vector<TrackingRecord> tracking_sweep(const std::vector<NoiseSetting>& noises,
                                           const std::vector<FilterKind>& filters,
                                           const TrackingConfig& cfg, int threads);

struct TrackingSummary {
  NoiseSetting noise;
  FilterKind filter;
  std::optional<double> theta;
  int completed;
  int failed;
  double cost_mean;
  double cost_std;
  double mse_mean;
  double mse_std;
};

/// Mean and sample standard deviation over non-failed runs per
/// (noise, filter, theta), in canonical order.
std::vector<TrackingSummary> summarize(const std::vector<TrackingRecord>& records);

}  // namespace wdrkf
