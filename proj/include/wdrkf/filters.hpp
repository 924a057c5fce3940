#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "wdrkf/drmmse.hpp"
#include "wdrkf/matops.hpp"
#include "wdrkf/model.hpp"

namespace wdrkf {

/// Measurement update with the least-favorable gain:
/// mean + K (y - C mean - v_hat), covariance lf.sigma_x_post.
GaussianBelief measurement_update(const GaussianBelief& prior, const Vector& y,
                                  const LeastFavorable& lf, const Matrix& c, const Vector& v_hat);

/// Nominal prediction (A mean + w_hat + shift, A P A^T + sigma_w). `shift`
/// carries known inputs such as B u; empty means zero.
GaussianBelief predict(const GaussianBelief& post, const NominalModel& model,
                       const Vector& shift = Vector());

// ---------------------------------------------------------------------------
// Online filters. Each is single-owner: call update(y) then predict(shift) per
// step.
// ---------------------------------------------------------------------------

/// Time-varying DR Kalman filter; one DR-MMSE solve per update.
class DrKalmanFilter {
 public:
  DrKalmanFilter(NominalModel model, double theta_x, double theta_v, DrmmseOptions opts = {});

  GaussianBelief update(const Vector& y);
  void predict(const Vector& shift = Vector());

  const GaussianBelief& prior() const noexcept { return prior_; }
  const std::optional<GaussianBelief>& posterior() const noexcept { return posterior_; }
  const std::optional<LeastFavorable>& last_lf() const noexcept { return last_lf_; }
  std::size_t step() const noexcept { return t_; }

 private:
  NominalModel model_;
  double theta_x_;
  double theta_v_;
  DrmmseOptions opts_;
  GaussianBelief prior_;
  std::optional<GaussianBelief> posterior_;
  std::optional<LeastFavorable> last_lf_;
  std::size_t t_ = 0;
};

/// Standard time-varying Kalman filter.
class KalmanFilter {
 public:
  explicit KalmanFilter(NominalModel model);

  GaussianBelief update(const Vector& y);
  void predict(const Vector& shift = Vector());

  const GaussianBelief& prior() const noexcept { return prior_; }

 private:
  NominalModel model_;
  GaussianBelief prior_;
  std::optional<GaussianBelief> posterior_;
};

/// Constant-gain filter: x = x^- + K (y - C x^- - v_hat), x^- <- A x + w_hat.
/// Serves both the steady-state Kalman and the steady-state DR filter.
class SteadyGainFilter {
 public:
  SteadyGainFilter(Matrix gain, const NominalModel& model);

  Vector update(const Vector& y);
  void predict(const Vector& shift = Vector());

  const Vector& prior_mean() const noexcept { return prior_mean_; }

 private:
  Matrix gain_;
  Matrix a_;
  Matrix c_;
  Vector w_hat_;
  Vector v_hat_;
  Vector prior_mean_;
  Vector post_mean_;
};

struct RiskSensitiveParams {
  RiskSensitiveParams(double theta, PsdMatrix q_weight);
  /// q_weight = I of dimension n.
  RiskSensitiveParams(double theta, Eigen::Index n);

  double theta;
  PsdMatrix q_weight;
};

/// Risk-sensitive filter with Riccati map
/// A((P^-)^{-1} + C^T Sv^{-1} C - theta Q^T Q)^{-1} A^T + Sw.
class RiskSensitiveFilter {
 public:
  RiskSensitiveFilter(NominalModel model, RiskSensitiveParams params);

  /// Throws RiskParameterError when the bracketed information matrix is not
  /// positive definite at this step.
  Vector update(const Vector& y);
  void predict(const Vector& shift = Vector());

  const GaussianBelief& prior() const noexcept { return prior_; }

 private:
  NominalModel model_;
  RiskSensitiveParams params_;
  GaussianBelief prior_;
  Vector post_mean_;
  Matrix info_;
  std::size_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Batch runs over a measurement sequence (no inputs).
// ---------------------------------------------------------------------------

struct DrkfStep {
  GaussianBelief prior;      // pseudo-nominal prior (x^-_t, hat Sigma^-_t)
  GaussianBelief posterior;  // (x_t, Sigma_t)
  LeastFavorable lf;
  /// Perturbation Phi_t; available once step t+1 has been solved, so the last
  /// step leaves it empty.
  std::optional<SymMatrix> phi;
};

std::vector<DrkfStep> tv_drkf_run(const NominalModel& model, double theta_x, double theta_v,
                                  const std::vector<Vector>& measurements,
                                  const DrmmseOptions& opts = {});

struct SteadyStateOptions {
  double tol = 1e-9;
  int max_iter = 10000;
  DrmmseOptions inner = [] {
    DrmmseOptions o;
    o.tol = 1e-10;
    return o;
  }();
  /// Switch to finite-difference Newton on r_D(S) - S when the
  /// residual has not halved over 20 plain iterations. The stopping test is
  /// the plain residual either way.
  bool newton_on_stall = true;
  /// Start of the fixed-point iteration; sigma_w when empty.
  std::optional<Matrix> initial;
  bool check_assumptions = true;
};

struct SteadyStateDrkf {
  PsdMatrix prior_nominal;  // fixed point hat Sigma^-_ss
  LeastFavorable lf;        // least-favorable pair at the fixed point
  Matrix gain;
  int iterations;
  double residual;  // ||r_D(hat Sigma_ss) - hat Sigma_ss||_F
  /// Set when theta_v > 0; the fixed point is then not proven optimal for the
  /// steady-state program.
  bool heuristic;
};

SteadyStateDrkf ss_drkf_solve(const NominalModel& model, double theta_x, double theta_v,
                              const SteadyStateOptions& opts = {});

/// Posterior means of the constant-gain filter.
std::vector<Vector> ss_drkf_run(const Matrix& gain, const NominalModel& model,
                                const std::vector<Vector>& measurements);

struct KalmanRun {
  std::vector<GaussianBelief> priors;
  std::vector<GaussianBelief> posteriors;
};

KalmanRun kalman_run(const NominalModel& model, const std::vector<Vector>& measurements);

/// Gain from the DARE prior covariance.
Matrix steady_kalman_gain(const NominalModel& model);

/// Constant-gain run with the DARE covariances reported at every step.
KalmanRun steady_kalman_run(const NominalModel& model, const std::vector<Vector>& measurements);

std::vector<Vector> risk_sensitive_run(const NominalModel& model, const RiskSensitiveParams& params,
                                       const std::vector<Vector>& measurements);

}  // namespace wdrkf
