#include "wdrkf/filters.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "wdrkf/convergence.hpp"
#include "wdrkf/errors.hpp"

namespace wdrkf {

namespace {

Matrix kalman_gain(const Matrix& prior_cov, const Matrix& c, const Matrix& sigma_v) {
  Eigen::LLT<Matrix> llt(symmetrize(c * prior_cov * c.transpose() + sigma_v));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("innovation covariance is not positive definite");
  }
  return llt.solve(c * prior_cov).transpose();
}

Vector shifted(const Vector& base, const Vector& shift) {
  if (shift.size() == 0) return base;
  if (shift.size() != base.size()) throw DimensionError("predict: shift has the wrong dimension");
  return base + shift;
}

// Newton step for r_D(S) - S = 0 over the upper triangle of S with a
// central-difference Jacobian. Empty when the step is unusable.
// Newton step on F(S) = r_D(S) - S over the upper triangle, with a central
// finite-difference Jacobian. Returns the new iterate when the full step stays
// positive definite and reduces ||F||. Damped steps are not tried: far from a
// fixed point they drift into regions where plain iteration cycles.
std::optional<PsdMatrix> newton_step(const PsdMatrix& sigma, const Matrix& mapped,
                                     double residual, const NominalModel& model,
                                     double theta_x, double theta_v,
                                     const DrmmseOptions& inner) {
  const Matrix& s = sigma.mat();
  const auto n = s.rows();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> idx;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) idx.emplace_back(i, j);
  }
  const auto p = static_cast<Eigen::Index>(idx.size());
  auto upper = [&](const Matrix& m) {
    Vector v(p);
    for (Eigen::Index q = 0; q < p; ++q) v(q) = m(idx[q].first, idx[q].second);
    return v;
  };
  const double h = std::min(1e-7 * (1.0 + s.norm()), 1e-2 * lambda_min(s));
  if (!(h > 0.0)) return std::nullopt;
  try {
    Matrix jac(p, p);
    for (Eigen::Index q = 0; q < p; ++q) {
      Matrix e = Matrix::Zero(n, n);
      e(idx[q].first, idx[q].second) = e(idx[q].second, idx[q].first) = 1.0;
      const Matrix fp =
          dr_riccati_step(PsdMatrix(s + h * e), model, theta_x, theta_v, inner).first.mat();
      const Matrix fm =
          dr_riccati_step(PsdMatrix(s - h * e), model, theta_x, theta_v, inner).first.mat();
      jac.col(q) = upper(fp - fm) / (2.0 * h);
    }
    jac -= Matrix::Identity(p, p);
    const Vector delta = jac.colPivHouseholderQr().solve(-upper(mapped - s));
    if (!delta.allFinite()) return std::nullopt;
    Matrix cand = s;
    for (Eigen::Index q = 0; q < p; ++q) {
      cand(idx[q].first, idx[q].second) = cand(idx[q].second, idx[q].first) =
          s(idx[q].first, idx[q].second) + delta(q);
    }
    if (!(lambda_min(cand) > eps_psd(cand))) return std::nullopt;
    PsdMatrix next(cand, PsdMatrix::Kind::kPd);
    const Matrix image = dr_riccati_step(next, model, theta_x, theta_v, inner).first.mat();
    if ((image - cand).norm() < residual) return next;
  } catch (const Error&) {
  }
  return std::nullopt;
}

}  // namespace

GaussianBelief measurement_update(const GaussianBelief& prior, const Vector& y,
                                  const LeastFavorable& lf, const Matrix& c, const Vector& v_hat) {
  if (y.size() != c.rows() || v_hat.size() != c.rows() || lf.gain.rows() != prior.mean.size()) {
    throw DimensionError("measurement_update: inconsistent dimensions");
  }
  Vector mean = prior.mean + lf.gain * (y - c * prior.mean - v_hat);
  return {std::move(mean), lf.sigma_x_post};
}

GaussianBelief predict(const GaussianBelief& post, const NominalModel& model, const Vector& shift) {
  Vector mean = shifted(model.a * post.mean + model.w_hat, shift);
  PsdMatrix cov(model.a * post.cov.mat() * model.a.transpose() + model.sigma_w.mat());
  return {std::move(mean), std::move(cov)};
}

// --- DrKalmanFilter --------------------------------------------------------

DrKalmanFilter::DrKalmanFilter(NominalModel model, double theta_x, double theta_v,
                               DrmmseOptions opts)
    : model_(std::move(model)),
      theta_x_(theta_x),
      theta_v_(theta_v),
      opts_(std::move(opts)),
      prior_{model_.x0_hat, model_.sigma_x0} {
  if (!(theta_x >= 0.0) || !(theta_v >= 0.0)) {
    throw std::invalid_argument("DrKalmanFilter: radii must be nonnegative");
  }
}

GaussianBelief DrKalmanFilter::update(const Vector& y) {
  try {
    last_lf_ = solve_drmmse(GelbrichBall(prior_.cov, theta_x_),
                            GelbrichBall(model_.sigma_v, theta_v_), model_.c, opts_);
  } catch (const Error& e) {
    throw FilterStepError("DR Kalman filter step " + std::to_string(t_) + ": " + e.what(), t_);
  }
  posterior_ = measurement_update(prior_, y, *last_lf_, model_.c, model_.v_hat);
  return *posterior_;
}

void DrKalmanFilter::predict(const Vector& shift) {
  if (!posterior_) throw std::logic_error("DrKalmanFilter::predict called before update");
  prior_ = wdrkf::predict(*posterior_, model_, shift);
  posterior_.reset();
  ++t_;
}

// --- KalmanFilter ------------------------------------------------------------

KalmanFilter::KalmanFilter(NominalModel model)
    : model_(std::move(model)), prior_{model_.x0_hat, model_.sigma_x0} {}

GaussianBelief KalmanFilter::update(const Vector& y) {
  const Matrix& p = prior_.cov.mat();
  const Matrix k = kalman_gain(p, model_.c, model_.sigma_v.mat());
  const auto n = model_.nx();
  Vector mean = prior_.mean + k * (y - model_.c * prior_.mean - model_.v_hat);
  PsdMatrix cov((Matrix::Identity(n, n) - k * model_.c) * p);
  posterior_ = GaussianBelief{std::move(mean), std::move(cov)};
  return *posterior_;
}

void KalmanFilter::predict(const Vector& shift) {
  if (!posterior_) throw std::logic_error("KalmanFilter::predict called before update");
  prior_ = wdrkf::predict(*posterior_, model_, shift);
  posterior_.reset();
}

// --- SteadyGainFilter --------------------------------------------------------

SteadyGainFilter::SteadyGainFilter(Matrix gain, const NominalModel& model)
    : gain_(std::move(gain)),
      a_(model.a),
      c_(model.c),
      w_hat_(model.w_hat),
      v_hat_(model.v_hat),
      prior_mean_(model.x0_hat),
      post_mean_(model.x0_hat) {
  if (gain_.rows() != model.nx() || gain_.cols() != model.ny()) {
    throw DimensionError("SteadyGainFilter: gain must be n_x x n_y");
  }
}

Vector SteadyGainFilter::update(const Vector& y) {
  post_mean_ = prior_mean_ + gain_ * (y - c_ * prior_mean_ - v_hat_);
  return post_mean_;
}

void SteadyGainFilter::predict(const Vector& shift) {
  prior_mean_ = shifted(a_ * post_mean_ + w_hat_, shift);
}

// --- RiskSensitiveFilter -----------------------------------------------------

RiskSensitiveParams::RiskSensitiveParams(double theta_, PsdMatrix q_weight_)
    : theta(theta_), q_weight(std::move(q_weight_)) {
  if (!(theta >= 0.0)) throw std::invalid_argument("RiskSensitiveParams: theta must be >= 0");
}

RiskSensitiveParams::RiskSensitiveParams(double theta_, Eigen::Index n)
    : RiskSensitiveParams(theta_, PsdMatrix::identity(n)) {}

RiskSensitiveFilter::RiskSensitiveFilter(NominalModel model, RiskSensitiveParams params)
    : model_(std::move(model)),
      params_(std::move(params)),
      prior_{model_.x0_hat, model_.sigma_x0},
      post_mean_(model_.x0_hat) {
  if (params_.q_weight.dim() != model_.nx()) {
    throw DimensionError("RiskSensitiveFilter: Q must be n_x x n_x");
  }
}

Vector RiskSensitiveFilter::update(const Vector& y) {
  const Matrix& p = prior_.cov.mat();
  const Matrix& q = params_.q_weight.mat();
  const Matrix& c = model_.c;
  info_ = symmetrize(spd_inverse(p) + c.transpose() * spd_inverse(model_.sigma_v.mat()) * c -
                     params_.theta * q.transpose() * q);
  Eigen::LLT<Matrix> llt(info_);
  if (llt.info() != Eigen::Success) {
    throw RiskParameterError("risk parameter too large: information matrix indefinite at step " +
                                 std::to_string(t_),
                             t_);
  }
  const Matrix k = kalman_gain(p, c, model_.sigma_v.mat());
  post_mean_ = prior_.mean + k * (y - c * prior_.mean - model_.v_hat);
  return post_mean_;
}

void RiskSensitiveFilter::predict(const Vector& shift) {
  const Matrix& a = model_.a;
  PsdMatrix cov(a * spd_inverse(info_) * a.transpose() + model_.sigma_w.mat());
  prior_ = GaussianBelief{shifted(a * post_mean_ + model_.w_hat, shift), std::move(cov)};
  ++t_;
}

// --- batch runs --------------------------------------------------------------

std::vector<DrkfStep> tv_drkf_run(const NominalModel& model, double theta_x, double theta_v,
                                  const std::vector<Vector>& measurements,
                                  const DrmmseOptions& opts) {
  DrKalmanFilter filter(model, theta_x, theta_v, opts);
  std::vector<DrkfStep> steps;
  steps.reserve(measurements.size());
  for (std::size_t t = 0; t < measurements.size(); ++t) {
    GaussianBelief prior = filter.prior();
    GaussianBelief post = filter.update(measurements[t]);
    steps.push_back(DrkfStep{std::move(prior), std::move(post), *filter.last_lf(), std::nullopt});
    if (t > 0) {
      DrkfStep& prev = steps[t - 1];
      prev.phi = phi_t(steps[t].prior.cov, steps[t].lf, prev.lf, model.sigma_v, model.c);
    }
    filter.predict();
  }
  return steps;
}

SteadyStateDrkf ss_drkf_solve(const NominalModel& model, double theta_x, double theta_v,
                              const SteadyStateOptions& opts) {
  if (!(theta_x >= 0.0) || !(theta_v >= 0.0)) {
    throw std::invalid_argument("ss_drkf_solve: radii must be nonnegative");
  }
  if (opts.check_assumptions) {
    const CtrbObsv co = check_ctrb_obsv(model.a, model.c, model.sigma_w);
    if (!co.controllable || !co.observable) {
      throw AssumptionError(std::string("ss_drkf_solve: ") +
                                (!co.controllable ? "(A, Sigma_w^{1/2}) is not controllable"
                                                  : "(A, C) is not observable"),
                            co.controllable, co.observable);
    }
  }

  PsdMatrix sigma = opts.initial ? PsdMatrix(*opts.initial, PsdMatrix::Kind::kPd) : model.sigma_w;
  // Plain iteration contracts slowly for large radii; once it stalls, Newton
  // takes over for as long as it keeps reducing the residual.
  bool newton_active = false;
  double mark_residual = std::numeric_limits<double>::infinity();
  int mark_iter = 0;
  double residual = 0.0;
  for (int k = 0; k < opts.max_iter; ++k) {
    auto [next, lf] = dr_riccati_step(sigma, model, theta_x, theta_v, opts.inner);
    residual = (next.mat() - sigma.mat()).norm();
    if (residual <= opts.tol * (1.0 + sigma.mat().norm())) {
      sigma = std::move(next);
      auto [check, lf_ss] = dr_riccati_step(sigma, model, theta_x, theta_v, opts.inner);
      const double final_residual = (check.mat() - sigma.mat()).norm();
      Matrix gain = lf_ss.gain;
      return SteadyStateDrkf{std::move(sigma), std::move(lf_ss), std::move(gain), k + 1,
                             final_residual, theta_v > 0.0};
    }
    if (residual < 0.5 * mark_residual) {
      mark_residual = residual;
      mark_iter = k;
    }
    if (opts.newton_on_stall && (newton_active || k - mark_iter >= 20)) {
      mark_iter = k;
      if (auto stepped = newton_step(sigma, next.mat(), residual, model, theta_x, theta_v,
                                     opts.inner)) {
        sigma = std::move(*stepped);
        newton_active = true;
        continue;
      }
      newton_active = false;
    }
    sigma = std::move(next);
  }
  std::ostringstream msg;
  msg << "ss_drkf_solve: DR Riccati iteration did not converge (last residual "
      << std::scientific << std::setprecision(3) << residual << ")";
  throw DivergenceError(msg.str(), opts.max_iter, residual);
}

std::vector<Vector> ss_drkf_run(const Matrix& gain, const NominalModel& model,
                                const std::vector<Vector>& measurements) {
  SteadyGainFilter filter(gain, model);
  std::vector<Vector> means;
  means.reserve(measurements.size());
  for (const Vector& y : measurements) {
    means.push_back(filter.update(y));
    filter.predict();
  }
  return means;
}

KalmanRun kalman_run(const NominalModel& model, const std::vector<Vector>& measurements) {
  KalmanFilter filter(model);
  KalmanRun run;
  for (const Vector& y : measurements) {
    run.priors.push_back(filter.prior());
    run.posteriors.push_back(filter.update(y));
    filter.predict();
  }
  return run;
}

Matrix steady_kalman_gain(const NominalModel& model) {
  const PsdMatrix p = dare_fixed_point(model.a, model.c, model.sigma_w, model.sigma_v);
  return kalman_gain(p.mat(), model.c, model.sigma_v.mat());
}

KalmanRun steady_kalman_run(const NominalModel& model, const std::vector<Vector>& measurements) {
  const PsdMatrix p = dare_fixed_point(model.a, model.c, model.sigma_w, model.sigma_v);
  const Matrix k = kalman_gain(p.mat(), model.c, model.sigma_v.mat());
  const auto n = model.nx();
  const PsdMatrix post_cov((Matrix::Identity(n, n) - k * model.c) * p.mat());
  SteadyGainFilter filter(k, model);
  KalmanRun run;
  for (const Vector& y : measurements) {
    run.priors.push_back({filter.prior_mean(), p});
    run.posteriors.push_back({filter.update(y), post_cov});
    filter.predict();
  }
  return run;
}

std::vector<Vector> risk_sensitive_run(const NominalModel& model, const RiskSensitiveParams& params,
                                       const std::vector<Vector>& measurements) {
  RiskSensitiveFilter filter(model, params);
  std::vector<Vector> means;
  means.reserve(measurements.size());
  for (const Vector& y : measurements) {
    means.push_back(filter.update(y));
    filter.predict();
  }
  return means;
}

}  // namespace wdrkf
