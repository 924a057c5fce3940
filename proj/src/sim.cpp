#include "wdrkf/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <variant>

#include "wdrkf/errors.hpp"
#include "wdrkf/filters.hpp"
#include "wdrkf/model.hpp"

namespace wdrkf {

namespace {

constexpr double kLqrTol = 1e-10;
constexpr int kLqrMaxIter = 100000;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Vector standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = dist(rng);
  return z;
}

// F with F F^T = cov; Cholesky when positive definite, eigen-factor otherwise.
Matrix psd_factor(const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const SymEig e = sym_eig(SymMatrix(cov));
  return e.vectors * e.values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

// Eigenvalues raised to 10 eps_psd so the result is strictly positive definite.
Matrix floor_eigenvalues(const Matrix& m, bool& floored) {
  const Matrix s = symmetrize(m);
  const double level = 10.0 * eps_psd(s);
  const SymEig e = sym_eig(SymMatrix(s));
  if (e.values.minCoeff() >= level) return s;
  floored = true;
  return symmetrize(e.vectors * e.values.cwiseMax(level).asDiagonal() * e.vectors.transpose());
}

double log_det_spd(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

struct Smoothed {
  std::vector<Vector> mean;
  std::vector<Matrix> cov;
  std::vector<Matrix> cross;  // cross[t] = Cov(x_{t+1}, x_t | Y)
  double log_likelihood = 0.0;
};

Smoothed kalman_smoother(const Matrix& a, const Matrix& b, const Matrix& c,
                         const std::vector<Vector>& u, const std::vector<Vector>& y,
                         const Matrix& sigma_w, const Matrix& sigma_v) {
  const auto n = a.rows();
  const std::size_t len = y.size();
  const Matrix eye = Matrix::Identity(n, n);
  std::vector<Vector> m_pred(len), m_filt(len);
  std::vector<Matrix> p_pred(len), p_filt(len);
  Smoothed out;

  m_pred[0] = Vector::Zero(n);
  p_pred[0] = eye;
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t t = 0; t < len; ++t) {
    const Matrix s = symmetrize(c * p_pred[t] * c.transpose() + sigma_v);
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) throw NumericalError("em_estimate: singular innovation");
    const Vector innov = y[t] - c * m_pred[t];
    out.log_likelihood -=
        0.5 * (static_cast<double>(y[t].size()) * log_2pi + log_det_spd(llt) +
               innov.dot(llt.solve(innov)));
    const Matrix k = llt.solve(c * p_pred[t]).transpose();
    const Matrix ikc = eye - k * c;
    m_filt[t] = m_pred[t] + k * innov;
    p_filt[t] = symmetrize(ikc * p_pred[t] * ikc.transpose() + k * sigma_v * k.transpose());
    if (t + 1 < len) {
      m_pred[t + 1] = a * m_filt[t] + b * u[t];
      p_pred[t + 1] = symmetrize(a * p_filt[t] * a.transpose() + sigma_w);
    }
  }

  out.mean.resize(len);
  out.cov.resize(len);
  out.cross.resize(len - 1);
  out.mean[len - 1] = m_filt[len - 1];
  out.cov[len - 1] = p_filt[len - 1];
  for (std::size_t t = len - 1; t-- > 0;) {
    Eigen::LLT<Matrix> llt(p_pred[t + 1]);
    if (llt.info() != Eigen::Success) throw NumericalError("em_estimate: singular prediction");
    const Matrix j = llt.solve(a * p_filt[t]).transpose();
    out.mean[t] = m_filt[t] + j * (out.mean[t + 1] - m_pred[t + 1]);
    out.cov[t] = symmetrize(p_filt[t] + j * (out.cov[t + 1] - p_pred[t + 1]) * j.transpose());
    out.cross[t] = out.cov[t + 1] * j.transpose();
  }
  return out;
}

// Online filter behind a uniform update/predict interface.
class AnyFilter {
 public:
  AnyFilter(FilterKind kind, double theta, const NominalModel& model, int ss_max_iter) {
    switch (kind) {
      case FilterKind::kKfTv:
        impl_.emplace<KalmanFilter>(model);
        break;
      case FilterKind::kKfSs:
        impl_.emplace<SteadyGainFilter>(steady_kalman_gain(model), model);
        break;
      case FilterKind::kRiskSensitive:
        impl_.emplace<RiskSensitiveFilter>(model, RiskSensitiveParams(theta, model.nx()));
        break;
      case FilterKind::kDrkfSs: {
        SteadyStateOptions ss_opts;
        ss_opts.max_iter = ss_max_iter;
        impl_.emplace<SteadyGainFilter>(ss_drkf_solve(model, theta, theta, ss_opts).gain, model);
        break;
      }
    }
  }

  Vector update(const Vector& y) {
    return std::visit(
        [&](auto& f) -> Vector {
          if constexpr (std::is_same_v<std::decay_t<decltype(f)>, KalmanFilter>) {
            return f.update(y).mean;
          } else if constexpr (std::is_same_v<std::decay_t<decltype(f)>, std::monostate>) {
            throw std::logic_error("AnyFilter: empty");
          } else {
            return f.update(y);
          }
        },
        impl_);
  }

  void predict(const Vector& shift) {
    std::visit(
        [&](auto& f) {
          if constexpr (!std::is_same_v<std::decay_t<decltype(f)>, std::monostate>) {
            f.predict(shift);
          }
        },
        impl_);
  }

 private:
  std::variant<std::monostate, KalmanFilter, SteadyGainFilter, RiskSensitiveFilter> impl_;
};

RunMetrics failed_run(std::string why) {
  RunMetrics m;
  m.lqr_cost = kNan;
  m.avg_mse = kNan;
  m.failed = true;
  m.failure = std::move(why);
  return m;
}

}  // namespace

// --- noise -------------------------------------------------------------------

NoiseSpec NoiseSpec::gaussian(Vector mean, const Matrix& cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw DimensionError("NoiseSpec::gaussian: covariance must match the mean dimension");
  }
  const PsdMatrix checked(cov);
  NoiseSpec s;
  s.kind_ = Kind::kGaussian;
  s.mean_ = std::move(mean);
  s.factor_ = psd_factor(checked.mat());
  return s;
}

NoiseSpec NoiseSpec::u_quadratic(Vector lo, Vector hi) {
  if (lo.size() != hi.size()) throw DimensionError("NoiseSpec::u_quadratic: bound sizes differ");
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!(lo(i) < hi(i))) throw std::invalid_argument("NoiseSpec::u_quadratic: need lo < hi");
  }
  NoiseSpec s;
  s.kind_ = Kind::kUQuadratic;
  s.mean_ = 0.5 * (lo + hi);
  s.lo_ = std::move(lo);
  s.hi_ = std::move(hi);
  return s;
}

Matrix NoiseSpec::covariance() const {
  if (kind_ == Kind::kGaussian) return factor_ * factor_.transpose();
  const Vector width = hi_ - lo_;
  return (3.0 / 20.0 * width.array().square()).matrix().asDiagonal();
}

Rng make_stream(std::uint64_t master_seed, std::uint64_t run_index, Stream stream) {
  const std::uint64_t key =
      splitmix64(master_seed ^ splitmix64(run_index ^ splitmix64(static_cast<std::uint64_t>(stream))));
  return Rng(key);
}

double u_quadratic_quantile(double u, double lo, double hi) {
  const double beta = 0.5 * (lo + hi);
  const double alpha = 12.0 / std::pow(hi - lo, 3);
  const double x = beta + std::cbrt(3.0 * u / alpha - std::pow(beta - lo, 3));
  return std::clamp(x, lo, hi);
}

Vector sample_noise(const NoiseSpec& spec, Rng& rng) {
  if (spec.kind() == NoiseSpec::Kind::kGaussian) {
    return spec.mean() + spec.factor() * standard_normal(spec.factor().cols(), rng);
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector x(spec.dim());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x(i) = u_quadratic_quantile(unif(rng), spec.lo()(i), spec.hi()(i));
  }
  return x;
}

// --- systems -----------------------------------------------------------------

ControlledSystem::ControlledSystem(Matrix a_, Matrix b_, Matrix c_, NoiseSpec process_,
                                   NoiseSpec meas_, NoiseSpec init_)
    : a(std::move(a_)),
      b(std::move(b_)),
      c(std::move(c_)),
      process(std::move(process_)),
      meas(std::move(meas_)),
      init(std::move(init_)) {
  const auto n = a.rows();
  if (a.cols() != n || b.rows() != n || c.cols() != n || process.dim() != n || init.dim() != n ||
      meas.dim() != c.rows()) {
    throw DimensionError("ControlledSystem: inconsistent dimensions");
  }
}

std::string_view to_string(NoiseSetting s) {
  return s == NoiseSetting::kGaussian ? "gaussian" : "u_quadratic";
}

std::optional<NoiseSetting> parse_noise_setting(std::string_view s) {
  if (s == "gaussian") return NoiseSetting::kGaussian;
  if (s == "u_quadratic") return NoiseSetting::kUQuadratic;
  return std::nullopt;
}

ControlledSystem tracking_system(double dt, NoiseSetting setting) {
  Matrix a{{1, dt, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, dt}, {0, 0, 0, 1}};
  Matrix b{{0.5 * dt * dt, 0}, {dt, 0}, {0, 0.5 * dt * dt}, {0, dt}};
  Matrix c{{1, 0, 0, 0}, {0, 0, 1, 0}};
  auto noise = [setting](Eigen::Index n) {
    if (setting == NoiseSetting::kGaussian) {
      return NoiseSpec::gaussian(Vector::Zero(n), 0.01 * Matrix::Identity(n, n));
    }
    return NoiseSpec::u_quadratic(Vector::Constant(n, -0.1), Vector::Constant(n, 0.1));
  };
  return ControlledSystem(std::move(a), std::move(b), std::move(c), noise(4), noise(2), noise(4));
}

void TrackingConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("tracking config: dt must be positive");
  if (horizon <= 0) throw std::invalid_argument("tracking config: horizon must be positive");
  if (runs <= 0) throw std::invalid_argument("tracking config: runs must be positive");
  if (em_iters < 0) throw std::invalid_argument("tracking config: em_iters must be >= 0");
  if (ss_max_iter <= 0) throw std::invalid_argument("tracking config: ss_max_iter must be positive");
  if (q_lqr.rows() != q_lqr.cols()) throw DimensionError("tracking config: Q must be square");
  if (r_lqr.rows() != r_lqr.cols()) throw DimensionError("tracking config: R must be square");
  static_cast<void>(PsdMatrix(q_lqr));
  static_cast<void>(PsdMatrix(r_lqr, PsdMatrix::Kind::kPd));
  if (theta_grid.empty()) throw std::invalid_argument("tracking config: theta_grid is empty");
  for (double th : theta_grid) {
    if (!(th >= 0.0) || !std::isfinite(th)) {
      throw std::invalid_argument("tracking config: theta values must be finite and >= 0");
    }
  }
  if (calibration_steps() < 3) {
    throw std::invalid_argument("tracking config: calibration needs at least 3 steps");
  }
  if (!reference.empty() && reference.size() < static_cast<std::size_t>(horizon) + 1) {
    throw std::invalid_argument("tracking config: reference needs horizon + 1 states");
  }
}

int TrackingConfig::calibration_steps() const {
  return static_cast<int>(std::lround(nominal_data_seconds / dt));
}

std::string_view to_string(FilterKind k) {
  switch (k) {
    case FilterKind::kKfTv:
      return "kf_tv";
    case FilterKind::kKfSs:
      return "kf_ss";
    case FilterKind::kRiskSensitive:
      return "risk_sensitive";
    case FilterKind::kDrkfSs:
      return "drkf_ss";
  }
  return "unknown";
}

std::optional<FilterKind> parse_filter_kind(std::string_view s) {
  for (FilterKind k : {FilterKind::kKfTv, FilterKind::kKfSs, FilterKind::kRiskSensitive,
                       FilterKind::kDrkfSs}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

bool uses_theta(FilterKind k) {
  return k == FilterKind::kRiskSensitive || k == FilterKind::kDrkfSs;
}

// --- operations --------------------------------------------------------------

Matrix lqr_gain(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r) {
  const auto n = a.rows();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n || r.rows() != b.cols() ||
      r.cols() != b.cols()) {
    throw DimensionError("lqr_gain: inconsistent dimensions");
  }
  static_cast<void>(PsdMatrix(q));
  static_cast<void>(PsdMatrix(r, PsdMatrix::Kind::kPd));

  auto gain = [&](const Matrix& p) {
    Eigen::LLT<Matrix> llt(symmetrize(r + b.transpose() * p * b));
    return Matrix(llt.solve(b.transpose() * p * a));
  };
  Matrix p = q;
  double residual = 0.0;
  for (int k = 0; k < kLqrMaxIter; ++k) {
    const Matrix next = symmetrize(q + a.transpose() * p * a - a.transpose() * p * b * gain(p));
    residual = (next - p).norm();
    p = next;
    if (!std::isfinite(residual)) break;
    if (residual <= kLqrTol * (1.0 + p.norm())) return gain(p);
  }
  throw DivergenceError("lqr_gain: control Riccati iteration did not converge", kLqrMaxIter,
                        residual);
}

EmResult em_estimate(const Matrix& a, const Matrix& b, const Matrix& c,
                     const std::vector<Vector>& inputs, const std::vector<Vector>& measurements,
                     int iters) {
  const std::size_t len = measurements.size();
  if (len < 3) throw std::invalid_argument("em_estimate: need at least 3 measurements");
  if (inputs.size() + 1 < len) throw DimensionError("em_estimate: need T - 1 inputs");
  if (iters < 0) throw std::invalid_argument("em_estimate: iters must be >= 0");
  const auto n = a.rows();
  const auto m = c.rows();
  if (a.cols() != n || b.rows() != n || c.cols() != n) {
    throw DimensionError("em_estimate: inconsistent system dimensions");
  }
  for (const Vector& y : measurements) {
    if (y.size() != m) throw DimensionError("em_estimate: measurement dimension");
  }
  for (std::size_t t = 0; t + 1 < len; ++t) {
    if (inputs[t].size() != b.cols()) throw DimensionError("em_estimate: input dimension");
  }

  // Identity scaled by the average per-coordinate output variance.
  Vector mean = Vector::Zero(m);
  for (const Vector& y : measurements) mean += y;
  mean /= static_cast<double>(len);
  double var = 0.0;
  for (const Vector& y : measurements) var += (y - mean).squaredNorm();
  var /= static_cast<double>((len - 1) * m);
  if (!(var > 0.0) || !std::isfinite(var)) var = 1.0;

  EmResult out{PsdMatrix(var * Matrix::Identity(n, n), PsdMatrix::Kind::kPd),
               PsdMatrix(var * Matrix::Identity(m, m), PsdMatrix::Kind::kPd),
               {},
               false};
  for (int it = 0; it <= iters; ++it) {
    const Smoothed s = kalman_smoother(a, b, c, inputs, measurements, out.sigma_w.mat(),
                                       out.sigma_v.mat());
    out.log_likelihood.push_back(s.log_likelihood);
    if (it == iters) break;

    Matrix sw = Matrix::Zero(n, n);
    for (std::size_t t = 0; t + 1 < len; ++t) {
      const Vector d = s.mean[t + 1] - a * s.mean[t] - b * inputs[t];
      const Matrix ac = a * s.cross[t].transpose();
      sw += d * d.transpose() + s.cov[t + 1] - ac - ac.transpose() +
            a * s.cov[t] * a.transpose();
    }
    sw /= static_cast<double>(len - 1);
    Matrix sv = Matrix::Zero(m, m);
    for (std::size_t t = 0; t < len; ++t) {
      const Vector r = measurements[t] - c * s.mean[t];
      sv += r * r.transpose() + c * s.cov[t] * c.transpose();
    }
    sv /= static_cast<double>(len);

    out.sigma_w = PsdMatrix(floor_eigenvalues(sw, out.floored), PsdMatrix::Kind::kPd);
    out.sigma_v = PsdMatrix(floor_eigenvalues(sv, out.floored), PsdMatrix::Kind::kPd);
  }
  return out;
}

Vector reference_trajectory(int t, const TrackingConfig& cfg) {
  if (t < 0 || t > cfg.horizon) throw std::invalid_argument("reference_trajectory: t out of range");
  if (!cfg.reference.empty()) return cfg.reference[static_cast<std::size_t>(t)];
  const double s = t * cfg.dt * 1.0;
  const double w = std::numbers::pi / 10.0;
  Vector x(4);
  x << s, 1.0, 5.0 * std::sin(w * s), 5.0 * w * std::cos(w * s);
  return x;
}

EmResult calibrate(const ControlledSystem& system, const TrackingConfig& cfg,
                   std::uint64_t run_index) {
  const int len = cfg.calibration_steps();
  Rng rng = make_stream(cfg.master_seed, run_index, Stream::kCalib);
  std::vector<Vector> ys;
  std::vector<Vector> us;
  Vector x = sample_noise(system.init, rng);
  for (int t = 0; t < len; ++t) {
    ys.push_back(system.c * x + sample_noise(system.meas, rng));
    if (t + 1 < len) {
      us.push_back(standard_normal(system.nu(), rng));
      x = system.a * x + system.b * us.back() + sample_noise(system.process, rng);
    }
  }
  return em_estimate(system.a, system.b, system.c, us, ys, cfg.em_iters);
}

RunMetrics simulate_tracking(const ControlledSystem& system, FilterKind kind, double theta,
                             const TrackingConfig& cfg, std::uint64_t run_index,
                             const PsdMatrix& sigma_w_hat, const PsdMatrix& sigma_v_hat) {
  const auto n = system.nx();
  if (cfg.q_lqr.rows() != n || cfg.r_lqr.rows() != system.nu()) {
    throw DimensionError("simulate_tracking: LQR weights do not match the system");
  }
  const Matrix kc = lqr_gain(system.a, system.b, cfg.q_lqr, cfg.r_lqr);
  const NominalModel model(system.a, system.c, Vector::Zero(n), Vector::Zero(system.ny()),
                           sigma_w_hat.mat(), sigma_v_hat.mat(), Vector::Zero(n),
                           sigma_w_hat.mat());

  Rng init_rng = make_stream(cfg.master_seed, run_index, Stream::kInit);
  Rng proc_rng = make_stream(cfg.master_seed, run_index, Stream::kProcess);
  Rng meas_rng = make_stream(cfg.master_seed, run_index, Stream::kMeas);

  RunMetrics out;
  try {
    AnyFilter filter(kind, uses_theta(kind) ? theta : 0.0, model, cfg.ss_max_iter);
    Vector x = sample_noise(system.init, init_rng);
    out.per_step_mse.reserve(static_cast<std::size_t>(cfg.horizon));
    for (int t = 0; t < cfg.horizon; ++t) {
      const Vector y = system.c * x + sample_noise(system.meas, meas_rng);
      const Vector x_est = filter.update(y);
      out.per_step_mse.push_back((x - x_est).squaredNorm());
      const Vector xd = reference_trajectory(t, cfg);
      const Vector u = kc * (xd - x_est);
      const Vector e = xd - x;
      out.lqr_cost += e.dot(cfg.q_lqr * e) + u.dot(cfg.r_lqr * u);
      const Vector shift = system.b * u;
      x = system.a * x + shift + sample_noise(system.process, proc_rng);
      filter.predict(shift);
    }
    const Vector e = reference_trajectory(cfg.horizon, cfg) - x;
    out.lqr_cost += e.dot(cfg.q_lqr * e);
  } catch (const Error& e) {
    return failed_run(e.what());
  }
  double total = 0.0;
  for (double v : out.per_step_mse) total += v;
  out.avg_mse = total / static_cast<double>(cfg.horizon);
  if (!std::isfinite(out.lqr_cost) || !std::isfinite(out.avg_mse)) {
    return failed_run("non-finite metrics");
  }
  return out;
}

RunMetrics simulate_tracking(const ControlledSystem& system, FilterKind kind, double theta,
                             const TrackingConfig& cfg, std::uint64_t run_index) {
  std::optional<EmResult> nominal;
  try {
    nominal = calibrate(system, cfg, run_index);
  } catch (const Error& e) {
    return failed_run(std::string("calibration failed: ") + e.what());
  }
  return simulate_tracking(system, kind, theta, cfg, run_index, nominal->sigma_w,
                           nominal->sigma_v);
}

// --- sweeps ------------------------------------------------------------------

std::vector<TrackingRecord> tracking_sweep(const std::vector<NoiseSetting>& noises,
                                           const std::vector<FilterKind>& filters,
                                           const TrackingConfig& cfg, int threads) {
  cfg.validate();
  struct Cell {
    NoiseSetting noise;
    FilterKind filter;
    std::optional<double> theta;
  };
  std::vector<Cell> cells;
  for (NoiseSetting ns : noises) {
    for (FilterKind fk : filters) {
      if (uses_theta(fk)) {
        for (double th : cfg.theta_grid) cells.push_back({ns, fk, th});
      } else {
        cells.push_back({ns, fk, std::nullopt});
      }
    }
  }
  const auto runs = static_cast<std::size_t>(cfg.runs);
  std::vector<TrackingRecord> records(cells.size() * runs);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t r = 0; r < runs; ++r) {
      records[i * runs + r] =
          TrackingRecord{cells[i].noise, cells[i].filter, cells[i].theta, static_cast<int>(r), {}};
    }
  }

  // One unit = one (noise, run): a single calibration shared by all its cells.
  std::vector<ControlledSystem> systems;
  for (NoiseSetting ns : noises) systems.push_back(tracking_system(cfg.dt, ns));
  const std::size_t units = noises.size() * runs;
  auto work = [&](std::size_t unit) {
    const std::size_t ni = unit / runs;
    const std::size_t r = unit % runs;
    const ControlledSystem& sys = systems[ni];
    std::optional<EmResult> nominal;
    std::string calib_error;
    try {
      nominal = calibrate(sys, cfg, r);
    } catch (const Error& e) {
      calib_error = std::string("calibration failed: ") + e.what();
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].noise != noises[ni]) continue;
      TrackingRecord& rec = records[i * runs + r];
      rec.metrics = nominal ? simulate_tracking(sys, cells[i].filter, cells[i].theta.value_or(0.0),
                                                cfg, r, nominal->sigma_w, nominal->sigma_v)
                            : failed_run(calib_error);
    }
  };

  const auto workers = static_cast<std::size_t>(std::max(threads, 1));
  if (workers == 1) {
    for (std::size_t u = 0; u < units; ++u) work(u);
    return records;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, units); ++w) {
    pool.emplace_back([&] {
      for (std::size_t u = next++; u < units; u = next++) work(u);
    });
  }
  for (std::thread& th : pool) th.join();
  return records;
}

std::vector<TrackingSummary> summarize(const std::vector<TrackingRecord>& records) {
  std::vector<TrackingSummary> out;
  auto same_cell = [](const TrackingSummary& s, const TrackingRecord& r) {
    return s.noise == r.noise && s.filter == r.filter && s.theta == r.theta;
  };
  std::vector<std::vector<const RunMetrics*>> groups;
  for (const TrackingRecord& r : records) {
    if (out.empty() || !same_cell(out.back(), r)) {
      out.push_back(TrackingSummary{r.noise, r.filter, r.theta, 0, 0, kNan, kNan, kNan, kNan});
      groups.emplace_back();
    }
    if (r.metrics.failed) {
      ++out.back().failed;
    } else {
      ++out.back().completed;
      groups.back().push_back(&r.metrics);
    }
  }
  auto mean_std = [](const std::vector<double>& v) -> std::pair<double, double> {
    if (v.empty()) return {kNan, kNan};
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::vector<double> cost, mse;
    for (const RunMetrics* m : groups[i]) {
      cost.push_back(m->lqr_cost);
      mse.push_back(m->avg_mse);
    }
    std::tie(out[i].cost_mean, out[i].cost_std) = mean_std(cost);
    std::tie(out[i].mse_mean, out[i].mse_std) = mean_std(mse);
  }
  return out;
}

}  // namespace wdrkf
