#include "wdrkf/convergence.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include "wdrkf/errors.hpp"

namespace wdrkf {

namespace {

constexpr double kPhiSlack = 1e-8;
constexpr double kPhiShrink = 0.9;
constexpr double kPhiUnderflow = 1e-12;

Matrix psd_sqrt(const Matrix& m) { return sqrtm_psd(PsdMatrix(m)).mat(); }

// (I + H^T (D D^T)^{-1} H)^{-1}
Matrix nominal_q(const DownsampledModel& dm) {
  const auto k = dm.l.rows();
  const Matrix dd_inv = spd_inverse(dm.d * dm.d.transpose());
  return spd_inverse(Matrix::Identity(k, k) + dm.h.transpose() * dd_inv * dm.h);
}

}  // namespace

std::pair<PsdMatrix, LeastFavorable> dr_riccati_step(const PsdMatrix& prior,
                                                     const NominalModel& model, double theta_x,
                                                     double theta_v, const DrmmseOptions& opts) {
  LeastFavorable lf = solve_drmmse(GelbrichBall(prior, theta_x),
                                   GelbrichBall(model.sigma_v, theta_v), model.c, opts);
  const Matrix& c = model.c;
  const Matrix info =
      spd_inverse(lf.sigma_x_prior.mat()) + c.transpose() * spd_inverse(lf.sigma_v.mat()) * c;
  PsdMatrix next(model.a * spd_inverse(info) * model.a.transpose() + model.sigma_w.mat());
  return {std::move(next), std::move(lf)};
}

SymMatrix phi_t(const PsdMatrix& prior_next, const LeastFavorable& lf_next,
                const LeastFavorable& lf_now, const PsdMatrix& sigma_v, const Matrix& c) {
  const Matrix noise_term = spd_inverse(sigma_v.mat()) - spd_inverse(lf_now.sigma_v.mat());
  return SymMatrix(spd_inverse(prior_next.mat()) - spd_inverse(lf_next.sigma_x_prior.mat()) +
                   c.transpose() * noise_term * c);
}

DownsampledModel build_downsampled(const NominalModel& model, int n) {
  if (n < 1) throw std::invalid_argument("build_downsampled: block length must be >= 1");
  const auto nx = model.nx();
  const auto ny = model.ny();
  const Matrix g = psd_sqrt(model.sigma_w.mat());
  const Matrix sv_half = psd_sqrt(model.sigma_v.mat());

  // powers[k] = A^k
  std::vector<Matrix> powers(static_cast<std::size_t>(n) + 1);
  powers[0] = Matrix::Identity(nx, nx);
  for (int k = 1; k <= n; ++k) powers[k] = model.a * powers[k - 1];

  DownsampledModel dm;
  dm.n = n;
  dm.a_pow_n = powers[n];
  dm.r.resize(nx, n * nx);
  dm.o.resize(n * ny, nx);
  dm.o_r.resize(n * nx, nx);
  dm.d = Matrix::Zero(n * ny, n * ny);
  dm.l = Matrix::Zero(n * nx, n * nx);
  for (int j = 0; j < n; ++j) {
    dm.r.middleCols(j * nx, nx) = powers[j] * g;
    dm.o.middleRows(j * ny, ny) = model.c * powers[n - 1 - j];
    dm.o_r.middleRows(j * nx, nx) = powers[n - 1 - j];
    dm.d.block(j * ny, j * ny, ny, ny) = sv_half;
  }
  // 0-based blocks: [L]_{ij} = A^{j-i-1} G for j > i.
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      dm.l.block(i * nx, j * nx, nx, nx) = powers[j - i - 1] * g;
    }
  }
  Matrix blk_c = Matrix::Zero(n * ny, n * nx);
  for (int i = 0; i < n; ++i) blk_c.block(i * ny, i * nx, ny, nx) = model.c;
  dm.h = blk_c * dm.l;
  return dm;
}

double phi_tilde(const DownsampledModel& dm) {
  if (dm.l.norm() == 0.0) return std::numeric_limits<double>::infinity();
  const double lmax = lambda_max(dm.l * nominal_q(dm) * dm.l.transpose());
  if (!(lmax > 0.0)) return std::numeric_limits<double>::infinity();
  return 1.0 / lmax;
}

DownsampledGramians omega_and_w(const DownsampledModel& dm, const SymMatrix& phi_bar) {
  const auto k = dm.l.rows();
  if (phi_bar.dim() != k) {
    throw DimensionError("omega_and_w: perturbation must be N n_x square");
  }
  const Matrix& phi = phi_bar.mat();
  const double lmin = lambda_min(phi);
  if (lmin < -eps_psd(phi)) {
    throw InfeasiblePhiError("omega_and_w: perturbation is not positive semidefinite (lambda_min = " +
                             std::to_string(lmin) + ")");
  }
  const Matrix eye = Matrix::Identity(k, k);
  const Matrix q0 = nominal_q(dm);
  const Matrix phi_half = psd_sqrt(phi);

  // S^{-1} = (L Q0 L^T - Phi^{-1})^{-1} = -Phi^{1/2} (I - Phi^{1/2} L Q0 L^T Phi^{1/2})^{-1} Phi^{1/2},
  // which stays finite as Phi -> 0.
  const Matrix inner = symmetrize(eye - phi_half * dm.l * q0 * dm.l.transpose() * phi_half);
  Eigen::LLT<Matrix> inner_llt(inner);
  if (inner_llt.info() != Eigen::Success) {
    throw InfeasiblePhiError("omega_and_w: perturbation violates Phi < phi_tilde I");
  }
  const Matrix s_inv = -phi_half * inner_llt.solve(phi_half);

  const Matrix p_inv = spd_inverse(dm.d * dm.d.transpose() + dm.h * dm.h.transpose());
  const Matrix j = dm.o_r - dm.l * dm.h.transpose() * p_inv * dm.o;
  const Matrix omega_n = dm.o.transpose() * p_inv * dm.o;
  const Matrix omega = omega_n + j.transpose() * s_inv * j;

  const Matrix q_inv = spd_inverse(q0) - dm.l.transpose() * phi * dm.l;
  Eigen::LLT<Matrix> q_llt(symmetrize(q_inv));
  if (q_llt.info() != Eigen::Success) {
    throw InfeasiblePhiError("omega_and_w: Q_Phi is not positive definite");
  }
  const Matrix q_phi = q_llt.solve(eye);
  const Matrix w = dm.r * q_phi * dm.r.transpose();

  const Matrix alpha =
      dm.a_pow_n - dm.r * (dm.h.transpose() * p_inv * dm.o + q0 * dm.l.transpose() * s_inv * j);
  return {SymMatrix(omega), SymMatrix(w), alpha};
}

PsdMatrix downsampled_riccati(const DownsampledGramians& g, const PsdMatrix& sigma) {
  const Matrix inner = spd_inverse(sigma.mat()) + g.omega.mat();
  Eigen::LLT<Matrix> llt(symmetrize(inner));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("downsampled_riccati: Sigma^{-1} + Omega is not positive definite");
  }
  return PsdMatrix(g.alpha * llt.solve(g.alpha.transpose()) + g.w.mat());
}

double find_phi(const DownsampledModel& dm, const PsdMatrix& sigma_bar_q) {
  const double tilde = phi_tilde(dm);
  if (!(tilde > 0.0)) throw CertificationError("find_phi: phi_tilde is not positive");
  const double lam = lambda_max(sigma_bar_q.mat());
  const auto k = dm.l.rows();
  const Matrix eye = Matrix::Identity(k, k);

  auto accepted = [&](double phi) {
    if (!(phi * lam < 1.0)) return false;
    try {
      const DownsampledGramians g = omega_and_w(dm, SymMatrix(phi * eye));
      return lambda_min(g.omega.mat()) > eps_psd(g.omega.mat());
    } catch (const InfeasiblePhiError&) {
      return false;
    }
  };

  const double bound = std::min(tilde, 1.0 / lam);
  double phi = 0.999 * bound;
  double rejected = std::numeric_limits<double>::quiet_NaN();
  while (!accepted(phi)) {
    rejected = phi;
    phi *= kPhiShrink;
    if (phi < kPhiUnderflow) {
      std::ostringstream msg;
      msg << "find_phi: no admissible phi above " << kPhiUnderflow;
      throw CertificationError(msg.str());
    }
  }
  if (std::isnan(rejected)) return phi;

  // Largest accepted value between the last rejection and the first acceptance.
  double lo = phi;
  double hi = rejected;
  while (hi - lo > 1e-7 * lo) {
    const double mid = 0.5 * (lo + hi);
    if (accepted(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double theta_max_formula(const Matrix& m, double phi) {
  const double tr = m.trace();
  const double lam = lambda_max(m);
  if (!(phi * lam < 1.0)) {
    throw CertificationError("theta_max: phi * lambda_max(Sigma_bar) must be < 1");
  }
  return std::sqrt(tr / (1.0 - phi * lam)) - std::sqrt(tr);
}

ContractionCertificate theta_max(const NominalModel& model, int q, int n) {
  if (q <= 0) throw std::invalid_argument("theta_max: q must be positive");
  if (n < model.nx()) throw std::invalid_argument("theta_max: block length N must be >= n_x");
  const CtrbObsv co = check_ctrb_obsv(model.a, model.c, model.sigma_w);
  if (!co.controllable || !co.observable) {
    std::string which;
    if (!co.controllable) which += "(A, Sigma_w^{1/2}) is not controllable";
    if (!co.observable) which += std::string(which.empty() ? "" : "; ") + "(A, C) is not observable";
    throw AssumptionError("theta_max: " + which, co.controllable, co.observable);
  }

  PsdMatrix sigma_bar = model.sigma_w;
  for (int k = 0; k < q; ++k) {
    sigma_bar = riccati_step(sigma_bar, model.a, model.c, model.sigma_w, model.sigma_v);
  }
  const DownsampledModel dm = build_downsampled(model, n);
  const double tilde = phi_tilde(dm);
  const double phi = find_phi(dm, sigma_bar);
  const double theta = theta_max_formula(sigma_bar.mat(), phi);
  return ContractionCertificate{n, q, tilde, phi, std::move(sigma_bar), std::max(theta, 0.0)};
}

bool certify_run(const std::vector<SymMatrix>& phis, double phi, int n, int q) {
  if (n < 1 || q < 0) throw std::invalid_argument("certify_run: need N >= 1 and q >= 0");
  for (std::size_t t = static_cast<std::size_t>(q); t < phis.size(); ++t) {
    const Matrix& m = phis[t].mat();
    if (lambda_min(m) < -kPhiSlack || lambda_max(m) > phi + kPhiSlack) return false;
  }
  return true;
}

}  // namespace wdrkf
