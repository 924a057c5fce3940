#include "wdrkf/drmmse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace wdrkf {

namespace {

thread_local std::uint64_t g_solve_calls = 0;

// The FW gap bottoms out around 1e-14 relative through roundoff.
constexpr double kGapFloor = 1e-13;

Matrix innovation_solve(const Matrix& sigma_x, const Matrix& sigma_v, const Matrix& c,
                        const Matrix& rhs) {
  Eigen::LLT<Matrix> llt(symmetrize(c * sigma_x * c.transpose() + sigma_v));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("innovation covariance C Sx C^T + Sv is not positive definite");
  }
  return llt.solve(rhs);
}

Matrix optimal_gain(const Matrix& sigma_x, const Matrix& sigma_v, const Matrix& c) {
  // K = Sx C^T S^{-1}  <=>  K^T = S^{-1} C Sx
  return innovation_solve(sigma_x, sigma_v, c, c * sigma_x).transpose();
}

double directional_derivative(const Matrix& sx, const Matrix& sv, const Matrix& c, const Matrix& dx,
                              const Matrix& dv) {
  const DanskinGradient g = danskin_gradient(sx, sv, c);
  return g.gx.cwiseProduct(dx).sum() + g.gv.cwiseProduct(dv).sum();
}

LeastFavorable assemble(const Matrix& sx, const Matrix& sv, const Matrix& c, int iterations,
                        double gap) {
  const Matrix k = optimal_gain(sx, sv, c);
  const auto n = sx.rows();
  Matrix post = symmetrize((Matrix::Identity(n, n) - k * c) * sx);
  const double objective = post.trace();
  return LeastFavorable{PsdMatrix(sx), PsdMatrix(sv, PsdMatrix::Kind::kPd), k, PsdMatrix(post),
                        objective, iterations, gap};
}

struct Vertices {
  Matrix sx;
  Matrix sv;
};

Vertices lmo_map(const Matrix& sx, const Matrix& sv, const Matrix& c, const GelbrichBall& bx,
                 const GelbrichBall& bv) {
  const DanskinGradient g = danskin_gradient(sx, sv, c);
  return {gelbrich_lmo(g.gx, bx, 1e-14), gelbrich_lmo(g.gv, bv, 1e-14)};
}

// phi(K) = max over both balls of Tr[(I - K C) Sx (I - K C)^T + K Sv K^T]:
// convex in K, minimized at the least-favorable gain.
struct GainDual {
  const Matrix& c;
  const GelbrichBall& bx;
  const GelbrichBall& bv;

  struct Eval {
    double value;
    Vector grad;
    Vertices v;
  };

  Eval operator()(const Vector& kvec) const {
    const auto nx = c.cols();
    const auto ny = c.rows();
    const Eigen::Map<const Matrix> k(kvec.data(), nx, ny);
    const Matrix ikc = Matrix::Identity(nx, nx) - k * c;
    const Matrix dx = symmetrize(ikc.transpose() * ikc);
    const Matrix dv = symmetrize(k.transpose() * k);
    Vertices v{gelbrich_lmo(dx, bx, 1e-14), gelbrich_lmo(dv, bv, 1e-14)};
    const double value = dx.cwiseProduct(v.sx).sum() + dv.cwiseProduct(v.sv).sum();
    Matrix g = 2.0 * (k * v.sv - ikc * v.sx * c.transpose());
    return {value, Eigen::Map<const Vector>(g.data(), g.size()), std::move(v)};
  }
};

// Damped Newton on phi from the gain of (sx, sv); returns the vertex pair at
// the final gain.
std::optional<Vertices> newton_polish(const Matrix& sx, const Matrix& sv, const Matrix& c,
                                      const GelbrichBall& bx, const GelbrichBall& bv) {
  try {
    const GainDual phi{c, bx, bv};
    const Matrix k0 = optimal_gain(sx, sv, c);
    Vector k = Eigen::Map<const Vector>(k0.data(), k0.size());
    GainDual::Eval cur = phi(k);
    for (int it = 0; it < 30; ++it) {
      if (cur.grad.norm() <= 1e-14 * (1.0 + std::abs(cur.value))) break;
      const double h = 1e-6 * (1.0 + k.cwiseAbs().maxCoeff());
      Matrix hess(k.size(), k.size());
      for (Eigen::Index p = 0; p < k.size(); ++p) {
        Vector kp = k;
        Vector km = k;
        kp(p) += h;
        km(p) -= h;
        hess.col(p) = (phi(kp).grad - phi(km).grad) / (2.0 * h);
      }
      hess = symmetrize(hess);
      Eigen::LDLT<Matrix> ldlt(hess);
      Vector dir = ldlt.solve(-cur.grad);
      if (ldlt.info() != Eigen::Success || !dir.allFinite() || dir.dot(cur.grad) >= 0.0) {
        dir = -cur.grad;
      }
      double t = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
        GainDual::Eval next = phi(k + t * dir);
        if (next.value <= cur.value + 1e-4 * t * cur.grad.dot(dir)) {
          k += t * dir;
          cur = std::move(next);
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    return cur.v;
  } catch (const Error&) {
    return std::nullopt;
  }
}

struct Polished {
  Matrix sx;
  Matrix sv;
  double gap;
};

// Polished point when it is feasible, does not lower the objective and has a
// gap within max(gap, gap_cap).
std::optional<Polished> try_polish(const Matrix& sx, const Matrix& sv, const Matrix& c,
                                   const GelbrichBall& bx, const GelbrichBall& bv, double gap,
                                   double gap_cap) {
  auto t = newton_polish(sx, sv, c, bx, bv);
  if (!t) return std::nullopt;
  try {
    if (!(lambda_min(t->sv) > 0.0)) return std::nullopt;
    const double obj_old = mmse_objective(sx, sv, c);
    const double obj_new = mmse_objective(t->sx, t->sv, c);
    const Vertices vt = lmo_map(t->sx, t->sv, c, bx, bv);
    const DanskinGradient g = danskin_gradient(t->sx, t->sv, c);
    const double gap_new =
        g.gx.cwiseProduct(vt.sx - t->sx).sum() + g.gv.cwiseProduct(vt.sv - t->sv).sum();
    if (obj_new >= obj_old - 1e-12 * (1.0 + std::abs(obj_old)) &&
        (gap_cap < 0.0 || gap_new <= std::max(gap, gap_cap))) {
      return Polished{std::move(t->sx), std::move(t->sv), gap_new};
    }
  } catch (const Error&) {
  }
  return std::nullopt;
}

}  // namespace

GelbrichBall::GelbrichBall(PsdMatrix c, double r) : center(std::move(c)), radius(r) {
  if (!(radius >= 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("GelbrichBall: radius must be finite and nonnegative");
  }
}

double mmse_objective(const Matrix& sigma_x, const Matrix& sigma_v, const Matrix& c) {
  const Matrix cs = c * sigma_x;
  const Matrix reduction = cs.transpose() * innovation_solve(sigma_x, sigma_v, c, cs);
  return sigma_x.trace() - reduction.trace();
}

DanskinGradient danskin_gradient(const Matrix& sigma_x, const Matrix& sigma_v, const Matrix& c) {
  const Matrix k = optimal_gain(sigma_x, sigma_v, c);
  const auto n = sigma_x.rows();
  const Matrix ikc = Matrix::Identity(n, n) - k * c;
  return {symmetrize(ikc.transpose() * ikc), symmetrize(k.transpose() * k)};
}

Matrix gelbrich_lmo(const Matrix& d, const GelbrichBall& ball, double tol) {
  const Matrix& center = ball.center.mat();
  if (d.rows() != center.rows() || d.cols() != center.cols()) {
    throw DimensionError("gelbrich_lmo: direction and center dimensions differ");
  }
  if (ball.radius == 0.0 || d.norm() == 0.0) return center;

  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(d));
  if (es.info() != Eigen::Success) throw NumericalError("gelbrich_lmo: eigensolver failed");
  const Vector& w = es.eigenvalues();
  const Matrix& v = es.eigenvectors();
  const double lmax = w.maxCoeff();
  const double scale = std::max(w.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const double target = ball.radius * ball.radius;

  auto solve_with = [&](const Matrix& ctr) -> std::pair<bool, Matrix> {
    const Vector weights = (v.transpose() * ctr * v).diagonal().cwiseMax(0.0);
    // Squared Bures distance of Sigma(gamma) from the center, gamma = lmax + delta.
    auto b2 = [&](double delta) {
      const double gamma = lmax + delta;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double ratio = w(i) / (gamma - w(i));
        acc += weights(i) * ratio * ratio;
      }
      return acc;
    };
    double hi = scale;
    for (int k = 0; b2(hi) > target; ++k) {
      if (k > 2000) return {false, Matrix()};
      hi *= 2.0;
    }
    double lo = hi;
    while (b2(lo) <= target) {
      lo *= 0.5;
      if (lo < scale * 1e-300 || lo == 0.0) return {false, Matrix()};
    }
    for (int k = 0; k < 400; ++k) {
      const double mid = std::sqrt(lo * hi);
      if (!(mid > lo && mid < hi)) break;
      if (b2(mid) > target) {
        lo = mid;
      } else {
        hi = mid;
      }
      if (hi / lo - 1.0 < 4 * std::numeric_limits<double>::epsilon()) break;
      if (target - b2(hi) <= tol * target * 1e-2) break;
    }
    const double gamma = lmax + hi;
    const Vector m_diag = (gamma / (gamma - w.array())).matrix();
    const Matrix m = v * m_diag.asDiagonal() * v.transpose();
    return {true, symmetrize(m * ctr * m)};
  };

  auto [ok, sigma] = solve_with(center);
  if (ok) return sigma;
  // The center has no mass along the top eigenvector of D, so the closed-form
  // family never reaches the sphere. A small ridge restores a bracket.
  const double ridge = 1e-10 * (1.0 + center.trace());
  const Matrix regularized = center + ridge * Matrix::Identity(center.rows(), center.cols());
  std::tie(ok, sigma) = solve_with(regularized);
  if (!ok) throw NumericalError("gelbrich_lmo: bisection failed to bracket the constraint");
  return sigma;
}

LeastFavorable solve_drmmse(const GelbrichBall& ball_x, const GelbrichBall& ball_v, const Matrix& c,
                            const DrmmseOptions& opts) {
  ++g_solve_calls;
  const auto nx = ball_x.center.dim();
  const auto ny = ball_v.center.dim();
  if (c.rows() != ny || c.cols() != nx) {
    throw DimensionError("solve_drmmse: C must be n_y x n_x");
  }
  if (!(lambda_min(ball_v.center.mat()) > 0.0)) {
    throw NotPsdError("solve_drmmse: nominal measurement covariance must be positive definite",
                      lambda_min(ball_v.center.mat()));
  }

  const double tol = std::max(opts.tol, kGapFloor);
  Matrix sx = ball_x.center.mat();
  Matrix sv = ball_v.center.mat();
  double gap = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool polished = false;
  double polish_at = std::max(tol, 1e-4);
  double objective = 0.0;
  int k = 0;
  for (; k < opts.max_iter; ++k) {
    objective = mmse_objective(sx, sv, c);
    const DanskinGradient g = danskin_gradient(sx, sv, c);
    const Matrix dx = gelbrich_lmo(g.gx, ball_x) - sx;
    const Matrix dv = gelbrich_lmo(g.gv, ball_v) - sv;
    gap = g.gx.cwiseProduct(dx).sum() + g.gv.cwiseProduct(dv).sum();
    if (opts.observer) opts.observer(k, objective, gap);
    if (gap <= tol * (1.0 + std::abs(objective))) {
      converged = true;
      break;
    }
    // Newton refinement once the iterate is close; retried after every
    // further hundredfold reduction of the gap.
    if (opts.polish && gap <= polish_at * (1.0 + std::abs(objective))) {
      polish_at = gap / (1.0 + std::abs(objective)) * 1e-2;
      const double cap = tol * (1.0 + std::abs(objective));
      if (auto p = try_polish(sx, sv, c, ball_x, ball_v, cap, -1.0)) {
        sx = std::move(p->sx);
        sv = std::move(p->sv);
        gap = p->gap;
        if (gap <= cap) {
          objective = mmse_objective(sx, sv, c);
          converged = polished = true;
          break;
        }
        continue;
      }
    }

    // Exact line search: the objective is concave along the segment, so the
    // maximizer is where the directional derivative changes sign.
    double step = 1.0;
    if (directional_derivative(sx + dx, sv + dv, c, dx, dv) < 0.0) {
      double lo = 0.0;
      double hi = 1.0;
      for (int it = 0; it < 64 && hi - lo > 1e-17; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (directional_derivative(sx + mid * dx, sv + mid * dv, c, dx, dv) > 0.0) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      step = lo;
    }
    if (step == 0.0) {
      // Derivative already negative at the first representable step: the
      // iterate is optimal to working precision.
      converged = gap <= std::max(tol, 1e-10) * (1.0 + std::abs(objective));
      break;
    }
    sx = symmetrize(sx + step * dx);
    sv = symmetrize(sv + step * dv);
  }

  if (converged && opts.polish && !polished) {
    if (auto p = try_polish(sx, sv, c, ball_x, ball_v, gap, tol * (1.0 + std::abs(objective)))) {
      sx = std::move(p->sx);
      sv = std::move(p->sv);
      gap = p->gap;
    }
  }

  LeastFavorable lf = assemble(sx, sv, c, k, gap);
  if (!converged) {
    throw NonConvergedError("solve_drmmse: Frank-Wolfe gap " + std::to_string(gap) +
                                " above tolerance after " + std::to_string(k) + " iterations",
                            std::move(lf));
  }
  if (bures_distance(lf.sigma_x_prior, ball_x.center) > ball_x.radius + opts.tol_feas ||
      bures_distance(lf.sigma_v, ball_v.center) > ball_v.radius + opts.tol_feas) {
    throw NumericalError("solve_drmmse: returned covariances violate the Bures constraints");
  }
  return lf;
}

std::uint64_t solve_drmmse_call_count() noexcept { return g_solve_calls; }

}  // namespace wdrkf
