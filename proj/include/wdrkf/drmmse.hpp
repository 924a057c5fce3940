#pragma once

#include <cstdint>
#include <functional>

#include "wdrkf/errors.hpp"
#include "wdrkf/matops.hpp"

namespace wdrkf {

/// Covariances within Bures distance `radius` of `center`.
struct GelbrichBall {
  GelbrichBall(PsdMatrix center, double radius);

  PsdMatrix center;
  double radius;
};

/// Maximizing pair of the DR-MMSE program with the induced gain.
struct LeastFavorable {
  PsdMatrix sigma_x_prior;  // worst-case prior state covariance
  PsdMatrix sigma_v;        // worst-case measurement noise covariance
  Matrix gain;              // DR Kalman gain
  PsdMatrix sigma_x_post;   // (I - K C) sigma_x_prior
  double objective;         // Tr[sigma_x_post]
  int iterations = 0;
  double gap = 0.0;         // Frank-Wolfe gap at termination
};

struct DrmmseOptions {
  double tol = 1e-8;
  double tol_feas = 1e-6;
  int max_iter = 5000;
  /// Refine the Frank-Wolfe iterate by damped Newton on the dual function of
  /// the gain, phi(K) = max over both balls of the error covariance trace.
  /// The refined pair is kept only if it does not lower the objective.
  bool polish = true;
  /// Called once per accepted iterate with (iteration, objective, gap).
  std::function<void(int, double, double)> observer;
};

/// Thrown when the Frank-Wolfe gap stays above tolerance after max_iter.
class NonConvergedError : public Error {
 public:
  NonConvergedError(const std::string& what, LeastFavorable last)
      : Error(what), last_(std::move(last)) {}
  const LeastFavorable& last_iterate() const noexcept { return last_; }
  double gap() const noexcept { return last_.gap; }

 private:
  LeastFavorable last_;
};

/// Tr[Sx - Sx C^T (C Sx C^T + Sv)^{-1} C Sx].
double mmse_objective(const Matrix& sigma_x, const Matrix& sigma_v, const Matrix& c);

struct DanskinGradient {
  Matrix gx;
  Matrix gv;
};

/// Supergradient of mmse_objective: with K the optimal linear gain,
/// Gx = (I - K C)^T (I - K C) and Gv = K^T K.
DanskinGradient danskin_gradient(const Matrix& sigma_x, const Matrix& sigma_v, const Matrix& c);

/// argmax Tr[D S] over the ball.
Matrix gelbrich_lmo(const Matrix& d, const GelbrichBall& ball, double tol = 1e-10);

/// Solves the DR-MMSE program over ball_x (prior state) x ball_v (noise) by
/// Frank-Wolfe ascent, starting from the ball centers.
LeastFavorable solve_drmmse(const GelbrichBall& ball_x, const GelbrichBall& ball_v, const Matrix& c,
                            const DrmmseOptions& opts = {});

/// Number of solve_drmmse calls made on the calling thread.
std::uint64_t solve_drmmse_call_count() noexcept;

}  // namespace wdrkf
