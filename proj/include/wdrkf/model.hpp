#pragma once

#include "wdrkf/matops.hpp"

namespace wdrkf {

/// Linear system x' = A x + w, y = C x + v with stationary Gaussian nominal
/// noise N(w_hat, sigma_w), N(v_hat, sigma_v) and initial prior
/// N(x0_hat, sigma_x0).
struct NominalModel {
  /// Zero means, x0 ~ N(0, sigma_w).
  NominalModel(Matrix a, Matrix c, const Matrix& sigma_w, const Matrix& sigma_v);
  NominalModel(Matrix a, Matrix c, Vector w_hat, Vector v_hat, const Matrix& sigma_w,
               const Matrix& sigma_v, Vector x0_hat, const Matrix& sigma_x0);

  Eigen::Index nx() const noexcept { return a.rows(); }
  Eigen::Index ny() const noexcept { return c.rows(); }

  Matrix a;
  Matrix c;
  Vector w_hat;
  Vector v_hat;
  PsdMatrix sigma_w;  // positive definite
  PsdMatrix sigma_v;  // positive definite
  Vector x0_hat;
  PsdMatrix sigma_x0;
};

struct GaussianBelief {
  Vector mean;
  PsdMatrix cov;
};

}  // namespace wdrkf
