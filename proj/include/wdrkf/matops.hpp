#pragma once

#include <Eigen/Dense>

namespace wdrkf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Symmetric matrix. The stored entries are (M + M^T) / 2 of the input, so
/// symmetry holds exactly.
class SymMatrix {
 public:
  explicit SymMatrix(const Matrix& m);

  const Matrix& mat() const noexcept { return m_; }
  operator const Matrix&() const noexcept { return m_; }
  Eigen::Index dim() const noexcept { return m_.rows(); }

 private:
  Matrix m_;
};

/// Symmetric positive semidefinite (or definite) matrix.
///
/// Construction checks the smallest eigenvalue against eps_psd(M); a
/// violation throws NotPsdError. The stored entries are not clamped.
class PsdMatrix {
 public:
  enum class Kind { kPsd, kPd };

  explicit PsdMatrix(const Matrix& m, Kind kind = Kind::kPsd);
  explicit PsdMatrix(const SymMatrix& m, Kind kind = Kind::kPsd);

  static PsdMatrix identity(Eigen::Index n);

  const Matrix& mat() const noexcept { return base_.mat(); }
  operator const Matrix&() const noexcept { return base_.mat(); }
  const SymMatrix& base() const noexcept { return base_; }
  Eigen::Index dim() const noexcept { return base_.dim(); }
  Kind kind() const noexcept { return kind_; }
  double trace() const { return base_.mat().trace(); }

 private:
  SymMatrix base_;
  Kind kind_;
};

/// Acceptance threshold for PSD checks: 1e-9 * (1 + ||M||_F).
double eps_psd(const Matrix& m);

/// Singular values below this fraction of the largest count as zero.
inline constexpr double kRankTolerance = 1e-8;

struct SymEig {
  Vector values;   // descending
  Matrix vectors;  // orthonormal columns, matching `values`
};

SymEig sym_eig(const SymMatrix& m);

double lambda_min(const Matrix& sym);
double lambda_max(const Matrix& sym);

/// Symmetrized copy, (M + M^T) / 2.
Matrix symmetrize(const Matrix& m);

/// Inverse of a symmetric positive definite matrix; throws NumericalError
/// when the Cholesky factorization fails.
Matrix spd_inverse(const Matrix& m);

PsdMatrix sqrtm_psd(const PsdMatrix& m);

/// Bures-Wasserstein distance between two covariance matrices.
double bures_distance(const PsdMatrix& s1, const PsdMatrix& s2);

/// 2-Wasserstein distance between N(mu1, s1) and N(mu2, s2) (Gelbrich formula).
double gelbrich_w2(const Vector& mu1, const PsdMatrix& s1, const Vector& mu2, const PsdMatrix& s2);

/// One prediction-form Riccati step
///   A ((Sigma^-)^{-1} + C^T Sigma_v^{-1} C)^{-1} A^T + Sigma_w.
PsdMatrix riccati_step(const PsdMatrix& prior, const Matrix& a, const Matrix& c,
                       const PsdMatrix& sigma_w, const PsdMatrix& sigma_v);

struct DareOptions {
  double tol = 1e-10;
  int max_iter = 10000;
};

/// Fixed point of riccati_step, iterated from Sigma_w.
PsdMatrix dare_fixed_point(const Matrix& a, const Matrix& c, const PsdMatrix& sigma_w,
                           const PsdMatrix& sigma_v, const DareOptions& opts = {});

/// Numerical rank with the kRankTolerance singular-value threshold.
int matrix_rank(const Matrix& m);

struct CtrbObsv {
  bool controllable;
  bool observable;
};

/// Controllability of (A, Sigma_w^{1/2}) and observability of (A, C).
CtrbObsv check_ctrb_obsv(const Matrix& a, const Matrix& c, const PsdMatrix& sigma_w);

}  // namespace wdrkf
