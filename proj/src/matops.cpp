#include "wdrkf/matops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wdrkf/errors.hpp"

namespace wdrkf {

namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() == 0 || m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": expected a non-empty square matrix, got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

}  // namespace

SymMatrix::SymMatrix(const Matrix& m) {
  require_square(m, "SymMatrix");
  m_ = symmetrize(m);
}

PsdMatrix::PsdMatrix(const Matrix& m, Kind kind) : PsdMatrix(SymMatrix(m), kind) {}

PsdMatrix::PsdMatrix(const SymMatrix& m, Kind kind) : base_(m), kind_(kind) {
  const double lmin = lambda_min(base_.mat());
  const double eps = eps_psd(base_.mat());
  if (kind == Kind::kPd ? !(lmin > eps) : !(lmin >= -eps)) {
    throw NotPsdError(std::string("matrix is not ") +
                          (kind == Kind::kPd ? "positive definite" : "positive semidefinite") +
                          " (lambda_min = " + std::to_string(lmin) + ")",
                      lmin);
  }
}

PsdMatrix PsdMatrix::identity(Eigen::Index n) { return PsdMatrix(Matrix::Identity(n, n), Kind::kPd); }

double eps_psd(const Matrix& m) { return 1e-9 * (1.0 + m.norm()); }

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

SymEig sym_eig(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.mat());
  if (es.info() != Eigen::Success) {
    throw NumericalError("sym_eig: eigensolver did not converge");
  }
  // Eigen returns ascending order.
  SymEig out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  return out;
}

double lambda_min(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(sym), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("lambda_min: eigensolver failed");
  return es.eigenvalues()(0);
}

double lambda_max(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(sym), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("lambda_max: eigensolver failed");
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

Matrix spd_inverse(const Matrix& m) {
  Eigen::LLT<Matrix> llt(symmetrize(m));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("spd_inverse: matrix is singular or not positive definite");
  }
  return symmetrize(llt.solve(Matrix::Identity(m.rows(), m.cols())));
}

PsdMatrix sqrtm_psd(const PsdMatrix& m) {
  const SymEig eig = sym_eig(m.base());
  const double eps = eps_psd(m.mat());
  if (eig.values(eig.values.size() - 1) < -eps) {
    throw NotPsdError("sqrtm_psd: negative eigenvalue", eig.values(eig.values.size() - 1));
  }
  const Vector roots = eig.values.cwiseMax(0.0).cwiseSqrt();
  return PsdMatrix(eig.vectors * roots.asDiagonal() * eig.vectors.transpose());
}

double bures_distance(const PsdMatrix& s1, const PsdMatrix& s2) {
  if (s1.dim() != s2.dim()) throw DimensionError("bures_distance: dimension mismatch");
  // B(S1, S2) = min_U ||S1^{1/2} - S2^{1/2} U||_F over orthogonal U, attained by
  // the polar factor of S1^{1/2} S2^{1/2}. Evaluating the residual norm avoids
  // the cancellation in Tr[S1 + S2 - 2 (...)^{1/2}] near coincident inputs.
  const Matrix r1 = sqrtm_psd(s1).mat();
  const Matrix r2 = sqrtm_psd(s2).mat();
  Eigen::JacobiSVD<Matrix> svd(r1 * r2, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix u = svd.matrixV() * svd.matrixU().transpose();
  return (r1 - r2 * u).norm();
}

double gelbrich_w2(const Vector& mu1, const PsdMatrix& s1, const Vector& mu2, const PsdMatrix& s2) {
  if (mu1.size() != mu2.size() || mu1.size() != s1.dim() || s1.dim() != s2.dim()) {
    throw DimensionError("gelbrich_w2: dimension mismatch");
  }
  const double b = bures_distance(s1, s2);
  return std::sqrt((mu1 - mu2).squaredNorm() + b * b);
}

PsdMatrix riccati_step(const PsdMatrix& prior, const Matrix& a, const Matrix& c,
                       const PsdMatrix& sigma_w, const PsdMatrix& sigma_v) {
  const auto n = prior.dim();
  if (a.rows() != n || a.cols() != n || c.cols() != n || c.rows() != sigma_v.dim() ||
      sigma_w.dim() != n) {
    throw DimensionError("riccati_step: inconsistent dimensions");
  }
  const Matrix info = spd_inverse(prior) + c.transpose() * spd_inverse(sigma_v) * c;
  const Matrix post = spd_inverse(info);
  return PsdMatrix(a * post * a.transpose() + sigma_w.mat());
}

PsdMatrix dare_fixed_point(const Matrix& a, const Matrix& c, const PsdMatrix& sigma_w,
                           const PsdMatrix& sigma_v, const DareOptions& opts) {
  PsdMatrix sigma = sigma_w;
  double residual = 0.0;
  for (int k = 0; k < opts.max_iter; ++k) {
    PsdMatrix next = riccati_step(sigma, a, c, sigma_w, sigma_v);
    residual = (next.mat() - sigma.mat()).norm();
    const double scale = 1.0 + sigma.mat().norm();
    sigma = std::move(next);
    if (residual <= opts.tol * scale) return sigma;
  }
  throw DivergenceError("dare_fixed_point: no convergence", opts.max_iter, residual);
}

int matrix_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cut = kRankTolerance * s(0);
  return static_cast<int>((s.array() > cut).count());
}

CtrbObsv check_ctrb_obsv(const Matrix& a, const Matrix& c, const PsdMatrix& sigma_w) {
  require_square(a, "check_ctrb_obsv");
  const auto n = a.rows();
  if (c.cols() != n || sigma_w.dim() != n) {
    throw DimensionError("check_ctrb_obsv: inconsistent dimensions");
  }
  const Matrix g = sqrtm_psd(sigma_w).mat();
  Matrix ctrb(n, n * n);
  Matrix obsv(c.rows() * n, n);
  Matrix ak = Matrix::Identity(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    ctrb.middleCols(k * n, n) = ak * g;
    obsv.middleRows(k * c.rows(), c.rows()) = c * ak;
    ak = ak * a;
  }
  return {matrix_rank(ctrb) == n, matrix_rank(obsv) == n};
}

}  // namespace wdrkf
