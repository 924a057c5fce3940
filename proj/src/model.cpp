#include "wdrkf/model.hpp"

#include <string>
#include <utility>

#include "wdrkf/errors.hpp"

namespace wdrkf {

NominalModel::NominalModel(Matrix a_, Matrix c_, const Matrix& sigma_w_, const Matrix& sigma_v_)
    : NominalModel(a_, c_, Vector::Zero(a_.rows()), Vector::Zero(c_.rows()), sigma_w_, sigma_v_,
                   Vector::Zero(a_.rows()), sigma_w_) {}

NominalModel::NominalModel(Matrix a_, Matrix c_, Vector w_hat_, Vector v_hat_,
                           const Matrix& sigma_w_, const Matrix& sigma_v_, Vector x0_hat_,
                           const Matrix& sigma_x0_)
    : a(std::move(a_)),
      c(std::move(c_)),
      w_hat(std::move(w_hat_)),
      v_hat(std::move(v_hat_)),
      sigma_w(sigma_w_, PsdMatrix::Kind::kPd),
      sigma_v(sigma_v_, PsdMatrix::Kind::kPd),
      x0_hat(std::move(x0_hat_)),
      sigma_x0(sigma_x0_) {
  const auto n = a.rows();
  const auto m = c.rows();
  if (n == 0 || a.cols() != n) throw DimensionError("NominalModel: A must be square");
  if (m == 0 || c.cols() != n) throw DimensionError("NominalModel: C must be n_y x n_x");
  if (w_hat.size() != n || x0_hat.size() != n || sigma_w.dim() != n || sigma_x0.dim() != n) {
    throw DimensionError("NominalModel: state-dimension mismatch (n_x = " + std::to_string(n) + ")");
  }
  if (v_hat.size() != m || sigma_v.dim() != m) {
    throw DimensionError("NominalModel: measurement-dimension mismatch (n_y = " +
                         std::to_string(m) + ")");
  }
}

}  // namespace wdrkf
