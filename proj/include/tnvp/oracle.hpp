#pragma once

#include <cmath>
#include <functional>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>

#include "tnvp/tensor.hpp"

// Verification oracles. Nothing here shares code with the model's forward or
// backward passes.

namespace tnvp::oracle {

using ScalarFunction = std::function<double(const ParameterStore&)>;
using VectorFunction = std::function<Vector(const Vector&)>;

/// Central differences (f(p+h) - f(p-h)) / 2h on every parameter coordinate.
GradientRecord finite_diff_gradient(const ScalarFunction& fn, const ParameterStore& params, double step);

/// Column j is the central difference of fn along coordinate j.
Matrix numerical_jacobian(const VectorFunction& fn, const Vector& x, double step);

/// log|det J| through partial-pivot LU.
double log_abs_det(const Matrix& jacobian);

struct GradientComparison {
  double max_rel_error = 0.0;  // over coordinates with magnitude above the floor
  double max_abs_error = 0.0;  // over all coordinates
  Index checked = 0;
  Index worst_index = -1;
};

/// Coordinates where both |a| and |b| are at or below `floor` are excluded from the relative error.
GradientComparison compare_gradients(const Vector& analytic, const Vector& numeric, double floor = 1e-8);

/// Dense multivariate normal log-density via Cholesky of the full covariance.
template <typename X, typename M, typename C>
double gaussian_logpdf(const Eigen::MatrixBase<X>& x, const Eigen::MatrixBase<M>& mean,
                       const Eigen::MatrixBase<C>& cov) {
  const Eigen::LLT<Matrix> llt(cov.derived());
  if (llt.info() != Eigen::Success) throw NumericalError("gaussian_logpdf: covariance is not positive definite");
  const Vector diff = x - mean;
  const Vector solved = llt.matrixL().solve(diff);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double n = static_cast<double>(x.size());
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) + log_det + solved.squaredNorm());
}

}  // namespace tnvp::oracle
