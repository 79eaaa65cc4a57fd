#include "tnvp/oracle.hpp"

#include <algorithm>

#include "tnvp/differentiable.hpp"

namespace tnvp {

Evaluation eval_with_gradients(const Differentiable& fn, const ParameterStore& params, const Vector& input,
                               const Vector& seed) {
  if (input.size() != fn.input_dim())
    throw ShapeError("eval_with_gradients: input has " + std::to_string(input.size()) + " entries, function expects " +
                     std::to_string(fn.input_dim()));
  if (seed.size() != fn.output_dim())
    throw ShapeError("eval_with_gradients: seed has " + std::to_string(seed.size()) + " entries, output has " +
                     std::to_string(fn.output_dim()));
  if (!fn.parameters().aligned_with(params)) throw ShapeError("eval_with_gradients: parameter layout mismatch");

  Evaluation result;
  result.output = fn.forward(params, input);
  result.record.params = params.zeros_like();
  result.record.input = Tensor::from_vector(fn.backward(params, input, seed, result.record.params));
  return result;
}

Evaluation eval_with_gradients(const Differentiable& fn, const ParameterStore& params, const Vector& input) {
  if (fn.output_dim() != 1)
    throw ShapeError("eval_with_gradients: output has " + std::to_string(fn.output_dim()) +
                     " entries; a non-scalar output needs an explicit seed");
  return eval_with_gradients(fn, params, input, Vector::Ones(1));
}

namespace oracle {

GradientRecord finite_diff_gradient(const ScalarFunction& fn, const ParameterStore& params, double step) {
  if (!(step > 0.0)) throw ValidationError("finite_diff_gradient: step must be positive");
  ParameterStore probe = params;
  const Vector base = params.flatten();
  Vector grad(base.size());
  Vector shifted = base;
  for (Index i = 0; i < base.size(); ++i) {
    shifted[i] = base[i] + step;
    probe.unflatten(shifted);
    const double plus = fn(probe);
    shifted[i] = base[i] - step;
    probe.unflatten(shifted);
    const double minus = fn(probe);
    shifted[i] = base[i];
    grad[i] = (plus - minus) / (2.0 * step);
  }
  GradientRecord record;
  record.params = params.zeros_like();
  record.params.unflatten(grad);
  return record;
}

Matrix numerical_jacobian(const VectorFunction& fn, const Vector& x, double step) {
  if (!(step > 0.0)) throw ValidationError("numerical_jacobian: step must be positive");
  const Index n = x.size();
  Matrix jac(n, n);
  Vector probe = x;
  for (Index j = 0; j < n; ++j) {
    probe[j] = x[j] + step;
    const Vector plus = fn(probe);
    probe[j] = x[j] - step;
    const Vector minus = fn(probe);
    probe[j] = x[j];
    if (plus.size() != n) throw ShapeError("numerical_jacobian: function must map R^D to R^D");
    jac.col(j) = (plus - minus) / (2.0 * step);
  }
  return jac;
}

double log_abs_det(const Matrix& jacobian) {
  const Eigen::PartialPivLU<Matrix> lu(jacobian);
  return lu.matrixLU().diagonal().array().abs().log().sum();
}

GradientComparison compare_gradients(const Vector& analytic, const Vector& numeric, double floor) {
  if (analytic.size() != numeric.size()) throw ShapeError("compare_gradients: length mismatch");
  GradientComparison cmp;
  for (Index i = 0; i < analytic.size(); ++i) {
    const double diff = std::abs(analytic[i] - numeric[i]);
    cmp.max_abs_error = std::max(cmp.max_abs_error, diff);
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    if (scale <= floor) continue;
    ++cmp.checked;
    const double rel = diff / scale;
    if (rel > cmp.max_rel_error) {
      cmp.max_rel_error = rel;
      cmp.worst_index = i;
    }
  }
  return cmp;
}

}  // namespace oracle
}  // namespace tnvp
