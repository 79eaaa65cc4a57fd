#pragma once

#include <memory>

#include "tnvp/tensor.hpp"

namespace tnvp {

/// A function R^n -> R^m with parameters and a hand-derived reverse pass.
///
/// Both passes are pure in (params, x): implementations must not keep state
/// between calls.
class Differentiable {
 public:
  virtual ~Differentiable() = default;

  virtual Index input_dim() const = 0;
  virtual Index output_dim() const = 0;

  /// Current parameters; defines the slot layout of gradient records.
  virtual ParameterStore parameters() const = 0;

  virtual Vector forward(const ParameterStore& params, const Vector& x) const = 0;

  /// Returns dL/dx and writes dL/dtheta into `grads` (aligned with parameters()),
  /// where `seed` is dL/dy of a scalar downstream loss L.
  virtual Vector backward(const ParameterStore& params, const Vector& x, const Vector& seed,
                          ParameterStore& grads) const = 0;
};

struct Evaluation {
  Vector output;
  GradientRecord record;
};

/// Forward pass plus reverse-mode gradients of L = <seed, output>.
Evaluation eval_with_gradients(const Differentiable& fn, const ParameterStore& params, const Vector& input,
                               const Vector& seed);

/// Scalar-output shorthand: seeds dL/dy = 1. Throws ShapeError for non-scalar outputs.
Evaluation eval_with_gradients(const Differentiable& fn, const ParameterStore& params, const Vector& input);

}  // namespace tnvp
