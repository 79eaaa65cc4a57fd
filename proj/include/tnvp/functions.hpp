#pragma once

#include <memory>

#include "tnvp/coupling.hpp"
#include "tnvp/differentiable.hpp"

namespace tnvp {

/// Exposes a scale/translate function (R^D -> R^D) as a Differentiable.
class CouplingDifferentiable final : public Differentiable {
 public:
  explicit CouplingDifferentiable(std::unique_ptr<CouplingFunction> fn);
  CouplingDifferentiable(const CouplingDifferentiable& other);

  Index input_dim() const override { return fn_->dim(); }
  Index output_dim() const override { return fn_->dim(); }
  ParameterStore parameters() const override;
  Vector forward(const ParameterStore& params, const Vector& x) const override;
  Vector backward(const ParameterStore& params, const Vector& x, const Vector& seed,
                  ParameterStore& grads) const override;

 private:
  std::unique_ptr<CouplingFunction> fn_;
};

/// The log-det of one mapping unit as a scalar function of its input.
class UnitLogDetDifferentiable final : public Differentiable {
 public:
  explicit UnitLogDetDifferentiable(MappingUnit unit) : unit_(std::move(unit)) {}

  Index input_dim() const override { return unit_.dim(); }
  Index output_dim() const override { return 1; }
  ParameterStore parameters() const override;
  Vector forward(const ParameterStore& params, const Vector& x) const override;
  Vector backward(const ParameterStore& params, const Vector& x, const Vector& seed,
                  ParameterStore& grads) const override;

 private:
  MappingUnit unit_;
};

}  // namespace tnvp
