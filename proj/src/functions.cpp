#include "tnvp/functions.hpp"

#include "tnvp/params.hpp"

namespace tnvp {
namespace {

template <typename T>
void store_into(const T& source, ParameterStore& grads) {
  const ParameterStore g = gather(source);
  if (!g.aligned_with(grads)) throw ShapeError("gradient store does not match the function's parameters");
  for (const auto& slot : g.slots()) grads.assign(slot.name, slot.value);
}

}  // namespace

CouplingDifferentiable::CouplingDifferentiable(std::unique_ptr<CouplingFunction> fn) : fn_(std::move(fn)) {
  if (!fn_) throw ValidationError("CouplingDifferentiable: null function");
}

CouplingDifferentiable::CouplingDifferentiable(const CouplingDifferentiable& other) : fn_(other.fn_->clone()) {}

ParameterStore CouplingDifferentiable::parameters() const { return gather(*fn_); }

Vector CouplingDifferentiable::forward(const ParameterStore& params, const Vector& x) const {
  auto probe = fn_->clone();
  scatter(params, *probe);
  return probe->forward(x, nullptr);
}

Vector CouplingDifferentiable::backward(const ParameterStore& params, const Vector& x, const Vector& seed,
                                        ParameterStore& grads) const {
  auto probe = fn_->clone();
  scatter(params, *probe);
  Activations saved;
  probe->forward(x, &saved);
  auto grad = probe->zeros_like();
  const Matrix dx = probe->backward(x, saved, seed, *grad);
  store_into(*grad, grads);
  return dx.col(0);
}

ParameterStore UnitLogDetDifferentiable::parameters() const { return gather(unit_); }

Vector UnitLogDetDifferentiable::forward(const ParameterStore& params, const Vector& x) const {
  MappingUnit probe = unit_;
  scatter(params, probe);
  return probe.forward_batch(x).log_det;
}

Vector UnitLogDetDifferentiable::backward(const ParameterStore& params, const Vector& x, const Vector& seed,
                                          ParameterStore& grads) const {
  MappingUnit probe = unit_;
  scatter(params, probe);
  MappingUnit::Saved saved;
  probe.forward_batch(x, &saved);
  MappingUnit grad = probe.zeros_like();
  const Matrix dx = probe.backward_batch(saved, Matrix::Zero(x.size(), 1), seed, grad);
  store_into(grad, grads);
  return dx.col(0);
}

}  // namespace tnvp
