#include "tnvp/flow_stack.hpp"

#include <algorithm>
#include <limits>

namespace tnvp {

FlowStack::FlowStack(Index dim) : dim_(dim) {
  if (dim < 1) throw ValidationError("flow stack dimension must be positive");
}

void FlowStack::push_back(MappingUnit unit) {
  if (unit.dim() != dim_)
    throw ShapeError("flow stack of dimension " + std::to_string(dim_) + " cannot take a unit of dimension " +
                     std::to_string(unit.dim()));
  if (unit.mask().degenerate()) throw ValidationError("flow stack units need a mask with 0 < d < D");
  if (!units_.empty() && !(unit.mask() == units_.back().mask().complement()))
    throw ValidationError("consecutive flow stack units must use complementary masks");
  units_.push_back(std::move(unit));
}

FlowStack::BatchOutput FlowStack::forward_batch(const Matrix& x, Saved* saved) const {
  if (x.rows() != dim_)
    throw ShapeError("flow stack: input has " + std::to_string(x.rows()) + " rows, expected " + std::to_string(dim_));
  BatchOutput out{x, Vector::Zero(x.cols())};
  if (saved) saved->units.assign(units_.size(), {});
  for (std::size_t i = 0; i < units_.size(); ++i) {
    try {
      auto step = units_[i].forward_batch(out.z, saved ? &saved->units[i] : nullptr);
      out.z = std::move(step.y);
      out.log_det += step.log_det;
    } catch (const NumericalError& e) {
      throw NumericalError("unit " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

double FlowStack::kink_margin(const Matrix& x) const {
  double margin = std::numeric_limits<double>::infinity();
  Matrix z = x;
  for (const auto& u : units_) {
    margin = std::min(margin, u.kink_margin(z));
    z = u.forward_batch(z).y;
  }
  return margin;
}

Matrix FlowStack::inverse_batch(const Matrix& z) const {
  if (z.rows() != dim_)
    throw ShapeError("flow stack: input has " + std::to_string(z.rows()) + " rows, expected " + std::to_string(dim_));
  Matrix x = z;
  for (std::size_t i = units_.size(); i-- > 0;) {
    try {
      x = units_[i].inverse_batch(x);
    } catch (const NumericalError& e) {
      throw NumericalError("unit " + std::to_string(i) + ": " + e.what());
    }
  }
  return x;
}

Matrix FlowStack::backward_batch(const Saved& saved, const Matrix& grad_z, const Vector& grad_log_det,
                                 FlowStack& grad) const {
  Matrix g = grad_z;
  for (std::size_t i = units_.size(); i-- > 0;)
    g = units_[i].backward_batch(saved.units[i], g, grad_log_det, grad.units_[i]);
  return g;
}

FlowStack FlowStack::zeros_like() const {
  FlowStack out(dim_);
  out.units_.reserve(units_.size());
  for (const auto& u : units_) out.units_.push_back(u.zeros_like());
  return out;
}

void FlowStack::visit_parameters(const std::string& prefix, const ParameterVisitor& visit) {
  for (std::size_t i = 0; i < units_.size(); ++i)
    units_[i].visit_parameters(prefix + "unit" + std::to_string(i) + ".", visit);
}

void FlowStack::visit_parameters(const std::string& prefix, const ConstParameterVisitor& visit) const {
  for (std::size_t i = 0; i < units_.size(); ++i)
    units_[i].visit_parameters(prefix + "unit" + std::to_string(i) + ".", visit);
}

FlowStack make_default_stack(Index dim, const StackOptions& options, std::mt19937_64& rng) {
  if (dim < 2) throw ValidationError("flow stack needs D >= 2, got " + std::to_string(dim));
  if (options.n_units < 1 || options.width < 1 || options.blocks < 0)
    throw ValidationError("flow stack options must be positive");
  FlowStack stack(dim);
  BinaryMask mask = BinaryMask::of_style(options.mask_style, dim);
  for (Index i = 0; i < options.n_units; ++i) {
    stack.push_back(MappingUnit::residual(mask, options.width, options.blocks, rng));
    mask = mask.complement();
  }
  return stack;
}

StackResult stack_forward(const FlowStack& stack, const Vector& x) {
  require_finite(x, "stack_forward input");
  auto out = stack.forward_batch(x);
  return {out.z.col(0), out.log_det[0]};
}

Vector stack_inverse(const FlowStack& stack, const Vector& z) {
  require_finite(z, "stack_inverse input");
  return stack.inverse_batch(z).col(0);
}

}  // namespace tnvp
