#pragma once

#include <random>
#include <vector>

#include "tnvp/coupling.hpp"

namespace tnvp {

/// Ordered composition of mapping units. Units run in declared order on the
/// forward pass and in reverse order on the inverse pass; the log-determinant
/// is the sum of the unit log-determinants.
class FlowStack {
 public:
  explicit FlowStack(Index dim);

  /// Appends a unit. Rejects degenerate masks and masks that are not the
  /// complement of the previous unit's mask.
  void push_back(MappingUnit unit);

  Index dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return units_.size(); }
  bool empty() const noexcept { return units_.empty(); }
  const MappingUnit& unit(std::size_t i) const { return units_.at(i); }
  const std::vector<MappingUnit>& units() const noexcept { return units_; }

  struct Saved {
    std::vector<MappingUnit::Saved> units;
  };

  struct BatchOutput {
    Matrix z;
    Vector log_det;
  };

  BatchOutput forward_batch(const Matrix& x, Saved* saved = nullptr) const;
  Matrix inverse_batch(const Matrix& z) const;
  /// Smallest kink margin over every unit along the forward pass of `x`.
  double kink_margin(const Matrix& x) const;
  Matrix backward_batch(const Saved& saved, const Matrix& grad_z, const Vector& grad_log_det, FlowStack& grad) const;

  FlowStack zeros_like() const;

  void visit_parameters(const std::string& prefix, const ParameterVisitor& visit);
  void visit_parameters(const std::string& prefix, const ConstParameterVisitor& visit) const;

 private:
  Index dim_;
  std::vector<MappingUnit> units_;
};

struct StackOptions {
  Index n_units = 10;
  Index blocks = 2;
  Index width = 32;
  MaskStyle mask_style = MaskStyle::Half;
};

/// Residual coupling stack with alternating complementary masks, identity at initialization.
FlowStack make_default_stack(Index dim, const StackOptions& options, std::mt19937_64& rng);

struct StackResult {
  Vector z;
  double log_det;
};

StackResult stack_forward(const FlowStack& stack, const Vector& x);
Vector stack_inverse(const FlowStack& stack, const Vector& z);

}  // namespace tnvp
