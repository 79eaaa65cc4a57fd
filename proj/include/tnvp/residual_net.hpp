#pragma once

#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "tnvp/params.hpp"
#include "tnvp/tensor.hpp"

namespace tnvp {

/// Intermediate values saved by a forward pass for the matching backward pass.
using Activations = std::vector<Matrix>;

/// Scale or translation function of a mapping unit: R^D -> R^D, evaluated
/// column-wise over a batch. Implement this to plug a new S/T family into
/// MappingUnit.
class CouplingFunction {
 public:
  virtual ~CouplingFunction() = default;

  virtual std::unique_ptr<CouplingFunction> clone() const = 0;
  /// Same structure with every parameter set to zero (gradient accumulator).
  virtual std::unique_ptr<CouplingFunction> zeros_like() const = 0;
  virtual std::string kind() const = 0;
  virtual Index dim() const = 0;

  /// `saved` may be null when no backward pass follows.
  virtual Matrix forward(const Matrix& x, Activations* saved) const = 0;
  /// Accumulates dL/dtheta into `grad` (built by zeros_like) and returns dL/dx.
  virtual Matrix backward(const Matrix& x, const Activations& saved, const Matrix& grad_out,
                          CouplingFunction& grad) const = 0;

  virtual void visit_parameters(const std::string& prefix, const ParameterVisitor& visit) = 0;
  virtual void visit_parameters(const std::string& prefix, const ConstParameterVisitor& visit) const = 0;

  /// Smallest |pre-activation| over every kink of the function on this batch
  /// (infinity for smooth functions). Finite-difference checks need it to be
  /// well above the perturbation size.
  virtual double kink_margin(const Matrix& x) const { (void)x; return std::numeric_limits<double>::infinity(); }
};

/// Residual feedforward network: an input layer to width H, R residual blocks
///   h <- h + W2 relu(W1 h + c1) + c2,
/// then out = W_out relu(h) + b_out. With `output_bound` > 0 the output is
/// squashed to bound * tanh(out / bound).
class ResidualNet final : public CouplingFunction {
 public:
  ResidualNet(Index dim, Index width, Index blocks, double output_bound = 0.0);

  /// Hidden layers uniform in +-1/sqrt(fan_in); final layer zero so the net starts at 0.
  void initialize(std::mt19937_64& rng);

  Index dim() const override { return dim_; }
  Index width() const { return width_; }
  Index blocks() const { return static_cast<Index>(blocks_.size()); }
  double output_bound() const { return bound_; }

  std::unique_ptr<CouplingFunction> clone() const override;
  std::unique_ptr<CouplingFunction> zeros_like() const override;
  std::string kind() const override { return "residual"; }

  Matrix forward(const Matrix& x, Activations* saved) const override;
  Matrix backward(const Matrix& x, const Activations& saved, const Matrix& grad_out,
                  CouplingFunction& grad) const override;

  Vector operator()(const Vector& x) const { return forward(x, nullptr); }
  double kink_margin(const Matrix& x) const override;

  void visit_parameters(const std::string& prefix, const ParameterVisitor& visit) override;
  void visit_parameters(const std::string& prefix, const ConstParameterVisitor& visit) const override;

 private:
  struct Block {
    Matrix w1;
    Vector c1;
    Matrix w2;
    Vector c2;
  };

  Index dim_;
  Index width_;
  double bound_;
  Matrix in_w_;
  Vector in_b_;
  std::vector<Block> blocks_;
  Matrix out_w_;
  Vector out_b_;
};

/// Input-independent function returning a fixed per-coordinate vector.
class ConstantFunction final : public CouplingFunction {
 public:
  explicit ConstantFunction(Vector value) : value_(std::move(value)) {}
  ConstantFunction(Index dim, double value) : value_(Vector::Constant(dim, value)) {}

  Index dim() const override { return value_.size(); }
  const Vector& value() const { return value_; }

  std::unique_ptr<CouplingFunction> clone() const override;
  std::unique_ptr<CouplingFunction> zeros_like() const override;
  std::string kind() const override { return "constant"; }

  Matrix forward(const Matrix& x, Activations* saved) const override;
  Matrix backward(const Matrix& x, const Activations& saved, const Matrix& grad_out,
                  CouplingFunction& grad) const override;

  void visit_parameters(const std::string& prefix, const ParameterVisitor& visit) override;
  void visit_parameters(const std::string& prefix, const ConstParameterVisitor& visit) const override;

 private:
  Vector value_;
};

}  // namespace tnvp
