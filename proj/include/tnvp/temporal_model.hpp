#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "tnvp/flow_stack.hpp"

namespace tnvp {

enum class TransitionStructure { Full, Diagonal };

/// Latent transition G(z) = W z + b.
class TemporalTransition {
 public:
  /// W = I, b = 0.
  explicit TemporalTransition(Index dim, TransitionStructure structure = TransitionStructure::Full);
  TemporalTransition(Matrix weight, Vector bias, TransitionStructure structure = TransitionStructure::Full);

  Index dim() const noexcept { return bias_.size(); }
  TransitionStructure structure() const noexcept { return structure_; }
  const Matrix& weight() const noexcept { return weight_; }
  const Vector& bias() const noexcept { return bias_; }
  Matrix& weight() noexcept { return weight_; }
  Vector& bias() noexcept { return bias_; }

  /// Zeroes off-diagonal weights for the diagonal structure; no-op otherwise.
  void enforce_structure();

  Matrix apply_batch(const Matrix& z) const;

  TemporalTransition zeros_like() const;

  void visit_parameters(const std::string& prefix, const ParameterVisitor& visit);
  void visit_parameters(const std::string& prefix, const ConstParameterVisitor& visit) const;

 private:
  Matrix weight_;
  Vector bias_;
  TransitionStructure structure_;
};

/// Architecture of a model built by make_model; also the checkpoint header.
struct ModelSpec {
  Index dim = 2;
  Index n_units = 10;
  Index blocks = 2;
  Index width = 32;
  MaskStyle mask_style = MaskStyle::Half;
  TransitionStructure transition = TransitionStructure::Full;

  StackOptions stack_options() const { return {n_units, blocks, width, mask_style}; }
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Two flows F1 (previous stage), F2 (current stage) and the latent transition G.
/// Parameter order: f1.*, f2.*, transition.*.
class TNVPModel {
 public:
  TNVPModel(FlowStack f1, FlowStack f2, TemporalTransition transition);

  Index dim() const noexcept { return f1_.dim(); }
  const FlowStack& f1() const noexcept { return f1_; }
  const FlowStack& f2() const noexcept { return f2_; }
  const TemporalTransition& transition() const noexcept { return transition_; }
  FlowStack& f1() noexcept { return f1_; }
  FlowStack& f2() noexcept { return f2_; }
  TemporalTransition& transition() noexcept { return transition_; }

  TNVPModel zeros_like() const;

  void visit_parameters(const std::string& prefix, const ParameterVisitor& visit);
  void visit_parameters(const std::string& prefix, const ConstParameterVisitor& visit) const;

 private:
  FlowStack f1_;
  FlowStack f2_;
  TemporalTransition transition_;
};

/// Fresh model: identity flows (zero final layers), W = I, b = 0.
TNVPModel make_model(const ModelSpec& spec, std::uint64_t seed);

/// Model whose flows are empty (the identity map) and whose transition is W = I, b = 0.
TNVPModel make_identity_model(Index dim, TransitionStructure structure = TransitionStructure::Full);

Vector transition_apply(const TemporalTransition& g, const Vector& z_prev);

/// log N(v; 0, I).
template <typename Derived>
double standard_normal_logpdf(const Eigen::MatrixBase<Derived>& v) {
  const double d = static_cast<double>(v.size());
  return -0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * v.squaredNorm();
}

/// Column-wise log N(., 0, I) of a batch.
Vector standard_normal_logpdf_batch(const Matrix& v);

/// log N(z_t; W z_prev + b, I).
double conditional_latent_logpdf(const TNVPModel& m, const Vector& z_t, const Vector& z_prev);

/// log N(z_prev; 0, I) + log N(z_t; W z_prev + b, I).
double joint_latent_logpdf(const TNVPModel& m, const Vector& z_t, const Vector& z_prev);

/// log p(x_t | x_prev): z_prev = F1(x_prev), (z_t, ld) = F2(x_t), latent conditional density plus ld.
double conditional_loglik(const TNVPModel& m, const Vector& x_t, const Vector& x_prev);

/// Column-wise conditional_loglik over paired batches.
Vector conditional_loglik_batch(const TNVPModel& m, const Matrix& x_t, const Matrix& x_prev);

struct Freeze {
  bool f1 = false;
  bool f2 = false;
  bool transition = false;
};

/// Mean negative conditional log-likelihood over the batch. Accumulates its
/// gradient into `grad` (built by zeros_like); frozen parts receive zeros.
double conditional_nll_and_gradient(const TNVPModel& m, const Matrix& x_t, const Matrix& x_prev, TNVPModel& grad,
                                    const Freeze& freeze = {});

/// Source of the latent innovation used during synthesis: all zeros (the
/// conditional mode) or standard normal draws from a seeded stream.
class NoiseSource {
 public:
  static NoiseSource zero() { return NoiseSource(); }
  static NoiseSource seeded(std::uint64_t seed) { return NoiseSource(seed); }

  bool is_zero() const noexcept { return !rng_.has_value(); }
  Vector draw(Index dim);

 private:
  NoiseSource() = default;
  explicit NoiseSource(std::uint64_t seed) : rng_(std::in_place, seed) {}

  std::optional<std::mt19937_64> rng_;
};

/// x_t = F2^{-1}(G(F1(x_prev)) + noise).
Vector synthesize_next(const TNVPModel& m, const Vector& x_prev, NoiseSource& noise);

/// Applies synthesize_next through `models` in order; returns one vector per model.
std::vector<Vector> synthesize_chain(std::span<const TNVPModel> models, const Vector& x0, NoiseSource& noise);

}  // namespace tnvp
