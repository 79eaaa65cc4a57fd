#pragma once

#include <atomic>
#include <memory>
#include <random>
#include <utility>

#include "tnvp/residual_net.hpp"
#include "tnvp/tensor.hpp"

namespace tnvp {

enum class MaskStyle { Half, EvenOdd };

/// 0/1 vector selecting the coordinates a mapping unit passes through unchanged.
class BinaryMask {
 public:
  /// Throws ValidationError unless every entry is exactly 0 or 1.
  explicit BinaryMask(Vector bits);

  /// First floor(D/2) entries set.
  static BinaryMask half(Index dim);
  /// Entries 0, 2, 4, ... set.
  static BinaryMask even_odd(Index dim);
  static BinaryMask of_style(MaskStyle style, Index dim);

  const Vector& bits() const noexcept { return bits_; }
  Index dim() const noexcept { return bits_.size(); }
  /// Number of pass-through coordinates.
  Index ones() const noexcept { return ones_; }
  bool passes(Index i) const { return bits_[i] != 0.0; }
  /// All-zero or all-one masks leave nothing (or everything) untouched.
  bool degenerate() const noexcept { return ones_ == 0 || ones_ == dim(); }

  BinaryMask complement() const;

  friend bool operator==(const BinaryMask& a, const BinaryMask& b) { return a.bits_ == b.bits_; }

 private:
  Vector bits_;
  Index ones_;
};

/// |s_j| above this is treated as exp overflow.
inline constexpr double kMaxLogScale = 50.0;

/// Bound applied to the scale network output, s = bound * tanh(raw / bound).
inline constexpr double kScaleBound = 5.0;

/// Affine coupling unit:
///   y = x' + (1 - b) * (x * exp(S(x')) + T(x')),   x' = b * x,
/// with log|det dy/dx| = sum of s_j over the free (b = 0) coordinates.
class MappingUnit {
 public:
  MappingUnit(BinaryMask mask, std::unique_ptr<CouplingFunction> scale, std::unique_ptr<CouplingFunction> translate);

  /// Residual S and T of the given size, S bounded to +-kScaleBound, initialized from `rng`.
  static MappingUnit residual(BinaryMask mask, Index width, Index blocks, std::mt19937_64& rng);

  MappingUnit(const MappingUnit& other);
  MappingUnit& operator=(const MappingUnit& other);
  MappingUnit(MappingUnit&&) noexcept = default;
  MappingUnit& operator=(MappingUnit&&) noexcept = default;

  Index dim() const noexcept { return mask_.dim(); }
  const BinaryMask& mask() const noexcept { return mask_; }
  const CouplingFunction& scale() const { return *scale_; }
  const CouplingFunction& translate() const { return *translate_; }

  struct Saved {
    Matrix x;
    Matrix masked;
    Matrix exp_s;
    Activations scale_act;
    Activations translate_act;
  };

  struct BatchOutput {
    Matrix y;
    Vector log_det;  // one entry per column
  };

  BatchOutput forward_batch(const Matrix& x, Saved* saved = nullptr) const;
  Matrix inverse_batch(const Matrix& y) const;
  /// Smallest kink margin of S and T on the masked batch.
  double kink_margin(const Matrix& x) const;

  /// Reverse pass given dL/dy and dL/dlog_det per column; accumulates into `grad`.
  Matrix backward_batch(const Saved& saved, const Matrix& grad_y, const Vector& grad_log_det,
                        MappingUnit& grad) const;

  MappingUnit zeros_like() const;

  void visit_parameters(const std::string& prefix, const ParameterVisitor& visit);
  void visit_parameters(const std::string& prefix, const ConstParameterVisitor& visit) const;

 private:
  Matrix free_mask(Index cols) const;

  BinaryMask mask_;
  std::unique_ptr<CouplingFunction> scale_;
  std::unique_ptr<CouplingFunction> translate_;
};

struct UnitResult {
  Vector y;
  double log_det;
};

UnitResult unit_forward(const MappingUnit& unit, const Vector& x);
Vector unit_inverse(const MappingUnit& unit, const Vector& y);

namespace fault {

/// Test hook: when set, unit inverses use exp(+s) instead of exp(-s).
extern std::atomic<bool> flip_inverse_scale_sign;

class ScopedInverseSignFlip {
 public:
  ScopedInverseSignFlip() { flip_inverse_scale_sign = true; }
  ~ScopedInverseSignFlip() { flip_inverse_scale_sign = false; }
  ScopedInverseSignFlip(const ScopedInverseSignFlip&) = delete;
  ScopedInverseSignFlip& operator=(const ScopedInverseSignFlip&) = delete;
};

}  // namespace fault
}  // namespace tnvp
