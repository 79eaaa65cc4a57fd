#include "tnvp/coupling.hpp"

#include <algorithm>
#include <cmath>

namespace tnvp {

namespace fault {
std::atomic<bool> flip_inverse_scale_sign{false};
}

namespace {

void check_scale(const Matrix& s) {
  const double peak = s.size() ? s.cwiseAbs().maxCoeff() : 0.0;
  if (!std::isfinite(peak) || peak > kMaxLogScale)
    throw NumericalError("mapping unit: log-scale magnitude " + std::to_string(peak) + " exceeds " +
                         std::to_string(kMaxLogScale));
}

}  // namespace

BinaryMask::BinaryMask(Vector bits) : bits_(std::move(bits)), ones_(0) {
  for (Index i = 0; i < bits_.size(); ++i) {
    if (bits_[i] != 0.0 && bits_[i] != 1.0) throw ValidationError("binary mask entries must be 0 or 1");
    ones_ += bits_[i] == 1.0 ? 1 : 0;
  }
}

BinaryMask BinaryMask::half(Index dim) {
  Vector bits = Vector::Zero(dim);
  bits.head(dim / 2).setOnes();
  return BinaryMask(std::move(bits));
}

BinaryMask BinaryMask::even_odd(Index dim) {
  Vector bits = Vector::Zero(dim);
  for (Index i = 0; i < dim; i += 2) bits[i] = 1.0;
  return BinaryMask(std::move(bits));
}

BinaryMask BinaryMask::of_style(MaskStyle style, Index dim) {
  return style == MaskStyle::Half ? half(dim) : even_odd(dim);
}

BinaryMask BinaryMask::complement() const { return BinaryMask((1.0 - bits_.array()).matrix()); }

MappingUnit::MappingUnit(BinaryMask mask, std::unique_ptr<CouplingFunction> scale,
                         std::unique_ptr<CouplingFunction> translate)
    : mask_(std::move(mask)), scale_(std::move(scale)), translate_(std::move(translate)) {
  if (!scale_ || !translate_) throw ValidationError("mapping unit needs both S and T");
  if (scale_->dim() != mask_.dim() || translate_->dim() != mask_.dim())
    throw ShapeError("mapping unit: S/T dimension does not match the mask");
}

MappingUnit MappingUnit::residual(BinaryMask mask, Index width, Index blocks, std::mt19937_64& rng) {
  const Index dim = mask.dim();
  auto s = std::make_unique<ResidualNet>(dim, width, blocks, kScaleBound);
  auto t = std::make_unique<ResidualNet>(dim, width, blocks);
  s->initialize(rng);
  t->initialize(rng);
  return MappingUnit(std::move(mask), std::move(s), std::move(t));
}

MappingUnit::MappingUnit(const MappingUnit& other)
    : mask_(other.mask_), scale_(other.scale_->clone()), translate_(other.translate_->clone()) {}

MappingUnit& MappingUnit::operator=(const MappingUnit& other) {
  if (this != &other) {
    mask_ = other.mask_;
    scale_ = other.scale_->clone();
    translate_ = other.translate_->clone();
  }
  return *this;
}

Matrix MappingUnit::free_mask(Index cols) const { return (1.0 - mask_.bits().array()).matrix().replicate(1, cols); }

double MappingUnit::kink_margin(const Matrix& x) const {
  const Matrix masked = mask_.bits().asDiagonal() * x;
  return std::min(scale_->kink_margin(masked), translate_->kink_margin(masked));
}

MappingUnit::BatchOutput MappingUnit::forward_batch(const Matrix& x, Saved* saved) const {
  if (x.rows() != dim())
    throw ShapeError("mapping unit: input has " + std::to_string(x.rows()) + " rows, expected " +
                     std::to_string(dim()));
  const Matrix masked = mask_.bits().asDiagonal() * x;
  Activations s_act, t_act;
  const Matrix s = scale_->forward(masked, saved ? &s_act : nullptr);
  const Matrix t = translate_->forward(masked, saved ? &t_act : nullptr);
  check_scale(s);
  const Matrix exp_s = s.array().exp().matrix();

  BatchOutput out{x, Vector::Zero(x.cols())};
  for (Index j = 0; j < dim(); ++j) {
    if (mask_.passes(j)) continue;
    out.y.row(j) = x.row(j).cwiseProduct(exp_s.row(j)) + t.row(j);
    out.log_det += s.row(j).transpose();
  }
  require_finite(out.y, "mapping unit forward");

  if (saved) {
    saved->x = x;
    saved->masked = masked;
    saved->exp_s = exp_s;
    saved->scale_act = std::move(s_act);
    saved->translate_act = std::move(t_act);
  }
  return out;
}

Matrix MappingUnit::inverse_batch(const Matrix& y) const {
  if (y.rows() != dim())
    throw ShapeError("mapping unit: input has " + std::to_string(y.rows()) + " rows, expected " +
                     std::to_string(dim()));
  const Matrix masked = mask_.bits().asDiagonal() * y;
  const Matrix s = scale_->forward(masked, nullptr);
  const Matrix t = translate_->forward(masked, nullptr);
  check_scale(s);
  const double sign = fault::flip_inverse_scale_sign ? 1.0 : -1.0;

  Matrix x = y;
  for (Index j = 0; j < dim(); ++j) {
    if (mask_.passes(j)) continue;
    x.row(j) = (y.row(j) - t.row(j)).cwiseProduct((sign * s.row(j)).array().exp().matrix());
  }
  require_finite(x, "mapping unit inverse");
  return x;
}

Matrix MappingUnit::backward_batch(const Saved& saved, const Matrix& grad_y, const Vector& grad_log_det,
                                   MappingUnit& grad) const {
  const Index cols = grad_y.cols();
  const Matrix free = free_mask(cols);

  // y_free = x * e^s + t ; log_det = sum_free s
  const Matrix grad_t = grad_y.cwiseProduct(free);
  Matrix grad_s = grad_y.cwiseProduct(saved.x).cwiseProduct(saved.exp_s);
  grad_s.rowwise() += grad_log_det.transpose();
  grad_s = grad_s.cwiseProduct(free);

  Matrix grad_masked = scale_->backward(saved.masked, saved.scale_act, grad_s, *grad.scale_);
  grad_masked += translate_->backward(saved.masked, saved.translate_act, grad_t, *grad.translate_);

  Matrix grad_x(grad_y.rows(), cols);
  for (Index j = 0; j < dim(); ++j) {
    if (mask_.passes(j)) {
      grad_x.row(j) = grad_y.row(j) + grad_masked.row(j);
    } else {
      grad_x.row(j) = grad_y.row(j).cwiseProduct(saved.exp_s.row(j));
    }
  }
  return grad_x;
}

MappingUnit MappingUnit::zeros_like() const {
  return MappingUnit(mask_, scale_->zeros_like(), translate_->zeros_like());
}

void MappingUnit::visit_parameters(const std::string& prefix, const ParameterVisitor& visit) {
  scale_->visit_parameters(prefix + "scale.", visit);
  translate_->visit_parameters(prefix + "translate.", visit);
}

void MappingUnit::visit_parameters(const std::string& prefix, const ConstParameterVisitor& visit) const {
  std::as_const(*scale_).visit_parameters(prefix + "scale.", visit);
  std::as_const(*translate_).visit_parameters(prefix + "translate.", visit);
}

UnitResult unit_forward(const MappingUnit& unit, const Vector& x) {
  require_finite(x, "unit_forward input");
  auto out = unit.forward_batch(x);
  return {out.y.col(0), out.log_det[0]};
}

Vector unit_inverse(const MappingUnit& unit, const Vector& y) {
  require_finite(y, "unit_inverse input");
  return unit.inverse_batch(y).col(0);
}

}  // namespace tnvp
