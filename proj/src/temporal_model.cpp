#include "tnvp/temporal_model.hpp"

namespace tnvp {
namespace {

void require_dim(const Vector& v, Index dim, const char* what) {
  if (v.size() != dim)
    throw ShapeError(std::string(what) + " has length " + std::to_string(v.size()) + ", expected " +
                     std::to_string(dim));
}

}  // namespace

TemporalTransition::TemporalTransition(Index dim, TransitionStructure structure)
    : weight_(Matrix::Identity(dim, dim)), bias_(Vector::Zero(dim)), structure_(structure) {}

TemporalTransition::TemporalTransition(Matrix weight, Vector bias, TransitionStructure structure)
    : weight_(std::move(weight)), bias_(std::move(bias)), structure_(structure) {
  if (weight_.rows() != weight_.cols() || weight_.rows() != bias_.size())
    throw ShapeError("transition: W must be DxD and b length D");
  enforce_structure();
}

void TemporalTransition::enforce_structure() {
  if (structure_ == TransitionStructure::Diagonal) weight_ = Matrix(weight_.diagonal().asDiagonal());
}

Matrix TemporalTransition::apply_batch(const Matrix& z) const {
  if (z.rows() != dim())
    throw ShapeError("transition: input has " + std::to_string(z.rows()) + " rows, expected " + std::to_string(dim()));
  return (weight_ * z).colwise() + bias_;
}

TemporalTransition TemporalTransition::zeros_like() const {
  return TemporalTransition(Matrix::Zero(dim(), dim()), Vector::Zero(dim()), structure_);
}

void TemporalTransition::visit_parameters(const std::string& prefix, const ParameterVisitor& visit) {
  visit(prefix + "weight", weight_, 2);
  visit(prefix + "bias", bias_, 1);
}

void TemporalTransition::visit_parameters(const std::string& prefix, const ConstParameterVisitor& visit) const {
  visit(prefix + "weight", weight_, 2);
  visit(prefix + "bias", bias_, 1);
}

TNVPModel::TNVPModel(FlowStack f1, FlowStack f2, TemporalTransition transition)
    : f1_(std::move(f1)), f2_(std::move(f2)), transition_(std::move(transition)) {
  if (f1_.dim() != f2_.dim() || f1_.dim() != transition_.dim())
    throw ShapeError("TNVP model: F1, F2 and G must share the latent dimension");
}

TNVPModel TNVPModel::zeros_like() const { return {f1_.zeros_like(), f2_.zeros_like(), transition_.zeros_like()}; }

void TNVPModel::visit_parameters(const std::string& prefix, const ParameterVisitor& visit) {
  f1_.visit_parameters(prefix + "f1.", visit);
  f2_.visit_parameters(prefix + "f2.", visit);
  transition_.visit_parameters(prefix + "transition.", visit);
}

void TNVPModel::visit_parameters(const std::string& prefix, const ConstParameterVisitor& visit) const {
  f1_.visit_parameters(prefix + "f1.", visit);
  f2_.visit_parameters(prefix + "f2.", visit);
  transition_.visit_parameters(prefix + "transition.", visit);
}

TNVPModel make_model(const ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FlowStack f1 = make_default_stack(spec.dim, spec.stack_options(), rng);
  FlowStack f2 = make_default_stack(spec.dim, spec.stack_options(), rng);
  return {std::move(f1), std::move(f2), TemporalTransition(spec.dim, spec.transition)};
}

TNVPModel make_identity_model(Index dim, TransitionStructure structure) {
  return {FlowStack(dim), FlowStack(dim), TemporalTransition(dim, structure)};
}

Vector transition_apply(const TemporalTransition& g, const Vector& z_prev) {
  require_dim(z_prev, g.dim(), "z_prev");
  return g.weight() * z_prev + g.bias();
}

Vector standard_normal_logpdf_batch(const Matrix& v) {
  const double d = static_cast<double>(v.rows());
  return (-0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * v.colwise().squaredNorm().array()).transpose();
}

double conditional_latent_logpdf(const TNVPModel& m, const Vector& z_t, const Vector& z_prev) {
  require_dim(z_t, m.dim(), "z_t");
  return standard_normal_logpdf(z_t - transition_apply(m.transition(), z_prev));
}

double joint_latent_logpdf(const TNVPModel& m, const Vector& z_t, const Vector& z_prev) {
  return standard_normal_logpdf(z_prev) + conditional_latent_logpdf(m, z_t, z_prev);
}

Vector conditional_loglik_batch(const TNVPModel& m, const Matrix& x_t, const Matrix& x_prev) {
  if (x_t.cols() != x_prev.cols()) throw ShapeError("conditional_loglik: batch sizes differ");
  require_finite(x_t, "conditional_loglik x_t");
  require_finite(x_prev, "conditional_loglik x_prev");
  const Matrix z_prev = m.f1().forward_batch(x_prev).z;
  const auto f2 = m.f2().forward_batch(x_t);
  const Matrix residual = f2.z - m.transition().apply_batch(z_prev);
  return standard_normal_logpdf_batch(residual) + f2.log_det;
}

double conditional_loglik(const TNVPModel& m, const Vector& x_t, const Vector& x_prev) {
  require_dim(x_t, m.dim(), "x_t");
  require_dim(x_prev, m.dim(), "x_prev");
  return conditional_loglik_batch(m, x_t, x_prev)[0];
}

double conditional_nll_and_gradient(const TNVPModel& m, const Matrix& x_t, const Matrix& x_prev, TNVPModel& grad,
                                    const Freeze& freeze) {
  if (x_t.cols() != x_prev.cols() || x_t.cols() == 0) throw ShapeError("conditional NLL: bad batch shapes");
  const double inv_n = 1.0 / static_cast<double>(x_t.cols());

  FlowStack::Saved saved1, saved2;
  const Matrix z_prev = m.f1().forward_batch(x_prev, freeze.f1 ? nullptr : &saved1).z;
  const auto f2 = m.f2().forward_batch(x_t, freeze.f2 ? nullptr : &saved2);
  const Matrix residual = f2.z - m.transition().apply_batch(z_prev);
  const Vector loglik = standard_normal_logpdf_batch(residual) + f2.log_det;
  const double nll = -loglik.mean();
  if (!std::isfinite(nll)) throw NumericalError("conditional NLL is not finite");

  // d(nll)/d(residual) = residual / n
  const Matrix g_res = residual * inv_n;
  if (!freeze.transition) {
    grad.transition().weight().noalias() -= g_res * z_prev.transpose();
    grad.transition().bias() -= g_res.rowwise().sum();
    if (m.transition().structure() == TransitionStructure::Diagonal) grad.transition().enforce_structure();
  }
  if (!freeze.f2) m.f2().backward_batch(saved2, g_res, Vector::Constant(x_t.cols(), -inv_n), grad.f2());
  if (!freeze.f1) {
    Matrix g_zprev = -(m.transition().weight().transpose() * g_res);
    m.f1().backward_batch(saved1, g_zprev, Vector::Zero(x_prev.cols()), grad.f1());
  }
  return nll;
}

Vector NoiseSource::draw(Index dim) {
  if (!rng_) return Vector::Zero(dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v[i] = normal(*rng_);
  return v;
}

Vector synthesize_next(const TNVPModel& m, const Vector& x_prev, NoiseSource& noise) {
  require_dim(x_prev, m.dim(), "x_prev");
  const Vector z_prev = stack_forward(m.f1(), x_prev).z;
  const Vector z_t = transition_apply(m.transition(), z_prev) + noise.draw(m.dim());
  return stack_inverse(m.f2(), z_t);
}

std::vector<Vector> synthesize_chain(std::span<const TNVPModel> models, const Vector& x0, NoiseSource& noise) {
  for (const auto& m : models)
    if (m.dim() != x0.size()) throw ShapeError("synthesize_chain: model dimension does not match the input");
  std::vector<Vector> out;
  out.reserve(models.size());
  Vector x = x0;
  for (const auto& m : models) {
    x = synthesize_next(m, x, noise);
    out.push_back(x);
  }
  return out;
}

}  // namespace tnvp
