#include "tnvp/residual_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tnvp {
namespace {

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

Matrix relu_mask(const Matrix& activated) { return (activated.array() > 0.0).cast<double>().matrix(); }

void fill_uniform(Eigen::Ref<Matrix> m, std::mt19937_64& rng, double limit) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Index c = 0; c < m.cols(); ++c)
    for (Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
}

}  // namespace

ResidualNet::ResidualNet(Index dim, Index width, Index blocks, double output_bound)
    : dim_(dim),
      width_(width),
      bound_(output_bound),
      in_w_(Matrix::Zero(width, dim)),
      in_b_(Vector::Zero(width)),
      out_w_(Matrix::Zero(dim, width)),
      out_b_(Vector::Zero(dim)) {
  if (dim < 1 || width < 1 || blocks < 0) throw ValidationError("ResidualNet: invalid dimensions");
  if (output_bound < 0.0) throw ValidationError("ResidualNet: output bound must be non-negative");
  blocks_.resize(static_cast<std::size_t>(blocks),
                 Block{Matrix::Zero(width, width), Vector::Zero(width), Matrix::Zero(width, width),
                       Vector::Zero(width)});
}

void ResidualNet::initialize(std::mt19937_64& rng) {
  const double in_limit = 1.0 / std::sqrt(static_cast<double>(dim_));
  const double hidden_limit = 1.0 / std::sqrt(static_cast<double>(width_));
  fill_uniform(in_w_, rng, in_limit);
  fill_uniform(in_b_, rng, in_limit);
  for (auto& b : blocks_) {
    fill_uniform(b.w1, rng, hidden_limit);
    fill_uniform(b.c1, rng, hidden_limit);
    fill_uniform(b.w2, rng, hidden_limit);
    fill_uniform(b.c2, rng, hidden_limit);
  }
  out_w_.setZero();
  out_b_.setZero();
}

std::unique_ptr<CouplingFunction> ResidualNet::clone() const { return std::make_unique<ResidualNet>(*this); }

std::unique_ptr<CouplingFunction> ResidualNet::zeros_like() const {
  return std::make_unique<ResidualNet>(dim_, width_, blocks(), bound_);
}

double ResidualNet::kink_margin(const Matrix& x) const {
  if (x.rows() != dim_) throw ShapeError("ResidualNet: kink_margin input has wrong row count");
  double margin = std::numeric_limits<double>::infinity();
  Matrix h = (in_w_ * x).colwise() + in_b_;
  for (const auto& b : blocks_) {
    const Matrix pre = (b.w1 * h).colwise() + b.c1;
    margin = std::min(margin, pre.cwiseAbs().minCoeff());
    h += b.w2 * relu(pre);
    h.colwise() += b.c2;
  }
  return std::min(margin, h.cwiseAbs().minCoeff());
}

// saved layout: h_0, a_0, ..., h_{R-1}, a_{R-1}, h_R, relu(h_R), out
Matrix ResidualNet::forward(const Matrix& x, Activations* saved) const {
  if (x.rows() != dim_)
    throw ShapeError("ResidualNet: input has " + std::to_string(x.rows()) + " rows, expected " + std::to_string(dim_));
  if (saved) saved->clear();
  Matrix h = (in_w_ * x).colwise() + in_b_;
  for (const auto& b : blocks_) {
    Matrix a = relu((b.w1 * h).colwise() + b.c1);
    Matrix next = h + b.w2 * a;
    next.colwise() += b.c2;
    if (saved) {
      saved->push_back(std::move(h));
      saved->push_back(std::move(a));
    }
    h = std::move(next);
  }
  Matrix r = relu(h);
  Matrix out = (out_w_ * r).colwise() + out_b_;
  if (bound_ > 0.0) out = bound_ * (out.array() / bound_).tanh().matrix();
  if (saved) {
    saved->push_back(std::move(h));
    saved->push_back(std::move(r));
    saved->push_back(out);
  }
  return out;
}

Matrix ResidualNet::backward(const Matrix& x, const Activations& saved, const Matrix& grad_out,
                             CouplingFunction& grad) const {
  auto& g = dynamic_cast<ResidualNet&>(grad);
  const std::size_t nb = blocks_.size();
  const Matrix& h_last = saved[2 * nb];
  const Matrix& r = saved[2 * nb + 1];
  const Matrix& out = saved[2 * nb + 2];

  Matrix go = grad_out;
  if (bound_ > 0.0) {
    const auto t = out.array() / bound_;
    go = (go.array() * (1.0 - t * t)).matrix();
  }
  g.out_w_.noalias() += go * r.transpose();
  g.out_b_ += go.rowwise().sum();

  Matrix gh = (out_w_.transpose() * go).cwiseProduct(relu_mask(h_last));
  for (std::size_t k = nb; k-- > 0;) {
    const Block& b = blocks_[k];
    Block& gb = g.blocks_[k];
    const Matrix& h = saved[2 * k];
    const Matrix& a = saved[2 * k + 1];
    gb.w2.noalias() += gh * a.transpose();
    gb.c2 += gh.rowwise().sum();
    const Matrix ga = (b.w2.transpose() * gh).cwiseProduct(relu_mask(a));
    gb.w1.noalias() += ga * h.transpose();
    gb.c1 += ga.rowwise().sum();
    gh.noalias() += b.w1.transpose() * ga;
  }
  g.in_w_.noalias() += gh * x.transpose();
  g.in_b_ += gh.rowwise().sum();
  return in_w_.transpose() * gh;
}

void ResidualNet::visit_parameters(const std::string& prefix, const ParameterVisitor& visit) {
  visit(prefix + "in.weight", in_w_, 2);
  visit(prefix + "in.bias", in_b_, 1);
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const std::string p = prefix + "block" + std::to_string(k) + ".";
    visit(p + "fc1.weight", blocks_[k].w1, 2);
    visit(p + "fc1.bias", blocks_[k].c1, 1);
    visit(p + "fc2.weight", blocks_[k].w2, 2);
    visit(p + "fc2.bias", blocks_[k].c2, 1);
  }
  visit(prefix + "out.weight", out_w_, 2);
  visit(prefix + "out.bias", out_b_, 1);
}

void ResidualNet::visit_parameters(const std::string& prefix, const ConstParameterVisitor& visit) const {
  visit(prefix + "in.weight", in_w_, 2);
  visit(prefix + "in.bias", in_b_, 1);
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const std::string p = prefix + "block" + std::to_string(k) + ".";
    visit(p + "fc1.weight", blocks_[k].w1, 2);
    visit(p + "fc1.bias", blocks_[k].c1, 1);
    visit(p + "fc2.weight", blocks_[k].w2, 2);
    visit(p + "fc2.bias", blocks_[k].c2, 1);
  }
  visit(prefix + "out.weight", out_w_, 2);
  visit(prefix + "out.bias", out_b_, 1);
}

std::unique_ptr<CouplingFunction> ConstantFunction::clone() const {
  return std::make_unique<ConstantFunction>(*this);
}

std::unique_ptr<CouplingFunction> ConstantFunction::zeros_like() const {
  return std::make_unique<ConstantFunction>(Vector::Zero(value_.size()));
}

Matrix ConstantFunction::forward(const Matrix& x, Activations* saved) const {
  if (x.rows() != value_.size()) throw ShapeError("ConstantFunction: dimension mismatch");
  if (saved) saved->clear();
  return value_.replicate(1, x.cols());
}

Matrix ConstantFunction::backward(const Matrix& x, const Activations&, const Matrix& grad_out,
                                  CouplingFunction& grad) const {
  auto& g = dynamic_cast<ConstantFunction&>(grad);
  g.value_ += grad_out.rowwise().sum();
  return Matrix::Zero(x.rows(), x.cols());
}

void ConstantFunction::visit_parameters(const std::string& prefix, const ParameterVisitor& visit) {
  visit(prefix + "value", value_, 1);
}

void ConstantFunction::visit_parameters(const std::string& prefix, const ConstParameterVisitor& visit) const {
  visit(prefix + "value", value_, 1);
}

}  // namespace tnvp
