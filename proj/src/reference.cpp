#include "tnvp/reference.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include "tnvp/params.hpp"

namespace tnvp::reference {
namespace {

using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using LVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
using Values = std::map<std::string, LMatrix, std::less<>>;

struct Entry {
  LMatrix* slot;
  Index row;
  Index col;
};

LMatrix widen(const Tensor& t) {
  const Index rows = t.shape().empty() ? 1 : t.shape()[0];
  const Index cols = t.rank() == 2 ? t.shape()[1] : 1;
  LMatrix m(rows, cols);
  const auto flat = t.flat();
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = static_cast<long double>(flat[i * cols + j]);
  return m;
}

const LMatrix& get(const Values& v, const std::string& name) {
  auto it = v.find(name);
  if (it == v.end()) throw ValidationError("reference: missing parameter '" + name + "'");
  return it->second;
}

LMatrix relu(const LMatrix& m) { return m.cwiseMax(0.0L); }

LMatrix net_forward(const ResidualNet& net, const Values& v, const std::string& p, const LMatrix& x) {
  LMatrix h = get(v, p + "in.weight") * x;
  h.colwise() += get(v, p + "in.bias").col(0);
  for (Index k = 0; k < net.blocks(); ++k) {
    const std::string b = p + "block" + std::to_string(k) + ".";
    LMatrix pre = get(v, b + "fc1.weight") * h;
    pre.colwise() += get(v, b + "fc1.bias").col(0);
    h += get(v, b + "fc2.weight") * relu(pre);
    h.colwise() += get(v, b + "fc2.bias").col(0);
  }
  LMatrix out = get(v, p + "out.weight") * relu(h);
  out.colwise() += get(v, p + "out.bias").col(0);
  if (net.output_bound() > 0.0) {
    const long double bound = net.output_bound();
    out = out.unaryExpr([bound](long double o) { return bound * std::tanh(o / bound); });
  }
  return out;
}

const ResidualNet& as_residual(const CouplingFunction& f) {
  const auto* net = dynamic_cast<const ResidualNet*>(&f);
  if (!net) throw ValidationError("reference: only residual-net couplings are supported");
  return *net;
}

// Returns z and accumulates the per-column log-det.
LMatrix stack_forward(const FlowStack& stack, const Values& v, const std::string& prefix, LMatrix x, LVector& log_det) {
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const MappingUnit& u = stack.unit(i);
    const std::string p = prefix + "unit" + std::to_string(i) + ".";
    LVector b(u.dim());
    for (Index j = 0; j < u.dim(); ++j) b[j] = u.mask().bits()[j];
    const LMatrix masked = b.asDiagonal() * x;
    const LMatrix s = net_forward(as_residual(u.scale()), v, p + "scale.", masked);
    const LMatrix t = net_forward(as_residual(u.translate()), v, p + "translate.", masked);
    for (Index j = 0; j < u.dim(); ++j) {
      if (b[j] != 0.0L) continue;
      for (Index c = 0; c < x.cols(); ++c) {
        x(j, c) = x(j, c) * std::exp(s(j, c)) + t(j, c);
        log_det[c] += s(j, c);
      }
    }
  }
  return x;
}

long double nll(const TNVPModel& model, const Values& v, const LMatrix& x_t, const LMatrix& x_prev) {
  const Index n = x_t.cols();
  LVector ld1 = LVector::Zero(n), ld2 = LVector::Zero(n);
  const LMatrix z_prev = stack_forward(model.f1(), v, "f1.", x_prev, ld1);
  const LMatrix z_t = stack_forward(model.f2(), v, "f2.", x_t, ld2);
  LMatrix mean = get(v, "transition.weight") * z_prev;
  mean.colwise() += get(v, "transition.bias").col(0);
  const LMatrix r = z_t - mean;
  const long double log_norm = 0.5L * static_cast<long double>(model.dim()) * std::log(2.0L * std::numbers::pi_v<long double>);
  long double total = 0.0L;
  for (Index c = 0; c < n; ++c) total += -0.5L * r.col(c).squaredNorm() - log_norm + ld2[c];
  return -total / static_cast<long double>(n);
}

LMatrix widen(const Matrix& m) { return m.cast<long double>(); }

Values gather_values(const TNVPModel& model) {
  Values v;
  const ParameterStore store = gather(model);
  for (const auto& slot : store.slots()) v.emplace(slot.name, widen(store.at(slot.name)));
  return v;
}

}  // namespace

long double conditional_nll(const TNVPModel& model, const Matrix& x_t, const Matrix& x_prev) {
  return nll(model, gather_values(model), widen(x_t), widen(x_prev));
}

Vector conditional_nll_gradient(const TNVPModel& model, const Matrix& x_t, const Matrix& x_prev, double step) {
  if (!(step > 0.0)) throw ValidationError("reference: finite-difference step must be positive");
  Values v = gather_values(model);
  const ParameterStore store = gather(model);
  std::vector<Entry> entries;
  for (const auto& slot : store.slots()) {
    LMatrix& m = v.find(slot.name)->second;
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) entries.push_back({&m, i, j});
  }
  const LMatrix xt = widen(x_t), xp = widen(x_prev);
  const long double h = step;
  Vector grad(static_cast<Index>(entries.size()));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    long double& theta = (*entries[k].slot)(entries[k].row, entries[k].col);
    const long double saved = theta;
    theta = saved + h;
    const long double up = nll(model, v, xt, xp);
    theta = saved - h;
    const long double down = nll(model, v, xt, xp);
    theta = saved;
    grad[static_cast<Index>(k)] = static_cast<double>((up - down) / (2.0L * h));
  }
  return grad;
}

}  // namespace tnvp::reference
