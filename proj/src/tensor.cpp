#include "tnvp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

namespace tnvp {
namespace {

std::size_t product(const Tensor::Shape& shape) {
  std::size_t n = 1;
  for (Index e : shape) {
    if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

double apply(ElementwiseOp op, double a, double b) {
  switch (op) {
    case ElementwiseOp::Add: return a + b;
    case ElementwiseOp::Sub: return a - b;
    case ElementwiseOp::Mul: return a * b;
    case ElementwiseOp::Exp: return std::exp(a);
    case ElementwiseOp::Neg: return -a;
  }
  return 0.0;
}

bool is_unary(ElementwiseOp op) { return op == ElementwiseOp::Exp || op == ElementwiseOp::Neg; }

Tensor checked(Tensor t, const char* op) {
  if (!t.all_finite()) throw NumericalError(std::string("non-finite value produced by ") + op);
  return t;
}

}  // namespace

std::string shape_string(const Tensor::Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(product(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != product(shape_))
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(shape_));
}

Tensor Tensor::from_vector(const Eigen::Ref<const Vector>& v) {
  return Tensor({v.size()}, std::vector<double>(v.data(), v.data() + v.size()));
}

Tensor Tensor::from_matrix(const Eigen::Ref<const Matrix>& m) {
  Tensor t({m.rows(), m.cols()});
  t.as_matrix() = m;
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::of(std::initializer_list<double> values) {
  return Tensor({static_cast<Index>(values.size())}, std::vector<double>(values));
}

Eigen::Map<const RowMajorMatrix> Tensor::as_matrix() const {
  const Index rows = shape_.empty() ? 0 : shape_[0];
  return {data_.data(), rows, rows == 0 ? 0 : size() / rows};
}

Eigen::Map<RowMajorMatrix> Tensor::as_matrix() {
  const Index rows = shape_.empty() ? 0 : shape_[0];
  return {data_.data(), rows, rows == 0 ? 0 : size() / rows};
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b) {
  if (is_unary(op)) return elementwise(op, a);
  if (a.shape() != b.shape())
    throw ShapeError("elementwise shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Tensor out(a.shape());
  for (Index i = 0; i < a.size(); ++i) out[i] = apply(op, a[i], b[i]);
  return checked(std::move(out), "elementwise");
}

Tensor elementwise(ElementwiseOp op, const Tensor& a, double b) {
  Tensor out(a.shape());
  for (Index i = 0; i < a.size(); ++i) out[i] = apply(op, a[i], b);
  return checked(std::move(out), "elementwise");
}

Tensor elementwise(ElementwiseOp op, const Tensor& a) {
  if (!is_unary(op)) throw ValidationError("binary elementwise op requires a second operand");
  return elementwise(op, a, 0.0);
}

Tensor matvec(const Tensor& w, const Tensor& z) {
  if (w.rank() != 2 || w.shape()[0] != w.shape()[1])
    throw ShapeError("matvec expects a square matrix, got " + shape_string(w.shape()));
  if (z.rank() != 1 || z.shape()[0] != w.shape()[1])
    throw ShapeError("matvec dimension mismatch: " + shape_string(w.shape()) + " times " + shape_string(z.shape()));
  const Index n = w.shape()[0];
  Tensor out({n});
  for (Index r = 0; r < n; ++r) {
    double acc = 0.0;
    for (Index c = 0; c < n; ++c) acc += w[r * n + c] * z[c];
    out[r] = acc;
  }
  return checked(std::move(out), "matvec");
}

void require_finite(const Eigen::Ref<const Matrix>& m, std::string_view where) {
  if (!m.allFinite()) throw NumericalError("non-finite value in " + std::string(where));
}

void ParameterStore::add(std::string name, Tensor value) {
  if (index_.count(name)) throw ValidationError("duplicate parameter slot '" + name + "'");
  index_.emplace(name, slots_.size());
  slots_.push_back({std::move(name), std::move(value)});
}

bool ParameterStore::contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

std::size_t ParameterStore::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ValidationError("unknown parameter slot '" + std::string(name) + "'");
  return it->second;
}

const Tensor& ParameterStore::at(std::string_view name) const { return slots_[index_of(name)].value; }

void ParameterStore::assign(std::string_view name, const Tensor& value) {
  Tensor& slot = slots_[index_of(name)].value;
  if (slot.shape() != value.shape())
    throw ShapeError("slot '" + std::string(name) + "' has shape " + shape_string(slot.shape()) +
                     ", cannot assign " + shape_string(value.shape()));
  slot = value;
}

Index ParameterStore::total_size() const noexcept {
  Index n = 0;
  for (const auto& s : slots_) n += s.value.size();
  return n;
}

Vector ParameterStore::flatten() const {
  Vector flat(total_size());
  Index offset = 0;
  for (const auto& s : slots_) {
    flat.segment(offset, s.value.size()) = s.value.flat();
    offset += s.value.size();
  }
  return flat;
}

void ParameterStore::unflatten(const Eigen::Ref<const Vector>& flat) {
  if (flat.size() != total_size())
    throw ShapeError("unflatten: expected " + std::to_string(total_size()) + " values, got " +
                     std::to_string(flat.size()));
  Index offset = 0;
  for (auto& s : slots_) {
    s.value.flat() = flat.segment(offset, s.value.size());
    offset += s.value.size();
  }
}

ParameterStore ParameterStore::zeros_like() const {
  ParameterStore out;
  for (const auto& s : slots_) out.add(s.name, Tensor(s.value.shape()));
  return out;
}

bool ParameterStore::aligned_with(const ParameterStore& other) const {
  if (slots_.size() != other.slots_.size()) return false;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].name != other.slots_[i].name || slots_[i].value.shape() != other.slots_[i].value.shape())
      return false;
  }
  return true;
}

std::uint64_t checksum(const ParameterStore& store) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (const auto& s : store.slots()) {
    for (double v : s.value.data()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char b : bytes) {
        hash ^= b;
        hash *= 1099511628211ULL;
      }
    }
  }
  return hash;
}

}  // namespace tnvp
