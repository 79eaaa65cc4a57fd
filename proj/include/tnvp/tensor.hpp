#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "tnvp/error.hpp"

namespace tnvp {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Shape-tagged float64 array with row-major storage.
class Tensor {
 public:
  using Shape = std::vector<Index>;

  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor from_vector(const Eigen::Ref<const Vector>& v);
  static Tensor from_matrix(const Eigen::Ref<const Matrix>& m);
  static Tensor scalar(double value);
  static Tensor of(std::initializer_list<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  Index size() const noexcept { return static_cast<Index>(data_.size()); }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  double operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }
  double& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }

  Eigen::Map<const Vector> flat() const { return {data_.data(), size()}; }
  Eigen::Map<Vector> flat() { return {data_.data(), size()}; }

  /// Rank-2 view (rank-1 tensors read as a column).
  Eigen::Map<const RowMajorMatrix> as_matrix() const;
  Eigen::Map<RowMajorMatrix> as_matrix();

  Vector to_vector() const { return flat(); }
  Matrix to_matrix() const { return as_matrix(); }

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::string shape_string(const Tensor::Shape& shape);

enum class ElementwiseOp { Add, Sub, Mul, Exp, Neg };

/// Binary elementwise op; `b` must have the same shape as `a`.
Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b);
/// Scalar-broadcast elementwise op.
Tensor elementwise(ElementwiseOp op, const Tensor& a, double b);
/// Unary elementwise op (Exp, Neg).
Tensor elementwise(ElementwiseOp op, const Tensor& a);

/// Matrix-vector product with fixed left-to-right row accumulation.
Tensor matvec(const Tensor& w, const Tensor& z);

/// Throws NumericalError when any element of `m` is NaN or Inf.
void require_finite(const Eigen::Ref<const Matrix>& m, std::string_view where);

/// Named parameter tensors in insertion order.
class ParameterStore {
 public:
  struct Slot {
    std::string name;
    Tensor value;

    friend bool operator==(const Slot&, const Slot&) = default;
  };

  /// Adds a slot; names must be unique.
  void add(std::string name, Tensor value);

  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  /// Replaces a slot's values; the shape must stay the same.
  void assign(std::string_view name, const Tensor& value);

  const std::vector<Slot>& slots() const noexcept { return slots_; }
  std::size_t size() const noexcept { return slots_.size(); }
  Index total_size() const noexcept;

  Vector flatten() const;
  void unflatten(const Eigen::Ref<const Vector>& flat);

  /// Same names and shapes, all values zero.
  ParameterStore zeros_like() const;
  bool aligned_with(const ParameterStore& other) const;

  friend bool operator==(const ParameterStore& a, const ParameterStore& b) { return a.slots_ == b.slots_; }

 private:
  std::size_t index_of(std::string_view name) const;

  std::vector<Slot> slots_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Per-slot gradients aligned with a ParameterStore, plus an optional input gradient.
struct GradientRecord {
  ParameterStore params;
  std::optional<Tensor> input;
};

/// FNV-1a over the raw bytes of the flattened parameter vector.
std::uint64_t checksum(const ParameterStore& store);

}  // namespace tnvp
