#pragma once

#include <functional>
#include <random>
#include <string>

#include "tnvp/tensor.hpp"

namespace tnvp {

/// Callbacks used by model components to expose their parameters in a fixed order.
/// `rank` is 1 for bias-like vectors and 2 for weight matrices.
using ParameterVisitor = std::function<void(const std::string& name, Eigen::Ref<Matrix> value, int rank)>;
using ConstParameterVisitor =
    std::function<void(const std::string& name, const Eigen::Ref<const Matrix>& value, int rank)>;

/// Copies every parameter of `obj` into a store, in visitation order.
template <typename T>
ParameterStore gather(const T& obj) {
  ParameterStore store;
  obj.visit_parameters("", [&](const std::string& name, const Eigen::Ref<const Matrix>& value, int rank) {
    store.add(name, rank == 1 ? Tensor::from_vector(value.col(0)) : Tensor::from_matrix(value));
  });
  return store;
}

/// Writes `store` back into `obj`. Names and shapes must match visitation order exactly.
template <typename T>
void scatter(const ParameterStore& store, T& obj) {
  std::size_t i = 0;
  obj.visit_parameters("", [&](const std::string& name, Eigen::Ref<Matrix> value, int) {
    if (i >= store.size()) throw ShapeError("scatter: store has too few slots");
    const auto& slot = store.slots()[i++];
    if (slot.name != name) throw ShapeError("scatter: expected slot '" + name + "', found '" + slot.name + "'");
    if (slot.value.size() != value.size())
      throw ShapeError("scatter: slot '" + name + "' has " + std::to_string(slot.value.size()) + " values, expected " +
                       std::to_string(value.size()));
    if (value.cols() == 1) {
      value.col(0) = slot.value.flat();
    } else {
      value = slot.value.as_matrix();
    }
  });
  if (i != store.size()) throw ShapeError("scatter: store has extra slots");
}

/// Overwrites every parameter with independent uniform draws in [-scale, scale].
template <typename T>
void randomize_parameters(T& obj, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  obj.visit_parameters("", [&](const std::string&, Eigen::Ref<Matrix> value, int) {
    for (Index c = 0; c < value.cols(); ++c)
      for (Index r = 0; r < value.rows(); ++r) value(r, c) = dist(rng);
  });
}

}  // namespace tnvp
