#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "tnvp/error.hpp"
#include "tnvp/tensor.hpp"

namespace tnvp {
namespace {

TEST(Elementwise, MulAddExpExamples) {
  EXPECT_EQ(elementwise(ElementwiseOp::Mul, Tensor::of({1, 2}), Tensor::of({3, 4})), Tensor::of({3, 8}));
  EXPECT_EQ(elementwise(ElementwiseOp::Exp, Tensor::of({0, 0})), Tensor::of({1, 1}));
  EXPECT_EQ(elementwise(ElementwiseOp::Add, Tensor::of({1.5, -2}), Tensor::of({0.5, 2})), Tensor::of({2, 0}));
  EXPECT_EQ(elementwise(ElementwiseOp::Sub, Tensor::of({1, 2}), 1.0), Tensor::of({0, 1}));
  EXPECT_EQ(elementwise(ElementwiseOp::Neg, Tensor::of({1, -2})), Tensor::of({-1, 2}));
}

TEST(Elementwise, ShapeMismatchNamesBothShapes) {
  try {
    elementwise(ElementwiseOp::Add, Tensor::of({1, 2}), Tensor::of({1, 2, 3}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3]"), std::string::npos) << msg;
  }
}

TEST(Elementwise, OverflowIsAHardError) {
  EXPECT_THROW(elementwise(ElementwiseOp::Exp, Tensor::of({1000.0})), NumericalError);
  EXPECT_THROW(elementwise(ElementwiseOp::Mul, Tensor::of({1e300}), 1e300), NumericalError);
}

TEST(Tensor, RejectsInconsistentShape) {
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
  EXPECT_THROW(Tensor(Tensor::Shape{0}), ShapeError);
}

TEST(Tensor, MatrixRoundTripIsRowMajor) {
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const Tensor t = Tensor::from_matrix(m);
  EXPECT_EQ(t.shape(), (Tensor::Shape{2, 3}));
  EXPECT_EQ(t.data(), (std::vector<double>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(t.to_matrix(), m);
}

TEST(Matvec, Examples) {
  EXPECT_EQ(matvec(Tensor({2, 2}, {1, 0, 0, 1}), Tensor::of({3, 7})), Tensor::of({3, 7}));
  EXPECT_EQ(matvec(Tensor({2, 2}, {0, 0, 0, 0}), Tensor::of({3, 7})), Tensor::of({0, 0}));
  EXPECT_EQ(matvec(Tensor({2, 2}, {1, 2, 3, 4}), Tensor::of({1, 1})), Tensor::of({3, 7}));
}

TEST(Matvec, DimensionErrors) {
  EXPECT_THROW(matvec(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), Tensor::of({1, 1, 1})), ShapeError);
  EXPECT_THROW(matvec(Tensor({2, 2}, {1, 2, 3, 4}), Tensor::of({1, 1, 1})), ShapeError);
}

TEST(Matvec, RepeatedEvaluationIsBitIdentical) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  std::vector<double> w(64 * 64), z(64);
  for (auto& v : w) v = normal(rng);
  for (auto& v : z) v = normal(rng);
  const Tensor first = matvec(Tensor({64, 64}, w), Tensor({64}, z));
  for (int i = 0; i < 5; ++i) EXPECT_EQ(matvec(Tensor({64, 64}, w), Tensor({64}, z)), first);
}

ParameterStore sample_store() {
  ParameterStore store;
  store.add("a.weight", Tensor({2, 2}, {0.1, -0.2, 1.0 / 3.0, std::numbers::pi}));
  store.add("a.bias", Tensor::of({std::nextafter(1.0, 2.0), -0.0}));
  return store;
}

TEST(ParameterStore, FlattenUnflattenIsBitExact) {
  const ParameterStore store = sample_store();
  ParameterStore copy = store.zeros_like();
  copy.unflatten(store.flatten());
  ASSERT_EQ(copy.size(), store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& a = store.slots()[i].value.data();
    const auto& b = copy.slots()[i].value.data();
    for (std::size_t k = 0; k < a.size(); ++k)
      EXPECT_EQ(std::bit_cast<std::uint64_t>(a[k]), std::bit_cast<std::uint64_t>(b[k]));
  }
  EXPECT_EQ(checksum(copy), checksum(store));
}

TEST(ParameterStore, IterationOrderIsInsertionOrder) {
  const ParameterStore store = sample_store();
  EXPECT_EQ(store.slots()[0].name, "a.weight");
  EXPECT_EQ(store.slots()[1].name, "a.bias");
  EXPECT_EQ(store.total_size(), 6);
}

TEST(ParameterStore, SlotsAreUniqueAndShapesFixed) {
  ParameterStore store = sample_store();
  EXPECT_THROW(store.add("a.bias", Tensor::of({1})), ValidationError);
  EXPECT_THROW(store.assign("a.bias", Tensor::of({1, 2, 3})), ShapeError);
  EXPECT_THROW(store.at("missing"), ValidationError);
  EXPECT_THROW(store.unflatten(Vector::Zero(5)), ShapeError);
  store.assign("a.bias", Tensor::of({7, 8}));
  EXPECT_EQ(store.at("a.bias"), Tensor::of({7, 8}));
}

TEST(ParameterStore, ChecksumSeesSingleBitChanges) {
  const ParameterStore store = sample_store();
  ParameterStore changed = store;
  Vector flat = changed.flatten();
  flat[0] = std::nextafter(flat[0], 1.0);
  changed.unflatten(flat);
  EXPECT_NE(checksum(changed), checksum(store));
  EXPECT_TRUE(changed.aligned_with(store));
}

TEST(RequireFinite, RejectsNaN) {
  Matrix m = Matrix::Zero(2, 2);
  EXPECT_NO_THROW(require_finite(m, "m"));
  m(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(require_finite(m, "m"), NumericalError);
}

}  // namespace
}  // namespace tnvp
