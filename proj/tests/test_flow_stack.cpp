#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tnvp/error.hpp"
#include "tnvp/flow_stack.hpp"
#include "tnvp/oracle.hpp"
#include "tnvp/params.hpp"

namespace tnvp {
namespace {

MappingUnit zero_unit(const BinaryMask& mask) {
  return MappingUnit(mask, std::make_unique<ConstantFunction>(mask.dim(), 0.0),
                     std::make_unique<ConstantFunction>(mask.dim(), 0.0));
}

FlowStack random_stack(Index dim, Index units, std::mt19937_64& rng, double scale,
                       MaskStyle style = MaskStyle::Half) {
  FlowStack stack = make_default_stack(dim, {units, 2, 16, style}, rng);
  randomize_parameters(stack, rng, scale);
  return stack;
}

TEST(FlowStack, EmptyAndIdentityStacks) {
  const Vector x{{0.5, -1.5, 2.0}};
  FlowStack empty(3);
  auto out = stack_forward(empty, x);
  EXPECT_EQ(out.z, x);
  EXPECT_EQ(out.log_det, 0.0);
  EXPECT_EQ(stack_inverse(empty, x), x);

  FlowStack two(3);
  two.push_back(zero_unit(BinaryMask::half(3)));
  two.push_back(zero_unit(BinaryMask::half(3).complement()));
  out = stack_forward(two, x);
  EXPECT_EQ(out.z, x);
  EXPECT_EQ(out.log_det, 0.0);
}

TEST(FlowStack, PushBackValidatesMasks) {
  FlowStack stack(4);
  EXPECT_THROW(stack.push_back(zero_unit(BinaryMask(Vector::Ones(4)))), ValidationError);
  EXPECT_THROW(stack.push_back(zero_unit(BinaryMask::half(3))), ShapeError);
  stack.push_back(zero_unit(BinaryMask::half(4)));
  EXPECT_THROW(stack.push_back(zero_unit(BinaryMask::half(4))), ValidationError);  // must alternate
  EXPECT_NO_THROW(stack.push_back(zero_unit(BinaryMask::half(4).complement())));
}

TEST(MakeDefaultStack, Defaults) {
  std::mt19937_64 rng(0);
  const FlowStack stack = make_default_stack(4, {}, rng);
  ASSERT_EQ(stack.size(), 10u);
  for (std::size_t i = 0; i < stack.size(); ++i) {
    for (const CouplingFunction* fn : {&stack.unit(i).scale(), &stack.unit(i).translate()}) {
      const auto* net = dynamic_cast<const ResidualNet*>(fn);
      ASSERT_NE(net, nullptr);
      EXPECT_EQ(net->blocks(), 2);
      EXPECT_EQ(net->width(), 32);
    }
    const BinaryMask expected = i % 2 ? BinaryMask::half(4).complement() : BinaryMask::half(4);
    EXPECT_EQ(stack.unit(i).mask(), expected);
  }
}

TEST(MakeDefaultStack, SingleUnitAndEvenOdd) {
  std::mt19937_64 rng(0);
  const FlowStack one = make_default_stack(4, {1, 2, 32, MaskStyle::Half}, rng);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one.unit(0).mask().bits(), (Vector{{1, 1, 0, 0}}));
  const FlowStack eo = make_default_stack(4, {3, 1, 8, MaskStyle::EvenOdd}, rng);
  EXPECT_EQ(eo.unit(0).mask().bits(), (Vector{{1, 0, 1, 0}}));
  EXPECT_EQ(eo.unit(1).mask().bits(), (Vector{{0, 1, 0, 1}}));
  EXPECT_EQ(eo.unit(2).mask().bits(), (Vector{{1, 0, 1, 0}}));
  EXPECT_THROW(make_default_stack(1, {}, rng), ValidationError);
}

TEST(FlowStack, FreshStackIsIdentity) {
  std::mt19937_64 rng(1);
  const FlowStack stack = make_default_stack(5, {}, rng);
  const Matrix x = testing::normal_matrix(5, 40, rng);
  const auto out = stack.forward_batch(x);
  EXPECT_EQ(out.z, x);
  EXPECT_TRUE(out.log_det.isZero(0.0));
}

TEST(FlowStack, SingleUnitAgreesWithUnitInverse) {
  std::mt19937_64 rng(2);
  const FlowStack stack = random_stack(4, 1, rng, 0.3);
  const Vector z = testing::normal_matrix(4, 1, rng).col(0);
  EXPECT_EQ(stack_inverse(stack, z), unit_inverse(stack.unit(0), z));
  const auto s = stack_forward(stack, z);
  const auto u = unit_forward(stack.unit(0), z);
  EXPECT_EQ(s.z, u.y);
  EXPECT_EQ(s.log_det, u.log_det);
}

TEST(FlowStack, UnitsApplyInDeclaredOrder) {
  std::mt19937_64 rng(3);
  const FlowStack stack = random_stack(4, 3, rng, 0.4);
  Vector x = testing::normal_matrix(4, 1, rng).col(0);
  const auto out = stack_forward(stack, x);
  double log_det = 0.0;
  for (const auto& u : stack.units()) {
    const auto step = unit_forward(u, x);
    x = step.y;
    log_det += step.log_det;
  }
  EXPECT_EQ(out.z, x);
  EXPECT_EQ(out.log_det, log_det);  // additivity, exactly as computed
}

TEST(FlowStack, RoundTripTenUnitsD8) {
  std::mt19937_64 rng(4);
  const FlowStack stack = random_stack(8, 10, rng, 0.1);
  const Matrix x = testing::normal_matrix(8, 1000, rng);
  EXPECT_LT((stack.inverse_batch(stack.forward_batch(x).z) - x).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((stack.forward_batch(stack.inverse_batch(x)).z - x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FlowStack, LogDetMatchesNumericalJacobian) {
  std::mt19937_64 rng(5);
  const FlowStack stack = random_stack(4, 4, rng, 0.3);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector x = testing::normal_matrix(4, 1, rng).col(0);
    const Matrix j = oracle::numerical_jacobian([&](const Vector& v) { return stack_forward(stack, v).z; }, x, 1e-6);
    const double analytic = stack_forward(stack, x).log_det;
    EXPECT_NEAR(analytic, oracle::log_abs_det(j), 1e-5 * std::max(1.0, std::abs(analytic)));
  }
}

TEST(FlowStack, SingleUnitJacobianDiagonalIsExpScale) {
  std::mt19937_64 rng(6);
  const FlowStack stack = random_stack(6, 1, rng, 0.3);
  const Vector x = testing::normal_matrix(6, 1, rng).col(0);
  MappingUnit::Saved saved;
  stack.unit(0).forward_batch(x, &saved);
  const Matrix j = oracle::numerical_jacobian([&](const Vector& v) { return stack_forward(stack, v).z; }, x, 1e-6);
  EXPECT_LT(j.topRightCorner(3, 3).cwiseAbs().maxCoeff(), 1e-6);
  for (Index i = 3; i < 6; ++i) EXPECT_NEAR(j(i, i), saved.exp_s(i, 0), 1e-6 * saved.exp_s(i, 0));
}

TEST(FlowStack, AlternationCoversEveryCoordinate) {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    std::mt19937_64 rng(seed);
    for (auto style : {MaskStyle::Half, MaskStyle::EvenOdd}) {
      const FlowStack stack = random_stack(5, 2, rng, 0.5, style);
      const Vector x = testing::normal_matrix(5, 1, rng).col(0);
      const Vector z = stack_forward(stack, x).z;
      for (Index i = 0; i < 5; ++i) EXPECT_NE(z[i], x[i]) << "coordinate " << i << " seed " << seed;
    }
  }
}

TEST(FlowStack, NumericalErrorNamesTheUnit) {
  FlowStack stack(2);
  stack.push_back(zero_unit(BinaryMask::half(2)));
  stack.push_back(MappingUnit(BinaryMask::half(2).complement(), std::make_unique<ConstantFunction>(2, 80.0),
                              std::make_unique<ConstantFunction>(2, 0.0)));
  try {
    stack_forward(stack, Vector{{1.0, 1.0}});
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("unit 1"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace tnvp
