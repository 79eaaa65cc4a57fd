#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tnvp/error.hpp"
#include "tnvp/oracle.hpp"
#include "tnvp/params.hpp"
#include "tnvp/temporal_model.hpp"

namespace tnvp {
namespace {

TNVPModel random_model(const ModelSpec& spec, std::uint64_t seed, double scale) {
  TNVPModel m = make_model(spec, seed);
  std::mt19937_64 rng(seed + 1000);
  randomize_parameters(m, rng, scale);
  return m;
}

const ModelSpec kSmall{2, 4, 2, 16, MaskStyle::Half, TransitionStructure::Full};

TEST(TransitionApply, Examples) {
  const Vector z{{3.0, 7.0}};
  EXPECT_EQ(transition_apply(TemporalTransition(2), z), z);
  EXPECT_EQ(transition_apply(TemporalTransition(Matrix::Zero(2, 2), Vector{{1.5, -2.0}}), z), (Vector{{1.5, -2.0}}));
  Matrix w(2, 2);
  w << 1, 2, 3, 4;
  EXPECT_EQ(transition_apply(TemporalTransition(w, Vector::Ones(2)), Vector::Ones(2)), (Vector{{4.0, 8.0}}));
  EXPECT_THROW(transition_apply(TemporalTransition(2), Vector::Ones(3)), ShapeError);
}

TEST(TransitionApply, IsExactlyAffine) {
  std::mt19937_64 rng(1);
  const TemporalTransition g(testing::normal_matrix(4, 4, rng), testing::normal_matrix(4, 1, rng).col(0));
  const Vector z1 = testing::normal_matrix(4, 1, rng).col(0);
  const Vector z2 = testing::normal_matrix(4, 1, rng).col(0);
  const Vector lhs = transition_apply(g, z1) - transition_apply(g, z2);
  EXPECT_LT((lhs - g.weight() * (z1 - z2)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TransitionApply, DiagonalStructureDropsOffDiagonal) {
  Matrix w(2, 2);
  w << 1, 2, 3, 4;
  TemporalTransition g(w, Vector::Zero(2), TransitionStructure::Diagonal);
  EXPECT_EQ(g.weight(), (Matrix{{1, 0}, {0, 4}}));
}

TEST(StandardNormalLogpdf, Examples) {
  EXPECT_NEAR(standard_normal_logpdf(Vector::Zero(2)), -1.837877, 1e-6);
  EXPECT_NEAR(standard_normal_logpdf(Vector::Ones(1)), -1.418939, 1e-6);
  const Vector v{{0.3, -1.2, 2.5}};
  double sum = 0.0;
  for (Index i = 0; i < v.size(); ++i) sum += standard_normal_logpdf(v.segment(i, 1));
  EXPECT_NEAR(standard_normal_logpdf(v), sum, 1e-14);
}

TEST(LatentDensity, ConditionalExamples) {
  TNVPModel m = make_identity_model(2);
  m.transition().weight().setZero();
  EXPECT_NEAR(conditional_latent_logpdf(m, Vector::Zero(2), Vector{{5.0, -1.0}}), -1.837877, 1e-6);
  const TNVPModel id = make_identity_model(3);
  const Vector z{{0.1, 0.2, 0.3}};
  EXPECT_DOUBLE_EQ(conditional_latent_logpdf(id, z, z), -1.5 * std::log(2.0 * std::numbers::pi));
}

TEST(LatentDensity, ConditionalMatchesGaussianOracle) {
  std::mt19937_64 rng(2);
  TNVPModel m = make_identity_model(4);
  m.transition().weight() = testing::normal_matrix(4, 4, rng);
  m.transition().bias() = testing::normal_matrix(4, 1, rng).col(0);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector z_prev = testing::normal_matrix(4, 1, rng).col(0);
    const Vector z_t = testing::normal_matrix(4, 1, rng).col(0);
    const Vector mean = m.transition().weight() * z_prev + m.transition().bias();
    EXPECT_NEAR(conditional_latent_logpdf(m, z_t, z_prev),
                oracle::gaussian_logpdf(z_t, mean, Matrix::Identity(4, 4)), 1e-12);
  }
}

TEST(LatentDensity, JointExamplesAndFactorization) {
  TNVPModel m = make_identity_model(2);
  m.transition().weight().setZero();
  EXPECT_NEAR(joint_latent_logpdf(m, Vector::Zero(2), Vector::Zero(2)), -3.675754, 1e-6);

  std::mt19937_64 rng(3);
  m.transition().weight() = testing::normal_matrix(2, 2, rng);
  m.transition().bias() = testing::normal_matrix(2, 1, rng).col(0);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector z_prev = testing::normal_matrix(2, 1, rng).col(0);
    const Vector z_t = testing::normal_matrix(2, 1, rng).col(0);
    EXPECT_EQ(joint_latent_logpdf(m, z_t, z_prev),
              standard_normal_logpdf(z_prev) + conditional_latent_logpdf(m, z_t, z_prev));
  }
}

TEST(LatentDensity, JointMatchesFourDimensionalGaussian) {
  std::mt19937_64 rng(4);
  for (bool diagonal : {true, false}) {
    TNVPModel m = make_identity_model(2);
    const Matrix w = diagonal ? Matrix(0.5 * Matrix::Identity(2, 2)) : testing::normal_matrix(2, 2, rng);
    m.transition().weight() = w;
    m.transition().bias() = testing::normal_matrix(2, 1, rng).col(0);
    Matrix cov(4, 4);
    cov << w * w.transpose() + Matrix::Identity(2, 2), w, w.transpose(), Matrix::Identity(2, 2);
    Vector mean(4);
    mean << m.transition().bias(), Vector::Zero(2);
    for (int trial = 0; trial < 10; ++trial) {
      const Vector z_prev = testing::normal_matrix(2, 1, rng).col(0);
      const Vector z_t = testing::normal_matrix(2, 1, rng).col(0);
      Vector joint(4);
      joint << z_t, z_prev;
      EXPECT_NEAR(joint_latent_logpdf(m, z_t, z_prev), oracle::gaussian_logpdf(joint, mean, cov), 1e-10);
    }
  }
}

TEST(ConditionalLoglik, IdentityModelAtOrigin) {
  TNVPModel m = make_identity_model(2);
  m.transition().weight().setZero();
  EXPECT_NEAR(conditional_loglik(m, Vector::Zero(2), Vector{{0.7, 0.1}}), -1.837877, 1e-6);
}

TEST(ConditionalLoglik, ConstantScaleShiftsByExactlyC) {
  // Single scaling unit with S = c on the free coordinate: x_t chosen so that
  // both models map it to the same latent point, and the log-lik differs by c.
  const double c = 0.37;
  auto model_with_scale = [](double s) {
    FlowStack f2(2);
    f2.push_back(MappingUnit(BinaryMask::half(2), std::make_unique<ConstantFunction>(2, s),
                             std::make_unique<ConstantFunction>(2, 0.0)));
    return TNVPModel(FlowStack(2), std::move(f2), TemporalTransition(2));
  };
  const TNVPModel scaled = model_with_scale(c);
  const TNVPModel plain = model_with_scale(0.0);
  const Vector x_prev{{0.2, -0.4}};
  const Vector target{{0.5, 1.3}};
  const Vector x_scaled{{target[0], target[1] * std::exp(-c)}};
  ASSERT_NEAR((stack_forward(scaled.f2(), x_scaled).z - target).norm(), 0.0, 1e-15);
  EXPECT_NEAR(conditional_loglik(scaled, x_scaled, x_prev) - conditional_loglik(plain, target, x_prev), c, 1e-12);
}

TEST(ConditionalLoglik, BatchAgreesWithSingle) {
  const TNVPModel m = random_model(kSmall, 5, 0.3);
  std::mt19937_64 rng(5);
  const Matrix xt = testing::normal_matrix(2, 6, rng);
  const Matrix xp = testing::normal_matrix(2, 6, rng);
  const Vector batch = conditional_loglik_batch(m, xt, xp);
  for (Index c = 0; c < 6; ++c) EXPECT_NEAR(batch[c], conditional_loglik(m, xt.col(c), xp.col(c)), 1e-12);
}

TEST(ConditionalLoglik, IntegratesToOneOnGrid) {
  const TNVPModel m = random_model(kSmall, 6, 0.2);
  const Vector x_prev{{0.3, -0.2}};
  constexpr Index kGrid = 400;
  const double lo = -6.0, step = 12.0 / kGrid;
  Matrix grid(2, kGrid * kGrid);
  for (Index i = 0; i < kGrid; ++i)
    for (Index j = 0; j < kGrid; ++j)
      grid.col(i * kGrid + j) << lo + (i + 0.5) * step, lo + (j + 0.5) * step;
  const Vector ll = conditional_loglik_batch(m, grid, x_prev.replicate(1, grid.cols()));
  EXPECT_NEAR(ll.array().exp().sum() * step * step, 1.0, 0.01);
}

TEST(NllGradient, FrozenPartsGetNoGradient) {
  const TNVPModel m = random_model({4, 2, 1, 8}, 7, 0.3);
  std::mt19937_64 rng(7);
  const Matrix xt = testing::normal_matrix(4, 3, rng);
  const Matrix xp = testing::normal_matrix(4, 3, rng);
  TNVPModel grad = m.zeros_like();
  const double nll = conditional_nll_and_gradient(m, xt, xp, grad, {true, true, false});
  EXPECT_NEAR(nll, -conditional_loglik_batch(m, xt, xp).mean(), 1e-12);
  EXPECT_TRUE(gather(grad.f1()).flatten().isZero(0.0));
  EXPECT_TRUE(gather(grad.f2()).flatten().isZero(0.0));
  EXPECT_FALSE(gather(grad.transition()).flatten().isZero(0.0));
}

TEST(Synthesis, IdentityPipelineReturnsInput) {
  const TNVPModel m = make_identity_model(3);
  auto noise = NoiseSource::zero();
  const Vector x{{1.0, -2.0, 0.5}};
  EXPECT_EQ(synthesize_next(m, x, noise), x);
  const std::vector<TNVPModel> chain(3, m);
  for (const auto& out : synthesize_chain(chain, x, noise)) EXPECT_EQ(out, x);
}

TEST(Synthesis, ZeroNoiseLeavesZeroLatentResidual) {
  const TNVPModel m = random_model(kSmall, 8, 0.3);
  auto noise = NoiseSource::zero();
  const Vector x_prev{{0.4, 1.1}};
  const Vector x_t = synthesize_next(m, x_prev, noise);
  const Vector residual =
      stack_forward(m.f2(), x_t).z - transition_apply(m.transition(), stack_forward(m.f1(), x_prev).z);
  EXPECT_LT(residual.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Synthesis, SeededNoiseIsRecoveredByForwardMap) {
  const TNVPModel m = random_model(kSmall, 9, 0.3);
  auto noise = NoiseSource::seeded(42);
  auto replay = NoiseSource::seeded(42);
  for (int i = 0; i < 20; ++i) {
    const Vector x_prev = Vector::Constant(2, 0.1 * i);
    const Vector x_t = synthesize_next(m, x_prev, noise);
    const Vector expected = transition_apply(m.transition(), stack_forward(m.f1(), x_prev).z) + replay.draw(2);
    EXPECT_LT((stack_forward(m.f2(), x_t).z - expected).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Synthesis, ChainIsDeterministicAndSequential) {
  const std::vector<TNVPModel> chain{random_model(kSmall, 10, 0.3), random_model(kSmall, 11, 0.3),
                                     random_model(kSmall, 12, 0.3)};
  const Vector x0{{0.5, -0.5}};
  auto n1 = NoiseSource::seeded(3);
  auto n2 = NoiseSource::seeded(3);
  const auto a = synthesize_chain(chain, x0, n1);
  const auto b = synthesize_chain(chain, x0, n2);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a, b);

  auto n3 = NoiseSource::seeded(3);
  Vector x = x0;
  for (std::size_t s = 0; s < chain.size(); ++s) {
    x = synthesize_next(chain[s], x, n3);
    EXPECT_EQ(x, a[s]);
  }

  auto zero = NoiseSource::zero();
  const auto single = synthesize_chain(std::span(chain).first(1), x0, zero);
  auto zero2 = NoiseSource::zero();
  EXPECT_EQ(single[0], synthesize_next(chain[0], x0, zero2));
}

TEST(Synthesis, ChainRejectsDimensionMismatch) {
  const std::vector<TNVPModel> chain{make_identity_model(2), make_identity_model(3)};
  auto noise = NoiseSource::zero();
  EXPECT_THROW(synthesize_chain(chain, Vector::Zero(2), noise), ShapeError);
}

TEST(MakeModel, SameSeedSameParameters) {
  EXPECT_EQ(gather(make_model(kSmall, 3)), gather(make_model(kSmall, 3)));
  EXPECT_NE(gather(make_model(kSmall, 3)), gather(make_model(kSmall, 4)));
  const TNVPModel m = make_model(kSmall, 3);
  EXPECT_EQ(m.transition().weight(), Matrix::Identity(2, 2));
  EXPECT_TRUE(m.transition().bias().isZero(0.0));
  const ParameterStore p = gather(m);
  EXPECT_TRUE(p.contains("f1.unit0.scale.in.weight"));
  EXPECT_TRUE(p.contains("f2.unit3.translate.out.bias"));
  EXPECT_TRUE(p.contains("transition.weight"));
}

}  // namespace
}  // namespace tnvp
