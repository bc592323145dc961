#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cotprobe/probe.hpp"
#include "oracles.hpp"

using namespace cotprobe;

namespace {

ProbeParams scalar_mlp(float w1, float b1, float w2, float b2) {
  auto p = ProbeParams::zeros(1, 1);
  p.w1 = {w1};
  p.b1 = {b1};
  p.w2 = {w2};
  p.b2 = b2;
  return p;
}

}  // namespace

TEST(Forward, WorkedExamples) {
  auto linear = ProbeParams::zeros(2, 0);
  linear.w1 = {0.5f, -0.25f};
  const std::vector<float> e12{1.0f, 2.0f};
  EXPECT_DOUBLE_EQ(forward(linear, e12), 0.5);

  const std::vector<float> one{1.0f}, two{2.0f};
  EXPECT_DOUBLE_EQ(forward(scalar_mlp(1, -2, 3, 0), one), 0.5);
  EXPECT_NEAR(forward(scalar_mlp(1, 0, 1, 0), two), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(forward(scalar_mlp(1, 0, 1, 0), two), 0.880797, 1e-6);
}

TEST(Forward, ShapeMismatch) {
  const auto p = ProbeParams::zeros(3, 4);
  const std::vector<float> e(2, 0.0f);
  try {
    forward(p, e);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kShapeError);
  }
}

TEST(Forward, LinearIsLogisticRegression) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  for (int t = 0; t < 50; ++t) {
    auto p = ProbeParams::zeros(5, 0);
    for (auto& v : p.w1) v = u(gen);
    p.b2 = u(gen);
    std::vector<float> e(5);
    for (auto& v : e) v = u(gen);
    double z = p.b2;
    for (int j = 0; j < 5; ++j) z += static_cast<double>(e[j]) * p.w1[j];
    EXPECT_EQ(forward(p, e), sigmoid(z));
    EXPECT_NEAR(forward(p, e), 1.0 / (1.0 + std::exp(-z)), 1e-15);
  }
}

TEST(Forward, SigmoidIsStableAtExtremes) {
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_GT(clamp_probability(sigmoid(1000.0)), 0.0);
  EXPECT_LT(clamp_probability(sigmoid(1000.0)), 1.0);
}

TEST(ImbalanceWeight, Examples) {
  EXPECT_DOUBLE_EQ(imbalance_weight({true, false, false, false}), 3.0);
  EXPECT_DOUBLE_EQ(imbalance_weight({true, true, true, false}), 1.0 / 3.0);
  try {
    imbalance_weight({true, true});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateLabels);
  }
}

TEST(Loss, WorkedExamples) {
  const auto p = ProbeParams::zeros(1, 0);  // p = 0.5 everywhere
  const std::vector<float> e{0.0f};
  const std::vector<LabeledVector> batch{{e, true}, {e, false}};
  EXPECT_NEAR(loss(p, std::span<const LabeledVector>(batch), 1.0, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(loss(p, std::span<const LabeledVector>(batch), 3.0, 2.0), 3.5 * std::log(2.0), 1e-15);
}

TEST(Loss, ClampKeepsSaturatedLossFinite) {
  auto p = ProbeParams::zeros(1, 0);
  p.b2 = 200.0f;
  const std::vector<float> e{0.0f};
  const std::vector<LabeledVector> pos{{e, true}}, neg{{e, false}};
  const double l = loss(p, std::span<const LabeledVector>(pos), 2.0, 1.5);
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_NEAR(l, -3.0 * std::log(1.0 - 1e-7), 1e-12);
  EXPECT_NEAR(loss(p, std::span<const LabeledVector>(neg), 2.0, 1.5), -std::log(1e-7), 1e-9);
}

TEST(Loss, DoublingAlphaDoublesPositiveTerm) {
  std::mt19937_64 gen(5);
  for (int t = 0; t < 20; ++t) {
    const auto draw = oracle::gradient_draw(gen, 6, t % 2 ? 0 : 4);
    const auto params = draw.params.cast<float>();
    const auto a = loss_terms(params, std::span<const LabeledVector>(draw.batch), draw.w, draw.alpha);
    const auto b = loss_terms(params, std::span<const LabeledVector>(draw.batch), draw.w, 2.0 * draw.alpha);
    EXPECT_DOUBLE_EQ(b.positive, 2.0 * a.positive);
    EXPECT_EQ(b.negative, a.negative);
  }
}

TEST(Loss, MatchesDirectFormula) {
  std::mt19937_64 gen(8);
  for (int t = 0; t < 40; ++t) {
    const auto draw = oracle::gradient_draw(gen, 5, t % 2 ? 0 : 3);
    const std::span<const LabeledVector> batch(draw.batch);
    EXPECT_NEAR(loss(draw.params, batch, draw.w, draw.alpha), oracle::direct_loss(draw.params, batch, draw.w, draw.alpha),
                1e-12);
  }
}

TEST(Gradients, MatchFiniteDifferences) {
  std::mt19937_64 gen(21);
  double worst = 0.0;
  for (int t = 0; t < 60; ++t) {
    const std::size_t m = 1 + gen() % 32;
    const std::size_t d = t % 2 ? 0 : 16;
    const auto draw = oracle::gradient_draw(gen, m, d);
    const std::span<const LabeledVector> batch(draw.batch);
    const auto analytic = gradients(draw.params, batch, draw.w, draw.alpha);
    const auto numeric = oracle::finite_difference_gradient(draw.params, batch, draw.w, draw.alpha);
    std::size_t i = 0;
    analytic.for_each([&](double g) { worst = std::max(worst, oracle::relative_error(g, numeric[i++])); });
    ASSERT_EQ(i, numeric.size());
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Gradients, LinearIsMeanWeightedResidualTimesInput) {
  std::mt19937_64 gen(2);
  const auto draw = oracle::gradient_draw(gen, 4, 0);
  const std::span<const LabeledVector> batch(draw.batch);
  const auto g = gradients(draw.params, batch, draw.w, draw.alpha);
  std::vector<double> expect(4, 0.0);
  double expect_b = 0.0;
  for (const auto& s : batch) {
    const double p = forward(draw.params, s.embedding);
    const double r = s.label ? draw.w * draw.alpha * (p - 1.0) : p;
    for (int j = 0; j < 4; ++j) expect[j] += r * s.embedding[j] / static_cast<double>(batch.size());
    expect_b += r / static_cast<double>(batch.size());
  }
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(g.w1[j], expect[j], 1e-14);
  EXPECT_NEAR(g.b2, expect_b, 1e-14);
}

TEST(Gradients, SaturatedPositiveIsNearZero) {
  auto p = BasicProbeParams<double>::zeros(2, 0);
  p.b2 = 30.0;
  const std::vector<float> e{0.5f, -0.5f};
  const std::vector<LabeledVector> batch{{e, true}};
  const auto g = gradients(p, std::span<const LabeledVector>(batch), 1.0, 1.0);
  g.for_each([](double v) { EXPECT_LT(std::abs(v), 1e-9); });
}

TEST(Params, RandomInitIsBoundedAndShaped) {
  Rng rng(1);
  const auto p = ProbeParams::random_init(16, 8, rng);
  p.check_shape();
  EXPECT_EQ(p.parameter_count(), 16u * 8 + 8 + 8 + 1);
  for (float v : p.w1) EXPECT_LE(std::abs(v), 0.25f);
  EXPECT_EQ(ProbeParams::random_init(16, 0, rng).parameter_count(), 17u);
}
