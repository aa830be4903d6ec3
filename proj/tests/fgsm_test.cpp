#include <cmath>

#include <gtest/gtest.h>

#include "atras/fgsm.hpp"
#include "support/oracles.hpp"

using namespace atras;
using atras::testing::random_labels;
using atras::testing::random_matrix;

TEST(Fgsm, PropertySuite) {
  const auto r = atras::testing::fgsm_property_suite(77, 500);
  EXPECT_EQ(r.cases, 500u);
  EXPECT_EQ(r.linear_cases, 250u);
  EXPECT_EQ(r.budget_violations, 0u) << "worst excess " << r.worst_budget_excess;
  EXPECT_EQ(r.range_violations, 0u);
  EXPECT_EQ(r.identity_violations, 0u);
  EXPECT_EQ(r.loss_decreases, 0u);
}

TEST(Fgsm, StepIsSignOfInputGradient) {
  Rng rng(3);
  const auto p = init_params(ArchitectureSpec{{6}, 5, 3}, 2);
  const auto x = random_matrix(rng, 4, 5, 0.3, 0.7);
  const auto y = random_labels(rng, 4, 3);
  AttackConfig cfg;
  cfg.epsilon = 0.05;
  const auto adv = fgsm_batch(p, x, y, cfg);
  const auto g = backward(p, x, y).input_grad;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = g.values()[i] > 0 ? 1.0 : (g.values()[i] < 0 ? -1.0 : 0.0);
    EXPECT_DOUBLE_EQ(adv.values()[i], x.values()[i] + 0.05 * s);
  }
}

TEST(Fgsm, TargetedStepDescendsTargetLoss) {
  Rng rng(4);
  const auto p = init_params(ArchitectureSpec{{}, 6, 4}, 5);
  const auto x = random_matrix(rng, 5, 6, 0.2, 0.8);
  const auto y = random_labels(rng, 5, 4);
  AttackConfig cfg;
  cfg.epsilon = 0.1;
  cfg.target_label = 2;
  const auto adv = fgsm_batch(p, x, y, cfg);
  const std::vector<std::uint8_t> t(5, 2);
  const auto g = backward(p, x, t).input_grad;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = g.values()[i] > 0 ? 1.0 : (g.values()[i] < 0 ? -1.0 : 0.0);
    EXPECT_DOUBLE_EQ(adv.values()[i], x.values()[i] - 0.1 * s);
  }
  // Linear model: the target-label loss does not increase.
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_LE(atras::testing::row_loss(p, adv.row(r), 2),
              atras::testing::row_loss(p, x.row(r), 2) + 1e-12);
  }
}

TEST(Fgsm, ZeroGradientPixelsUntouched) {
  // Input 0 of this linear model has zero weights into every class, so its
  // gradient is exactly zero.
  auto p = init_params(ArchitectureSpec{{}, 3, 3}, 1);
  for (std::size_t c = 0; c < 3; ++c) p.layers[0].weights(0, c) = 0.0;
  const Matrix x{{0.5, 0.5, 0.5}};
  const std::uint8_t y[] = {1};
  AttackConfig cfg;
  cfg.epsilon = 0.2;
  const auto adv = fgsm_batch(p, x, y, cfg);
  EXPECT_EQ(adv(0, 0), 0.5);
}

TEST(Fgsm, InvalidConfigRejected) {
  const auto p = init_params(ArchitectureSpec{{}, 2, 2}, 1);
  const Matrix x{{0.5, 0.5}};
  const std::uint8_t y[] = {0};
  AttackConfig bad;
  bad.epsilon = -0.1;
  EXPECT_THROW(fgsm_batch(p, x, y, bad), Error);
  AttackConfig bounds;
  bounds.clip_lo = 1;
  bounds.clip_hi = 0;
  EXPECT_THROW(fgsm_batch(p, x, y, bounds), Error);
  AttackConfig target;
  target.target_label = 12;
  EXPECT_THROW(fgsm_batch(p, x, y, target), Error);
  const std::uint8_t two[] = {0, 1};
  try {
    fgsm_batch(p, x, two, AttackConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(Fgsm, DatasetChunkingMatchesPerChunkCalls) {
  const auto d = atras::testing::learnable_dataset(5, 1200, 12);
  const auto p = init_params(ArchitectureSpec{{8}, 12, 10}, 3);
  const auto adv = fgsm_dataset(p, d, AttackConfig{});
  ASSERT_EQ(adv.size(), 1200u);
  EXPECT_EQ(adv.labels, d.labels);
  Matrix tail(200, 12, std::vector<double>(d.features.data() + 1000 * 12, d.features.data() + 1200 * 12));
  const auto expect = fgsm_batch(p, tail, std::span(d.labels).subspan(1000), AttackConfig{});
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_EQ(adv.features.values()[1000 * 12 + i], expect.values()[i]);
}

TEST(RobustAccuracy, ZeroEpsilonEqualsClean) {
  const auto d = atras::testing::learnable_dataset(6, 300, 10);
  const auto p = init_params(ArchitectureSpec{{16}, 10, 10}, 4);
  AttackConfig cfg;
  cfg.epsilon = 0.0;
  EXPECT_EQ(robust_accuracy(p, d, cfg), evaluate_accuracy(p, d));
}

TEST(RobustAccuracy, RepeatedCallsBitIdentical) {
  const auto d = atras::testing::learnable_dataset(7, 300, 10);
  const auto p = init_params(ArchitectureSpec{{16, 8}, 10, 10}, 4);
  const AttackConfig cfg;
  EXPECT_EQ(robust_accuracy(p, d, cfg), robust_accuracy(p, d, cfg));
}

TEST(RobustAccuracy, SourceModelChangesOnlyTheCrafting) {
  const auto d = atras::testing::learnable_dataset(8, 200, 10);
  const auto target = init_params(ArchitectureSpec{{16}, 10, 10}, 1);
  const auto source = init_params(ArchitectureSpec{{4, 4}, 10, 10}, 2);
  const AttackConfig cfg;
  EXPECT_EQ(robust_accuracy(target, d, cfg, &source),
            evaluate_accuracy(target, fgsm_dataset(source, d, cfg)));
  EXPECT_EQ(robust_accuracy(target, d, cfg, &target), robust_accuracy(target, d, cfg));
  const auto other = init_params(ArchitectureSpec{{4}, 9, 10}, 2);
  EXPECT_THROW(robust_accuracy(target, d, cfg, &other), Error);
}

TEST(DefaultEpsilon, PerDataset) {
  EXPECT_EQ(default_epsilon(DatasetName::mnist), 0.1);
  EXPECT_EQ(default_epsilon(DatasetName::cifar10), 8.0 / 255.0);
}
