#include <cmath>

#include <gtest/gtest.h>

#include "atras/mlp.hpp"
#include "support/oracles.hpp"

using namespace atras;
using atras::testing::random_labels;
using atras::testing::random_matrix;

TEST(Architecture, MnistShapesAndParameterCount) {
  const ArchitectureSpec arch{{64, 512}};
  const auto p = init_params(arch, 1);
  ASSERT_EQ(p.layers.size(), 3u);
  EXPECT_EQ(p.layers[0].weights.rows(), 784u);
  EXPECT_EQ(p.layers[0].weights.cols(), 64u);
  EXPECT_EQ(p.layers[1].weights.rows(), 64u);
  EXPECT_EQ(p.layers[1].weights.cols(), 512u);
  EXPECT_EQ(p.layers[2].weights.rows(), 512u);
  EXPECT_EQ(p.layers[2].weights.cols(), 10u);
  // 784*64+64 + 64*512+512 + 512*10+10
  EXPECT_EQ(p.parameter_count(), 88650u);
}

TEST(Architecture, ZeroWidthRejected) {
  try {
    init_params(ArchitectureSpec{{16, 0, 8}}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArchitecture);
  }
}

TEST(Architecture, FormatAndParseHidden) {
  const std::vector<std::size_t> h{64, 512};
  EXPECT_EQ(format_hidden(h), "[64, 512]");
  EXPECT_EQ(format_hidden({}), "[]");
  EXPECT_EQ(parse_hidden("[64, 512]"), h);
  EXPECT_EQ(parse_hidden("64,512"), h);
  EXPECT_EQ(parse_hidden("{64, 512}"), h);
  EXPECT_TRUE(parse_hidden("[]").empty());
  EXPECT_THROW(parse_hidden("[64, x]"), Error);
}

TEST(Init, SameSeedBitIdentical) {
  const ArchitectureSpec arch{{32, 16}, 20, 10};
  EXPECT_EQ(init_params(arch, 9), init_params(arch, 9));
  EXPECT_NE(init_params(arch, 9), init_params(arch, 10));
}

TEST(Init, HeUniformBoundsAndZeroBias) {
  const ArchitectureSpec arch{{50}, 24, 10};
  const auto p = init_params(arch, 3);
  const double bound0 = std::sqrt(6.0 / 24);
  const double bound1 = std::sqrt(6.0 / 50);
  for (double w : p.layers[0].weights.values()) EXPECT_LE(std::abs(w), bound0);
  for (double w : p.layers[1].weights.values()) EXPECT_LE(std::abs(w), bound1);
  for (const auto& l : p.layers)
    for (double b : l.bias) EXPECT_EQ(b, 0.0);
}

TEST(Forward, BatchShape) {
  Rng rng(1);
  const auto p = init_params(ArchitectureSpec{{64, 512}}, 2);
  const auto out = forward(p, random_matrix(rng, 32, 784, 0, 1));
  EXPECT_EQ(out.logits.rows(), 32u);
  EXPECT_EQ(out.logits.cols(), 10u);
}

TEST(Forward, ZeroModelGivesUniformProbabilities) {
  auto p = init_params(ArchitectureSpec{{8}, 5, 10}, 1);
  for (auto& l : p.layers) std::fill(l.weights.values().begin(), l.weights.values().end(), 0.0);
  Rng rng(2);
  const auto logits = forward(p, random_matrix(rng, 3, 5)).logits;
  const auto y = random_labels(rng, 3, 10);
  const auto sce = softmax_cross_entropy(logits, y);
  for (double v : sce.probs.values()) EXPECT_DOUBLE_EQ(v, 0.1);
}

TEST(Forward, HandSizedNetwork) {
  ModelParams p;
  p.arch = ArchitectureSpec{{2}, 2, 2};
  p.layers.push_back({Matrix{{1.0, -2.0}, {0.5, 1.5}}, {0.1, -0.2}});
  p.layers.push_back({Matrix{{2.0, -1.0}, {-0.5, 3.0}}, {0.25, 0.0}});
  const Matrix x{{0.3, 0.7}, {-1.0, 0.2}};
  const auto logits = forward(p, x).logits;
  for (std::size_t r = 0; r < 2; ++r) {
    const double x0 = x(r, 0), x1 = x(r, 1);
    const double h0 = std::max(0.0, x0 * 1.0 + x1 * 0.5 + 0.1);
    const double h1 = std::max(0.0, x0 * -2.0 + x1 * 1.5 - 0.2);
    EXPECT_NEAR(logits(r, 0), h0 * 2.0 + h1 * -0.5 + 0.25, 1e-12);
    EXPECT_NEAR(logits(r, 1), h0 * -1.0 + h1 * 3.0, 1e-12);
  }
}

TEST(Forward, InferencePathMatchesTracedPath) {
  Rng rng(4);
  for (auto act : {Activation::relu, Activation::tanh}) {
    ArchitectureSpec arch{{7, 5, 3}, 6, 4, act};
    const auto p = init_params(arch, 5);
    const auto x = random_matrix(rng, 9, 6);
    EXPECT_EQ(forward(p, x).logits, predict_logits(p, x));
  }
}

TEST(Forward, WrongInputWidthThrows) {
  const auto p = init_params(ArchitectureSpec{{4}, 6, 3}, 1);
  try {
    forward(p, Matrix(2, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(Backward, FiniteDifferencesOnFiveSeven) {
  Rng rng(17);
  const ArchitectureSpec arch{{5, 7}, 6, 4};
  const auto p = init_params(arch, 8);
  const auto x = random_matrix(rng, 3, 6, 0, 1);
  const auto y = random_labels(rng, 3, 4);
  const auto r = atras::testing::finite_difference_check(p, x, y, 1e-5);
  EXPECT_LT(r.max_param_error, 1e-5) << r.worst;
  EXPECT_LT(r.max_input_error, 1e-5) << r.worst;
}

TEST(Backward, FiniteDifferencesOverRandomArchitectures) {
  const auto r = atras::testing::gradient_suite(2024, 20);
  EXPECT_EQ(r.architectures, 20u);
  EXPECT_LT(r.max_error, 1e-5) << r.worst;
}

TEST(Backward, TanhFiniteDifferences) {
  Rng rng(18);
  const ArchitectureSpec arch{{6, 4}, 5, 3, Activation::tanh};
  const auto r = atras::testing::finite_difference_check(init_params(arch, 2),
                                                         random_matrix(rng, 4, 5),
                                                         random_labels(rng, 4, 3));
  EXPECT_LT(std::max(r.max_param_error, r.max_input_error), 1e-5) << r.worst;
}

TEST(Backward, LinearModelClosedForm) {
  Rng rng(19);
  const ArchitectureSpec arch{{}, 8, 5};
  auto p = init_params(arch, 3);
  for (double& b : p.layers[0].bias) b = rng.uniform(-1, 1);
  const auto x = random_matrix(rng, 6, 8, 0, 1);
  const auto y = random_labels(rng, 6, 5);
  const auto g = backward(p, x, y);
  // d loss / d x = (p - onehot) W^T / rows
  const auto logits = atras::testing::naive_matmul(x, p.layers[0].weights);
  for (std::size_t r = 0; r < 6; ++r) {
    std::vector<double> prob(5);
    double peak = -1e300, z = 0;
    for (std::size_t c = 0; c < 5; ++c) peak = std::max(peak, logits(r, c) + p.layers[0].bias[c]);
    for (std::size_t c = 0; c < 5; ++c) z += prob[c] = std::exp(logits(r, c) + p.layers[0].bias[c] - peak);
    for (auto& v : prob) v /= z;
    for (std::size_t i = 0; i < 8; ++i) {
      double expect = 0;
      for (std::size_t c = 0; c < 5; ++c)
        expect += p.layers[0].weights(i, c) * (prob[c] - (c == y[r] ? 1.0 : 0.0)) / 6.0;
      EXPECT_NEAR(g.input_grad(r, i), expect, 1e-10);
    }
  }
}

TEST(Backward, DuplicatedBatchKeepsLossAndScalesInputGradient) {
  Rng rng(20);
  const auto p = init_params(ArchitectureSpec{{9}, 4, 3}, 1);
  const auto x = random_matrix(rng, 3, 4, 0, 1);
  const auto y = random_labels(rng, 3, 3);
  Matrix xx(6, 4);
  std::vector<std::uint8_t> yy = y;
  yy.insert(yy.end(), y.begin(), y.end());
  std::copy(x.values().begin(), x.values().end(), xx.data());
  std::copy(x.values().begin(), x.values().end(), xx.data() + 12);
  const auto g1 = backward(p, x, y);
  const auto g2 = backward(p, xx, yy);
  EXPECT_NEAR(g1.loss, g2.loss, 1e-14);
  // Mean reduction: each duplicated row carries half the weight, so the
  // per-row gradient halves while its direction (and its sign) is unchanged.
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(g2.input_grad(r, i) * 2, g1.input_grad(r, i), 1e-15);
      EXPECT_EQ(g2.input_grad(r, i), g2.input_grad(r + 3, i));
    }
  for (std::size_t k = 0; k < p.layers.size(); ++k)
    for (std::size_t i = 0; i < g1.param_grads[k].weights.size(); ++i)
      EXPECT_NEAR(g1.param_grads[k].weights.values()[i], g2.param_grads[k].weights.values()[i], 1e-14);
}

TEST(Backward, Deterministic) {
  Rng rng(23);
  const auto p = init_params(ArchitectureSpec{{12, 6}, 10, 10}, 4);
  const auto x = random_matrix(rng, 5, 10, 0, 1);
  const auto y = random_labels(rng, 5, 10);
  const auto a = backward(p, x, y);
  const auto b = backward(p, x, y);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.input_grad, b.input_grad);
  for (std::size_t k = 0; k < a.param_grads.size(); ++k) EXPECT_EQ(a.param_grads[k], b.param_grads[k]);
}

TEST(Backward, NeedSelectsOutputs) {
  Rng rng(24);
  const auto p = init_params(ArchitectureSpec{{3}, 4, 2}, 4);
  const auto x = random_matrix(rng, 2, 4);
  const auto y = random_labels(rng, 2, 2);
  EXPECT_TRUE(backward(p, x, y, GradientNeed::params_only).input_grad.empty());
  EXPECT_TRUE(backward(p, x, y, GradientNeed::input_only).param_grads.empty());
  EXPECT_EQ(backward(p, x, y, GradientNeed::input_only).input_grad, backward(p, x, y).input_grad);
}

TEST(Accuracy, ArgmaxTiesGoToLowestIndex) {
  const double row[] = {0.5, 2.0, 2.0, -1.0};
  EXPECT_EQ(argmax(row), 1u);
  const double flat[] = {0.0, 0.0, 0.0};
  EXPECT_EQ(argmax(flat), 0u);
}

TEST(Accuracy, LogitShiftDoesNotChangePrediction) {
  Rng rng(25);
  auto p = init_params(ArchitectureSpec{{6}, 5, 4}, 2);
  const auto x = random_matrix(rng, 50, 5, 0, 1);
  const auto y = random_labels(rng, 50, 4);
  const Dataset d{DatasetName::mnist, x, y};
  const double before = evaluate_accuracy(p, d);
  for (double& b : p.layers.back().bias) b += 3.25;
  EXPECT_EQ(evaluate_accuracy(p, d), before);
}

TEST(Accuracy, PerfectModelScoresOne) {
  // Linear model whose weights copy a one-hot input to the matching logit.
  ModelParams p = init_params(ArchitectureSpec{{}, 10, 10}, 1);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j) p.layers[0].weights(i, j) = i == j ? 1.0 : 0.0;
  Dataset d{DatasetName::mnist, Matrix(30, 10), std::vector<std::uint8_t>(30)};
  for (std::size_t r = 0; r < 30; ++r) {
    d.labels[r] = static_cast<std::uint8_t>(r % 10);
    d.features(r, r % 10) = 1.0;
  }
  EXPECT_EQ(evaluate_accuracy(p, d), 1.0);
}

TEST(Accuracy, ZeroModelPredictsClassZero) {
  ModelParams p = init_params(ArchitectureSpec{{4}, 3, 10}, 1);
  for (auto& l : p.layers) std::fill(l.weights.values().begin(), l.weights.values().end(), 0.0);
  Rng rng(26);
  Dataset d{DatasetName::mnist, random_matrix(rng, 5000, 3), random_labels(rng, 5000, 10)};
  const auto zeros = std::count(d.labels.begin(), d.labels.end(), 0);
  const double acc = evaluate_accuracy(p, d);
  EXPECT_EQ(acc, static_cast<double>(zeros) / 5000.0);
  EXPECT_NEAR(std::round(acc * 5000) / 5000, acc, 1e-15);
}
