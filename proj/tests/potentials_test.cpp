#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "monostage/errors.hpp"
#include "monostage/potentials.hpp"

namespace monostage {
namespace {

Matrix random_features(std::mt19937_64& rng, std::size_t T, std::size_t D) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix f(T, D);
  for (double& v : f.values()) v = normal(rng);
  return f;
}

TEST(UnaryPotentials, ZeroHeadIsUniform) {
  const auto model = TwoStreamModel::zeros(4, 3);
  std::mt19937_64 rng(1);
  const auto u = unary_potentials(random_features(rng, 5, 3), model);
  for (double v : u.values()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(UnaryPotentials, TwoClassSoftmax) {
  auto model = TwoStreamModel::zeros(2, 1);
  model.unary_weight(0, 0) = 1.0;
  model.unary_weight(1, 0) = -1.0;
  Matrix f(2, 1);
  f(0, 0) = 0.0;
  f(1, 0) = 1.0;
  const auto u = unary_potentials(f, model);
  EXPECT_NEAR(u(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(u(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(u(1, 0), 0.8807970779778824, 1e-12);
  EXPECT_NEAR(u(1, 1), 1.0 - 0.8807970779778824, 1e-12);
}

TEST(UnaryPotentials, DimensionMismatch) {
  const auto model = TwoStreamModel::zeros(3, 4);
  EXPECT_THROW(unary_potentials(Matrix(5, 3), model), InvalidInput);
  EXPECT_THROW(transition_probs(Matrix(5, 3), model), InvalidInput);
}

TEST(TransitionProbs, ZeroHeadIsHalf) {
  const auto model = TwoStreamModel::zeros(3, 2);
  std::mt19937_64 rng(2);
  const auto rho = transition_probs(random_features(rng, 6, 2), model);
  ASSERT_EQ(rho.rows(), 5u);
  for (double v : rho.values()) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(TransitionProbs, BiasOnly) {
  auto model = TwoStreamModel::zeros(3, 2);
  model.transition_bias = {0.0, 10.0};
  std::mt19937_64 rng(3);
  const auto rho = transition_probs(random_features(rng, 4, 2), model);
  for (std::size_t t = 0; t < rho.rows(); ++t) {
    EXPECT_NEAR(rho(t, 0), 4.5397868702434395e-05, 1e-15);
    EXPECT_NEAR(rho(t, 1), 0.9999546021312976, 1e-15);
  }
}

TEST(TransitionProbs, DifferenceWeightsSeeOnlyChange) {
  // W acts on f_{t+1} - f_t: identical consecutive frames give the bias-only
  // softmax regardless of the frame content.
  auto model = TwoStreamModel::zeros(2, 3);
  for (std::size_t d = 0; d < 3; ++d) {
    model.transition_weight(1, d) = -2.0 + static_cast<double>(d);
    model.transition_weight(1, 3 + d) = 2.0 - static_cast<double>(d);
  }
  Matrix f(3, 3);
  for (std::size_t d = 0; d < 3; ++d) {
    f(0, d) = 5.0 * static_cast<double>(d) - 1.0;
    f(1, d) = f(0, d);
    f(2, d) = f(0, d) + 1.0;
  }
  const auto rho = transition_probs(f, model);
  EXPECT_NEAR(rho(0, 0), 0.5, 1e-12);
  EXPECT_GT(rho(1, 1), 0.5);
}

TEST(TransitionProbs, NeedsTwoFrames) {
  const auto model = TwoStreamModel::zeros(3, 2);
  EXPECT_THROW(transition_probs(Matrix(1, 2), model), InvalidInput);
}

TEST(HeadOutputs, RowsAreDistributions) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto model = TwoStreamModel::initialize(2 + trial % 9, 1 + trial % 5, trial);
    const auto f = random_features(rng, 7, model.feature_dim);
    for (const auto& m : {unary_potentials(f, model), transition_probs(f, model)}) {
      for (std::size_t t = 0; t < m.rows(); ++t) {
        double s = 0.0;
        for (double v : m.row(t)) {
          EXPECT_GE(v, 0.0);
          EXPECT_LE(v, 1.0);
          s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
      }
    }
  }
}

TEST(AssemblePairwise, CaseStructure) {
  Matrix rho(1, 2);
  rho(0, 0) = 0.7;
  rho(0, 1) = 0.3;
  const auto block = assemble_pairwise(rho, 3);
  const double expected[3][3] = {{0.7, 0.3, 0.3}, {0.0, 0.7, 0.3}, {0.0, 0.0, 0.7}};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(block.mask.allowed(i, j), i <= j);
      if (i <= j) EXPECT_EQ(block.pairwise(0, i, j), expected[i][j]);
    }
  }
}

TEST(AssemblePairwise, CertainNoChange) {
  Matrix rho(2, 2);
  rho(0, 0) = rho(1, 0) = 1.0;
  const auto block = assemble_pairwise(rho, 4);
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = i; j < 4; ++j) EXPECT_EQ(block.pairwise(t, i, j), i == j ? 1.0 : 0.0);
    }
  }
}

TEST(AssemblePairwise, SingleClassAddsStayScores) {
  Matrix rho(3, 2);
  rho(0, 0) = 0.2;
  rho(1, 0) = 0.5;
  rho(2, 0) = 0.9;
  auto block = assemble_pairwise(rho, 1);
  PotentialTable pot{Matrix(4, 1), std::move(block.pairwise), std::move(block.mask)};
  EXPECT_NEAR(log_partition(pot), 0.2 + 0.5 + 0.9, 1e-12);
  EXPECT_THROW(assemble_pairwise(rho, 0), InvalidInput);
}

TEST(AssemblePairwise, ConstantDiagonalAndUpperTriangle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix rho(6, 2);
  for (std::size_t t = 0; t < 6; ++t) {
    rho(t, 0) = unit(rng);
    rho(t, 1) = 1.0 - rho(t, 0);
  }
  const auto block = assemble_pairwise(rho, 7);
  for (std::size_t t = 0; t < 6; ++t) {
    for (std::size_t i = 0; i < 7; ++i) {
      EXPECT_EQ(block.pairwise(t, i, i), rho(t, 0));
      for (std::size_t j = i + 1; j < 7; ++j) EXPECT_EQ(block.pairwise(t, i, j), rho(t, 1));
    }
  }
}

TEST(SmoothUnary, KernelWeights) {
  EXPECT_EQ(kSmoothingKernel[0], 1.0 / 13.0);
  EXPECT_EQ(kSmoothingKernel[1], 3.0 / 13.0);
  EXPECT_EQ(kSmoothingKernel[2], 5.0 / 13.0);
  EXPECT_EQ(kSmoothingKernel[3], 3.0 / 13.0);
  EXPECT_EQ(kSmoothingKernel[4], 1.0 / 13.0);
}

TEST(SmoothUnary, OneHotInterior) {
  Matrix u(1, 9);
  u(0, 4) = 1.0;
  const auto s = smooth_unary(u);
  const double expected[9] = {0, 0, 1.0 / 13, 3.0 / 13, 5.0 / 13, 3.0 / 13, 1.0 / 13, 0, 0};
  for (std::size_t c = 0; c < 9; ++c) EXPECT_EQ(s(0, c), expected[c]);
}

TEST(SmoothUnary, UniformRowBoundaries) {
  const double v = 0.37;
  Matrix u(2, 11, v);
  const auto s = smooth_unary(u);
  for (std::size_t c = 2; c + 2 < 11; ++c) EXPECT_NEAR(s(0, c), v, 1e-15);
  EXPECT_NEAR(s(0, 0), 9.0 * v / 13.0, 1e-15);
  EXPECT_NEAR(s(0, 10), 9.0 * v / 13.0, 1e-15);
  EXPECT_NEAR(s(0, 1), 12.0 * v / 13.0, 1e-15);
}

TEST(SmoothUnary, SmallClassCountsAreZeroPadded) {
  Matrix u(1, 1, 1.0);
  EXPECT_NEAR(smooth_unary(u)(0, 0), 5.0 / 13.0, 1e-15);
  Matrix two(1, 2);
  two(0, 0) = 1.0;
  const auto s = smooth_unary(two);
  EXPECT_NEAR(s(0, 0), 5.0 / 13.0, 1e-15);
  EXPECT_NEAR(s(0, 1), 3.0 / 13.0, 1e-15);
}

TEST(SmoothUnary, Linear) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t C = 1 + trial % 12;
    Matrix a(3, C), b(3, C), mix(3, C);
    const double x = unit(rng), y = unit(rng);
    for (std::size_t i = 0; i < a.values().size(); ++i) {
      a.values()[i] = unit(rng);
      b.values()[i] = unit(rng);
      mix.values()[i] = x * a.values()[i] + y * b.values()[i];
    }
    const auto sa = smooth_unary(a), sb = smooth_unary(b), sm = smooth_unary(mix);
    for (std::size_t i = 0; i < sm.values().size(); ++i) {
      EXPECT_NEAR(sm.values()[i], x * sa.values()[i] + y * sb.values()[i], 1e-12);
    }
  }
}

TEST(BuildPotentials, SmoothingOnlyTouchesUnary) {
  std::mt19937_64 rng(7);
  const auto model = TwoStreamModel::initialize(5, 3, 9);
  const auto f = random_features(rng, 6, 3);
  const auto raw = build_potentials(f, model, false);
  const auto smooth = build_potentials(f, model, true);
  EXPECT_EQ(raw.pairwise, smooth.pairwise);
  EXPECT_EQ(smooth.unary, smooth_unary(raw.unary));
  const auto plain = unary_only_potentials(f, model, true);
  for (double v : plain.pairwise.values()) EXPECT_EQ(v, 0.0);
}

TEST(TwoStreamModel, InitializationBoundsAndDeterminism) {
  const auto a = TwoStreamModel::initialize(11, 16, 42);
  const auto b = TwoStreamModel::initialize(11, 16, 42);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, TwoStreamModel::initialize(11, 16, 43));
  for (double w : a.unary_weight.values()) EXPECT_LE(std::abs(w), 0.25);
  for (double w : a.transition_weight.values()) EXPECT_LE(std::abs(w), 1.0 / std::sqrt(32.0));
  for (double v : a.unary_bias) EXPECT_EQ(v, 0.0);
  for (double v : a.transition_bias) EXPECT_EQ(v, 0.0);
}

TEST(Checkpoint, RoundTripIsExact) {
  Checkpoint ckpt{TwoStreamModel::initialize(6, 4, 1), false};
  ckpt.model.unary_bias[2] = 1.0 / 3.0;
  ckpt.model.transition_bias[1] = -1e-300;
  const std::string text = checkpoint_to_json(ckpt);
  const Checkpoint back = checkpoint_from_json(text);
  EXPECT_EQ(back, ckpt);
  EXPECT_EQ(checkpoint_to_json(back), text);
}

TEST(Checkpoint, MalformedInput) {
  EXPECT_THROW(checkpoint_from_json("{"), DataError);
  EXPECT_THROW(checkpoint_from_json("{\"num_classes\": 2}"), DataError);
  Checkpoint ckpt{TwoStreamModel::zeros(2, 1), true};
  std::string text = checkpoint_to_json(ckpt);
  text.replace(text.find("\"feature_dim\": 1"), 16, "\"feature_dim\": 2");
  EXPECT_THROW(checkpoint_from_json(text), DataError);
}

}  // namespace
}  // namespace monostage
