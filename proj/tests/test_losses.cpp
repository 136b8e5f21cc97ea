#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_support.hpp"

using namespace mustgan;
using namespace mustgan::fixtures;

namespace {

Var<double> score(double v) { return constant(Tensor<double>(1, 1, 1, v)); }

PerceptualExtractor<double> micro_phi() { return PerceptualExtractor<double>(micro_perceptual()); }

}  // namespace

TEST(Lsgan, Values) {
  EXPECT_DOUBLE_EQ(ops::scalar(lsgan_d_loss(score(1), score(0))), 0.0);
  EXPECT_DOUBLE_EQ(ops::scalar(lsgan_g_loss(score(1))), 0.0);
  EXPECT_DOUBLE_EQ(ops::scalar(lsgan_d_loss(score(0.5), score(0.5))), 0.25);
  EXPECT_DOUBLE_EQ(lsgan_d_loss(std::vector<double>{0.5, 1.0}, {0.5, 0.0}), 0.125);
  EXPECT_DOUBLE_EQ(lsgan_g_loss(std::vector<double>{1.0, 0.0}), 0.5);
}

TEST(Lsgan, MatchesOracleOnRandomScores) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 50; ++i) {
    const double r = u(rng), f = u(rng);
    EXPECT_NEAR(ops::scalar(lsgan_d_loss(score(r), score(f))), oracle::lsgan_d(r, f), 1e-12);
    EXPECT_NEAR(ops::scalar(lsgan_g_loss(score(f))), oracle::lsgan_g(f), 1e-12);
  }
}

TEST(Reconstruction, Values) {
  Rng rng(2);
  const auto a = random_tensor<double>({3, 4, 4}, rng);
  EXPECT_EQ(ops::scalar(reconstruction_loss(constant(a), constant(a))), 0.0);
  Tensor<double> b = a;
  for (auto& v : b.values()) v += 0.1;
  EXPECT_NEAR(ops::scalar(reconstruction_loss(constant(b), constant(a))), 0.1, 1e-12);
  const auto c = random_tensor<double>({3, 4, 4}, rng);
  EXPECT_NEAR(ops::scalar(reconstruction_loss(constant(a), constant(c))), oracle::mean_abs(oracle::to_map(a), oracle::to_map(c)), 1e-12);
  EXPECT_THROW(reconstruction_loss(constant(a), constant(Tensor<double>(3, 4, 5))), Error);
}

TEST(Gram, ConstantChannel) {
  const double c = 1.7;
  auto g = ops::gram(constant(Tensor<double>(1, 5, 3, c)))->value;
  EXPECT_EQ(g.shape(), (Shape{1, 1, 1}));
  EXPECT_NEAR(g[0], c * c, 1e-12);
}

TEST(Gram, SymmetricNonnegativeDiagonalPermutationInvariant) {
  Rng rng(3);
  const auto f = random_tensor<double>({5, 4, 6}, rng);
  const auto g = ops::gram(constant(f))->value;
  const auto gp = ops::gram(constant(permute_pixels(f, random_permutation(24, rng))))->value;
  const auto go = oracle::gram(oracle::to_map(f));
  for (int i = 0; i < 5; ++i) {
    EXPECT_GE(g.at(i, i, 0), 0.0);
    for (int j = 0; j < 5; ++j) {
      EXPECT_DOUBLE_EQ(g.at(i, j, 0), g.at(j, i, 0));
      EXPECT_NEAR(g.at(i, j, 0), gp.at(i, j, 0), 1e-12);
      EXPECT_NEAR(g.at(i, j, 0), go[i][j], 1e-12);
    }
  }
}

TEST(Perceptual, ZeroForIdenticalAndMatchesOracle) {
  const auto phi = micro_phi();
  Rng rng(4);
  const auto a = random_tensor<double>({3, 8, 8}, rng), b = random_tensor<double>({3, 8, 8}, rng);
  EXPECT_EQ(ops::scalar(perceptual_loss(constant(a), constant(a), phi)), 0.0);
  const double v = ops::scalar(perceptual_loss(constant(a), constant(b), phi));
  EXPECT_GT(v, 0.0);
  EXPECT_NEAR(v, oracle::perceptual(phi, a, b), 1e-12);
}

TEST(Style, ZeroForIdenticalAndPermutedFeatures) {
  const auto phi = micro_phi();
  Rng rng(5);
  const auto a = random_tensor<double>({3, 8, 8}, rng);
  EXPECT_EQ(ops::scalar(style_loss(constant(a), constant(a), phi)), 0.0);
  // features fed directly: a spatial permutation leaves every Gram matrix unchanged
  std::vector<Var<double>> fa, fp;
  for (int side : {8, 4}) {
    const auto f = random_tensor<double>({4, side, side}, rng);
    fa.push_back(constant(f));
    fp.push_back(constant(permute_pixels(f, random_permutation(side * side, rng))));
  }
  EXPECT_NEAR(ops::scalar(style_loss(fa, fp)), 0.0, 1e-15);
}

TEST(Style, MatchesOracle) {
  const auto phi = micro_phi();
  Rng rng(6);
  const auto a = random_tensor<double>({3, 8, 8}, rng), b = random_tensor<double>({3, 8, 8}, rng);
  EXPECT_NEAR(ops::scalar(style_loss(constant(a), constant(b), phi)), oracle::style(phi, a, b), 1e-12);
}

TEST(Overall, WeightedSum) {
  const LossWeights w;
  EXPECT_EQ(overall_loss(LossTerms{}, w), 0.0);
  EXPECT_DOUBLE_EQ(overall_loss(LossTerms{1, 1, 1, 1}, w), 157.0);
  EXPECT_EQ(overall_loss(LossTerms{3, 2, 1, 9}, LossWeights{0, 0, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(ops::scalar(overall_loss(score(1), score(1), score(1), score(1), w)), 157.0);
}

TEST(Overall, RejectsNegativeWeights) {
  EXPECT_THROW((LossWeights{-1, 1, 1, 1}.validate()), Error);
}

TEST(LossGradients, WithRespectToGeneratedImage) {
  const auto phi = micro_phi();
  Rng rng(7);
  auto gen = leaf(random_tensor<double>({3, 8, 8}, rng), true);
  auto src = constant(random_tensor<double>({3, 8, 8}, rng));
  for (auto f : std::vector<std::function<Var<double>()>>{[&] { return reconstruction_loss(gen, src); },
                                                          [&] { return perceptual_loss(gen, src, phi); },
                                                          [&] { return style_loss(gen, src, phi); }}) {
    auto r = check_gradients({gen}, f);
    EXPECT_GE(r.pass_fraction(), 0.99) << r.worst;
  }
}

TEST(Perceptual, ExtractorIsFrozen) {
  const auto phi = micro_phi();
  for (const auto& [_, v] : phi.params().entries()) EXPECT_FALSE(v->requires_grad);
}
