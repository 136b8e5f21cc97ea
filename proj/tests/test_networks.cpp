#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace mustgan;
using namespace mustgan::fixtures;

namespace {

void zero_store(ParamStore<double>& s) {
  for (auto& [_, v] : s.entries()) v->value.fill(0.0);
}

std::vector<Var<double>> random_features(const std::vector<int>& channels, const std::vector<int>& sides, Rng& rng) {
  std::vector<Var<double>> f;
  for (std::size_t i = 0; i < channels.size(); ++i)
    f.push_back(constant(random_tensor<double>({channels[i], sides[i], sides[i]}, rng)));
  return f;
}

MustOptions small_must(bool ca = true, bool multi = true) {
  MustOptions o;
  o.feature_channels = {4, 8, 8, 8};
  o.reduced_channels = {4, 4, 8, 8};
  o.block_channels = {8, 8, 4, 4};
  o.level_for_block = {4, 3, 2, 1};
  o.attention_reduction = 2;
  o.channel_attention = ca;
  o.multi_level = multi;
  return o;
}

}  // namespace

TEST(PoseEncoder, DefaultShapes) {
  ParamStore<float> store;
  Rng rng(1);
  PoseEncoder<float> enc(store, "pe", 31, {64, 128, 256}, rng);
  auto out = enc(constant(Tensor<float>(31, 64, 64)));
  EXPECT_EQ(out->shape(), (Shape{256, 8, 8}));
}

TEST(PoseEncoder, ZeroInputZeroBiasGivesZero) {
  ParamStore<double> store;
  Rng rng(2);
  PoseEncoder<double> enc(store, "pe", 5, {4, 4}, rng);
  auto out = enc(constant(Tensor<double>(5, 8, 8)));
  for (double v : out->value.values()) EXPECT_EQ(v, 0.0);
}

TEST(PoseEncoder, DeterministicAndRejectsBadShape) {
  ParamStore<double> store;
  Rng rng(3);
  PoseEncoder<double> enc(store, "pe", 5, {4, 4}, rng);
  auto x = constant(random_tensor<double>({5, 8, 8}, rng));
  EXPECT_EQ(enc(x)->value, enc(x)->value);
  EXPECT_THROW(enc(constant(Tensor<double>(4, 8, 8))), Error);
  EXPECT_THROW(enc(constant(Tensor<double>(5, 6, 8))), Error);
}

TEST(AppearanceEncoder, DefaultShapes) {
  ParamStore<float> store;
  Rng rng(4);
  AppearanceEncoder<float> enc(store, "ae", 24, {32, 64, 128, 256}, {2, 2, 2, 2}, rng);
  auto f = enc(constant(Tensor<float>(24, 64, 64)));
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[0]->shape(), (Shape{32, 32, 32}));
  EXPECT_EQ(f[1]->shape(), (Shape{64, 16, 16}));
  EXPECT_EQ(f[2]->shape(), (Shape{128, 8, 8}));
  EXPECT_EQ(f[3]->shape(), (Shape{256, 4, 4}));
}

TEST(AppearanceEncoder, FeaturesSeeStructure) {
  ParamStore<double> store;
  Rng rng(5);
  AppearanceEncoder<double> enc(store, "ae", 24, {4, 4, 8, 8}, {1, 2, 2, 2}, rng);
  const auto x = random_tensor<double>({24, 8, 8}, rng);
  const auto xp = permute_pixels(x, random_permutation(64, rng));
  EXPECT_GT(max_abs_diff(enc(constant(x))[0]->value, enc(constant(xp))[0]->value), 1e-3);
  EXPECT_EQ(enc(constant(x))[3]->value, enc(constant(x))[3]->value);
}

TEST(ChannelAttention, ZeroExciteGivesHalf) {
  ParamStore<double> store;
  Rng rng(6);
  auto ca = ChannelAttention<double>::create(store, "ca", 4, 2, rng);
  ca.excite.weight->value.fill(0.0);
  const auto f = random_tensor<double>({4, 3, 3}, rng);
  auto out = ca(constant(f))->value;
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_DOUBLE_EQ(out[i], f[i] / 2);
}

TEST(ChannelAttention, MultipliersInOpenUnitInterval) {
  ParamStore<double> store;
  Rng rng(7);
  auto ca = ChannelAttention<double>::create(store, "ca", 8, 4, rng);
  for (int t = 0; t < 20; ++t) {
    auto w = ca.weights(constant(random_tensor<double>({8, 4, 4}, rng, -5, 5)))->value;
    for (double v : w.values()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(ChannelAttention, WeightsPermutationInvariant) {
  ParamStore<double> store;
  Rng rng(8);
  auto ca = ChannelAttention<double>::create(store, "ca", 8, 4, rng);
  const auto f = random_tensor<double>({8, 4, 4}, rng);
  const auto fp = permute_pixels(f, random_permutation(16, rng));
  EXPECT_LT(max_abs_diff(ca.weights(constant(f))->value, ca.weights(constant(fp))->value), 1e-12);
  EXPECT_THROW(ca.weights(constant(Tensor<double>(4, 2, 2))), Error);
}

TEST(Must, ReduceChannelsIdentityKernel) {
  ParamStore<double> store;
  Rng rng(9);
  MustOptions o = small_must();
  o.reduced_channels = o.feature_channels;
  Must<double> must(store, "must", o, rng);
  auto w = store.find("must.level2.reduce.weight");
  w->value.fill(0.0);
  for (int c = 0; c < 8; ++c) w->value.at(c, c, 0) = 1.0;
  const auto f = random_tensor<double>({8, 2, 2}, rng);
  EXPECT_EQ(must.reduce_channels(constant(f), 2)->value, f);
}

TEST(Must, ReduceChannelsKnownKernel) {
  ParamStore<double> store;
  Rng rng(10);
  MustOptions o = small_must();
  o.feature_channels[0] = 4;
  o.reduced_channels[0] = 2;
  Must<double> must(store, "must", o, rng);
  auto w = store.find("must.level1.reduce.weight");
  store.find("must.level1.reduce.bias")->value.fill(0.0);
  const double k[2][4] = {{1, 2, 0, -1}, {0.5, 0, 3, 1}};
  for (int o2 = 0; o2 < 2; ++o2)
    for (int c = 0; c < 4; ++c) w->value.at(o2, c, 0) = k[o2][c];
  const auto f = random_tensor<double>({4, 2, 2}, rng);
  const auto out = must.reduce_channels(constant(f), 1)->value;
  for (int o2 = 0; o2 < 2; ++o2)
    for (int p = 0; p < 4; ++p) {
      double acc = 0;
      for (int c = 0; c < 4; ++c) acc += k[o2][c] * f.values()[c * 4 + p];
      EXPECT_NEAR(out.values()[o2 * 4 + p], acc, 1e-12);
    }
  zero_store(store);
  const auto zero = must.reduce_channels(constant(f), 1)->value;
  for (double v : zero.values()) EXPECT_EQ(v, 0.0);
}

TEST(Must, ExtractStatistics) {
  Tensor<double> f(2, 1, 2);
  f[0] = 1;
  f[1] = 3;
  f[2] = 5;
  f[3] = 5;
  const auto s = extract_statistics(f);
  EXPECT_DOUBLE_EQ(s.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(s.var[0], 1.0);
  EXPECT_DOUBLE_EQ(s.var[1], 0.0);
}

TEST(Must, TransformZeroWeightsGivesZero) {
  ParamStore<double> store;
  Rng rng(11);
  Must<double> must(store, "must", small_must(), rng);
  zero_store(store);
  auto m = must.transform_statistics(constant(random_tensor<double>({8, 1, 1}, rng)), 1);
  for (double v : m.scale->value.values()) EXPECT_EQ(v, 0.0);
  for (double v : m.bias->value.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(must.transform_statistics(constant(Tensor<double>(6, 1, 1)), 1), Error);
}

TEST(Must, TransformIdentityInitialization) {
  // level 1 drives block 4 (4 channels); 2 * C'_1 = 8 = 2 * C_gen
  ParamStore<double> store;
  Rng rng(12);
  Must<double> must(store, "must", small_must(), rng);
  for (const char* fc : {"must.level1.trans.fc1", "must.level1.trans.fc2"}) {
    auto w = store.find(std::string(fc) + ".weight");
    w->value.fill(0.0);
    for (int i = 0; i < 8; ++i) w->value.at(i, i, 0) = 1.0;
    store.find(std::string(fc) + ".bias")->value.fill(0.0);
  }
  const auto s = random_tensor<double>({8, 1, 1}, rng, 0.0, 1.0);  // nonnegative: relu passes it
  auto m = must.transform_statistics(constant(s), 1);
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(m.scale->value[i], s[i]);
    EXPECT_DOUBLE_EQ(m.bias->value[i], s[4 + i]);
  }
}

TEST(Must, OutputLengthsFollowConfig) {
  ParamStore<double> store;
  Rng rng(13);
  const auto o = small_must();
  Must<double> must(store, "must", o, rng);
  auto mods = must(random_features(o.feature_channels, {8, 4, 2, 1}, rng));
  ASSERT_EQ(mods.size(), 4u);
  for (std::size_t b = 0; b < 4; ++b) {
    EXPECT_EQ(mods[b].size(), static_cast<std::size_t>(o.block_channels[b]));
    EXPECT_EQ(mods[b].level, o.level_for_block[b]);
  }
}

TEST(Must, PermutationInvariantPerLevel) {
  for (bool ca : {true, false})
    for (bool multi : {true, false}) {
      ParamStore<double> store;
      Rng rng(14);
      const auto o = small_must(ca, multi);
      Must<double> must(store, "must", o, rng);
      const std::vector<int> sides = {8, 4, 4, 2};
      auto f = random_features(o.feature_channels, sides, rng);
      std::vector<Var<double>> fp;
      for (std::size_t i = 0; i < f.size(); ++i)
        fp.push_back(constant(permute_pixels(f[i]->value, random_permutation(sides[i] * sides[i], rng))));
      auto a = must(f), b = must(fp);
      for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_LT(max_abs_diff(a[k].scale->value, b[k].scale->value), 1e-12);
        EXPECT_LT(max_abs_diff(a[k].bias->value, b[k].bias->value), 1e-12);
      }
    }
}

TEST(Must, NoMustUsesDeepestLevelOnly) {
  ParamStore<double> store;
  Rng rng(15);
  const auto o = small_must(true, false);
  Must<double> must(store, "must", o, rng);
  auto f = random_features(o.feature_channels, {8, 4, 2, 2}, rng);
  auto g = f;
  for (int i = 0; i < 3; ++i) g[i] = constant(random_tensor<double>(f[i]->shape(), rng));
  auto a = must(f), b = must(g);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].scale->value, b[k].scale->value);
    EXPECT_EQ(a[k].level, 0);
  }
  for (const auto& [name, _] : store.entries()) EXPECT_EQ(name.rfind("must.single.trans", 0), 0u) << name;
}

TEST(Must, RejectsNonPermutationWiring) {
  ParamStore<double> store;
  Rng rng(16);
  auto o = small_must();
  o.level_for_block = {1, 1, 2, 3};
  EXPECT_THROW(Must<double>(store, "must", o, rng), Error);
}

TEST(StatMatchBlock, ZeroResidualIsUpsampledInput) {
  ParamStore<double> store;
  Rng rng(17);
  auto b = StatMatchBlock<double>::create(store, "b", 4, 4, true, 1e-5, rng);
  zero_store(store);
  const auto f = random_tensor<double>({4, 8, 8}, rng);
  ModParams<double> zero{constant(Tensor<double>(4, 1, 1)), constant(Tensor<double>(4, 1, 1)), 1};
  auto out = b(constant(f), zero)->value;
  EXPECT_EQ(out.shape(), (Shape{4, 16, 16}));
  EXPECT_LT(max_abs_diff(out, ops::upsample_bilinear2x(constant(f))->value), 1e-15);
}

TEST(StatMatchBlock, RejectsMismatches) {
  ParamStore<double> store;
  Rng rng(18);
  auto b = StatMatchBlock<double>::create(store, "b", 4, 2, false, 1e-5, rng);
  ModParams<double> m{constant(Tensor<double>(2, 1, 1)), constant(Tensor<double>(2, 1, 1)), 1};
  EXPECT_THROW(b(constant(Tensor<double>(3, 4, 4)), m), Error);
  ModParams<double> bad{constant(Tensor<double>(3, 1, 1)), constant(Tensor<double>(3, 1, 1)), 1};
  EXPECT_THROW(b(constant(Tensor<double>(4, 4, 4)), bad), Error);
}

TEST(StatMatchBlock, GradientWrtModulation) {
  ParamStore<double> store;
  Rng rng(19);
  auto b = StatMatchBlock<double>::create(store, "b", 3, 4, true, 1e-5, rng);
  auto f = constant(random_tensor<double>({3, 4, 4}, rng));
  ModParams<double> m{leaf(random_tensor<double>({4, 1, 1}, rng), true), leaf(random_tensor<double>({4, 1, 1}, rng), true), 1};
  auto target = constant(random_tensor<double>({4, 8, 8}, rng, -2, 2));
  auto r = check_gradients({m.scale, m.bias}, [&] { return ops::mean_abs_diff(b(f, m), target); });
  EXPECT_EQ(r.passed, r.checked) << r.worst;
}

TEST(Generator, DefaultShapes) {
  ParamStore<float> store;
  Rng rng(20);
  Generator<float> g(store, "g", {256, {256, 128, 64, 32}, {0, 1, 1, 1}, 1e-5}, rng);
  std::vector<ModParams<float>> mods;
  for (int c : {256, 128, 64, 32})
    mods.push_back({constant(Tensor<float>(c, 1, 1, 1.0f)), constant(Tensor<float>(c, 1, 1)), 1});
  EXPECT_EQ(g(constant(Tensor<float>(256, 8, 8)), mods)->shape(), (Shape{3, 64, 64}));

  ParamStore<float> store2;
  Generator<float> g4(store2, "g", {256, {256, 128, 64, 32}, {1, 1, 1, 1}, 1e-5}, rng);
  EXPECT_EQ(g4(constant(Tensor<float>(256, 8, 8)), mods)->shape(), (Shape{3, 128, 128}));
}

TEST(Generator, ZeroEverythingGivesTanhBias) {
  ParamStore<double> store;
  Rng rng(21);
  Generator<double> g(store, "g", {4, {4, 4}, {0, 1}, 1e-5}, rng);
  zero_store(store);
  const double bias[3] = {0.3, -0.7, 1.2};
  for (int c = 0; c < 3; ++c) store.find("g.head.bias")->value[c] = bias[c];
  std::vector<ModParams<double>> mods(2, {constant(Tensor<double>(4, 1, 1)), constant(Tensor<double>(4, 1, 1)), 1});
  auto out = g(constant(random_tensor<double>({4, 4, 4}, rng)), mods)->value;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 64; ++i) EXPECT_NEAR(out.channel(c)[i], std::tanh(bias[c]), 1e-15);
}

TEST(Generator, OutputStrictlyInsideUnitRange) {
  ParamStore<double> store;
  Rng rng(22);
  Generator<double> g(store, "g", {4, {4, 4}, {0, 1}, 1e-5}, rng);
  // moderate modulation: double tanh rounds to exactly +-1 beyond |x| ~ 19
  std::vector<ModParams<double>> mods(2, {constant(random_tensor<double>({4, 1, 1}, rng)),
                                          constant(random_tensor<double>({4, 1, 1}, rng)), 1});
  for (double v : g(constant(random_tensor<double>({4, 4, 4}, rng)), mods)->value.values()) {
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Discriminator, ZeroWeightsGiveHeadBias) {
  ParamStore<double> store;
  Rng rng(23);
  Discriminator<double> d(store, "d", 3, {4, 8}, rng);
  zero_store(store);
  store.find("d.head.bias")->value[0] = 0.37;
  for (int t = 0; t < 3; ++t) EXPECT_DOUBLE_EQ(ops::scalar(disc_image(d, constant(random_tensor<double>({3, 8, 8}, rng)))), 0.37);
}

TEST(Discriminator, IdenticalInputsIdenticalScores) {
  ParamStore<double> store;
  Rng rng(24);
  Discriminator<double> d(store, "d", 3, {4, 8}, rng);
  auto x = constant(random_tensor<double>({3, 8, 8}, rng));
  EXPECT_EQ(ops::scalar(d(x)), ops::scalar(d(x)));
}

TEST(Discriminator, InputGradient) {
  ParamStore<double> store;
  Rng rng(25);
  Discriminator<double> d(store, "d", 3, {4, 8}, rng);
  auto x = leaf(random_tensor<double>({3, 8, 8}, rng), true);
  auto r = check_gradients({x}, [&] { return d(x); });
  EXPECT_GE(r.pass_fraction(), 0.99) << r.worst;
}

TEST(Discriminator, PoseDiscriminatorChannels) {
  ModelConfig cfg;
  cfg.pose_channels = {8, 8, 8};
  cfg.app_channels = {8, 8, 8, 8};
  cfg.gen_channels = {8, 8, 8, 8};
  cfg.disc_channels = {4, 4, 4};
  MustGan<float> m(cfg, 1);
  EXPECT_EQ(m.d_pose().in_channels(), 34);
  auto img = constant(Tensor<float>(3, 64, 64));
  EXPECT_NO_THROW(m.score_pose(constant(Tensor<float>(31, 64, 64)), img));
  EXPECT_THROW(m.score_pose(constant(Tensor<float>(31, 32, 32)), img), Error);
  EXPECT_THROW(m.score_image(constant(Tensor<float>(4, 64, 64))), Error);
}

TEST(Model, AblationIsolation) {
  const ModelConfig base = micro_config();
  MustGan<double> full(base, 5);
  auto params_of = [](const MustGan<double>& m) {
    std::map<std::string, Tensor<double>> out;
    for (const auto* s : {&m.gen_params(), &m.disc_params()})
      for (const auto& [n, v] : s->entries()) out[n] = v->value;
    return out;
  };
  const auto pf = params_of(full);
  struct Case {
    const char* flag;
    std::vector<std::string> allowed;
  };
  for (const Case& c : {Case{"no_must", {"must."}}, Case{"no_ca", {"must."}}, Case{"no_pcm", {"pose_encoder.", "d_pose."}}}) {
    ModelConfig cfg = base;
    cfg.ablation.no_must = std::string(c.flag) == "no_must";
    cfg.ablation.no_ca = std::string(c.flag) == "no_ca";
    cfg.ablation.no_pcm = std::string(c.flag) == "no_pcm";
    MustGan<double> ab(cfg, 5);
    const auto pa = params_of(ab);
    auto touched = [&](const std::string& n) {
      for (const auto& p : c.allowed)
        if (n.rfind(p, 0) == 0) return true;
      return false;
    };
    for (const auto& [n, v] : pf)
      if (!touched(n)) {
        ASSERT_TRUE(pa.count(n)) << c.flag << " lost " << n;
        EXPECT_EQ(pa.at(n), v) << c.flag << " changed " << n;
      }
    for (const auto& [n, _] : pa) EXPECT_TRUE(pf.count(n) || touched(n)) << c.flag << " added " << n;
  }
}

TEST(Model, ImageDependsOnAppearanceOnlyThroughMods) {
  MustGan<double> m(micro_config(), 6);
  Rng rng(7);
  const auto a = micro_inputs(micro_config(), rng);
  const auto b = micro_inputs(micro_config(), rng);
  auto fa = m.forward(constant(a.parts.cast<double>()), constant(a.pose.cast<double>()));
  auto fb = m.forward(constant(b.parts.cast<double>()), constant(a.pose.cast<double>()));
  EXPECT_EQ(m.generator()(fa.pose_code, fa.mods)->value, fa.image->value);
  EXPECT_EQ(m.generator()(fa.pose_code, fb.mods)->value, fb.image->value);
  EXPECT_GT(max_abs_diff(fa.image->value, fb.image->value), 0.0);
}
