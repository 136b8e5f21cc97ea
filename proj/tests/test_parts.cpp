#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace mustgan;

namespace {

Sample flat_top_sample(const Rgb& top) {
  SpriteSpec spec;
  for (auto& c : spec.part_colors) c = {0.5, 0.5, 0.5};
  spec.part_colors[kBackground] = {0.9, 0.9, 0.9};
  spec.part_colors[kUpperClothes] = top;
  return generate_sprite(spec, PoseParams{}, 32, 32);
}

}  // namespace

TEST(GroupLabels, IdentityGrouping) {
  std::map<int, int> id;
  for (int k = 0; k < kNumClasses; ++k) id[k] = k;
  std::vector<int> raw = {0, 1, 2, 3, 4, 5, 6, 7};
  const SegMap s = group_labels(raw, 2, 4, id);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(s.labels[i], raw[i]);
}

TEST(GroupLabels, HatBecomesHair) {
  const SegMap s = group_labels({1, 0}, 1, 2, lip_grouping());
  EXPECT_EQ(s.labels[0], kHair);
  EXPECT_EQ(kHair, 4);
}

TEST(GroupLabels, UnmappedLabelNamed) {
  try {
    group_labels({0, 255}, 1, 2, lip_grouping());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "unmapped_label");
    EXPECT_NE(std::string(e.what()).find("255"), std::string::npos);
  }
}

TEST(GroupLabels, LipTableCoversAllTwentyLabels) {
  for (int raw = 0; raw < 20; ++raw) EXPECT_TRUE(lip_grouping().count(raw)) << raw;
}

TEST(MaskParts, AllBackground) {
  Rng rng(1);
  const auto img = fixtures::random_tensor<float>({3, 4, 4}, rng);
  const PartStack ps = mask_parts(img, SegMap(4, 4));
  EXPECT_EQ(ps.part(kBackground), img);
  for (int k = 1; k < kNumClasses; ++k) {
    const Tensor<float> part = ps.part(k);
    for (float v : part.values()) EXPECT_EQ(v, 0.0f);
  }
}

TEST(MaskParts, FlatRedTop) {
  const Sample s = flat_top_sample({1.0, 0.0, 0.0});
  const Tensor<float> top = mask_parts(s.image, s.segmap).part(kUpperClothes);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const bool in = s.segmap.at(y, x) == kUpperClothes;
      EXPECT_EQ(top.at(0, y, x), in ? 1.0f : 0.0f);
      EXPECT_EQ(top.at(1, y, x), in ? -1.0f : 0.0f);
    }
}

TEST(MaskParts, PartitionSumsToImageExactly) {
  for (const auto& s : sample_dataset(10, 2, 32, 32)) EXPECT_EQ(merge_parts(mask_parts(s.image, s.segmap)), s.image);
}

TEST(MaskParts, IdempotentUnderRemasking) {
  const Sample s = sample_dataset(1, 3, 32, 32)[0];
  const PartStack once = mask_parts(s.image, s.segmap);
  EXPECT_EQ(mask_parts(merge_parts(once), s.segmap).stack, once.stack);
}

TEST(MaskParts, SizeMismatch) {
  EXPECT_THROW(mask_parts(Tensor<float>(3, 4, 4), SegMap(4, 5)), Error);
}

TEST(SwapPart, SelfSwapIsIdentity) {
  const Sample s = sample_dataset(1, 4, 32, 32)[0];
  const PartStack a = mask_parts(s.image, s.segmap);
  EXPECT_EQ(swap_part(a, a, kUpperClothes).stack, a.stack);
}

TEST(SwapPart, TakesDonorPartOnly) {
  const Sample red = flat_top_sample({1, 0, 0});
  PoseParams p;
  p.joint_angles["r_upper_arm"] = 1.0;
  const SpriteSpec blue_spec = flat_top_sample({0, 0, 1}).meta->spec;
  const Sample blue = generate_sprite(blue_spec, p, 32, 32);
  const PartStack a = mask_parts(red.image, red.segmap), b = mask_parts(blue.image, blue.segmap);
  const PartStack out = swap_part(a, b, kUpperClothes);
  EXPECT_EQ(out.part(kUpperClothes), b.part(kUpperClothes));
  for (int k = 0; k < kNumClasses; ++k) {
    if (k != kUpperClothes) {
      EXPECT_EQ(out.part(k), a.part(k)) << k;
    }
  }
}

TEST(SwapPart, BackgroundRejected) {
  const Sample s = sample_dataset(1, 4, 16, 16)[0];
  const PartStack a = mask_parts(s.image, s.segmap);
  try {
    swap_part(a, a, kBackground);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "invalid_class");
  }
}
