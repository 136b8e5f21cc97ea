#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mustgan/tensor.hpp"

namespace mustgan {

inline constexpr int kNumClasses = 8;

enum PartClass : int {
  kBackground = 0,
  kUpperClothes = 1,
  kPants = 2,
  kSkirt = 3,
  kHair = 4,
  kFace = 5,
  kArm = 6,
  kLeg = 7,
};

inline constexpr std::array<const char*, kNumClasses> kClassNames = {
    "background", "upper_clothes", "pants", "skirt", "hair", "face", "arm", "leg"};

inline int class_from_name(const std::string& name) {
  for (int k = 0; k < kNumClasses; ++k)
    if (name == kClassNames[static_cast<std::size_t>(k)]) return k;
  fail("unknown_class", name);
}

/// H x W grid of part labels in [0, 8).
struct SegMap {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> labels;

  SegMap() = default;
  SegMap(int h_, int w_, std::uint8_t fill = kBackground)
      : h(h_), w(w_), labels(static_cast<std::size_t>(h_) * w_, fill) {}

  std::uint8_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * w + x]; }
  bool operator==(const SegMap&) const = default;

  std::size_t count(int k) const {
    std::size_t n = 0;
    for (auto l : labels) n += (l == k);
    return n;
  }
};

/// Human-parsing labels (20-class LIP layout) merged into the eight part classes.
inline const std::map<int, int>& lip_grouping() {
  static const std::map<int, int> table = {
      {0, kBackground},                                                        // background
      {1, kHair},        {2, kHair},                                           // hat, hair
      {3, kArm},                                                               // glove
      {4, kFace},        {13, kFace},                                          // sunglasses, face
      {5, kUpperClothes}, {6, kUpperClothes}, {7, kUpperClothes},              // upper clothes, dress, coat
      {10, kUpperClothes}, {11, kUpperClothes},                                // jumpsuit, scarf
      {9, kPants},                                                             // pants
      {12, kSkirt},                                                            // skirt
      {14, kArm},        {15, kArm},                                           // arms
      {8, kLeg},         {16, kLeg},          {17, kLeg}, {18, kLeg}, {19, kLeg},  // socks, legs, shoes
  };
  return table;
}

inline SegMap group_labels(const std::vector<int>& raw, int h, int w, const std::map<int, int>& grouping) {
  if (raw.size() != static_cast<std::size_t>(h) * w) fail("size_mismatch", "raw label grid size");
  SegMap out(h, w);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto it = grouping.find(raw[i]);
    if (it == grouping.end()) fail("unmapped_label", "raw label " + std::to_string(raw[i]) + " has no grouping");
    if (it->second < 0 || it->second >= kNumClasses)
      fail("unmapped_label", "raw label " + std::to_string(raw[i]) + " maps outside the class table");
    out.labels[i] = static_cast<std::uint8_t>(it->second);
  }
  return out;
}

/// Eight masked copies of a 3-channel image stacked as 24 channels in class order:
/// channels [3k, 3k+3) hold image * [labels == k].
struct PartStack {
  Tensor<float> stack;

  int height() const { return stack.height(); }
  int width() const { return stack.width(); }

  Tensor<float> part(int k) const {
    Tensor<float> out(3, height(), width());
    const std::size_t plane = stack.shape().plane();
    std::copy(stack.channel(3 * k), stack.channel(3 * k) + 3 * plane, out.data());
    return out;
  }
};

inline PartStack mask_parts(const Tensor<float>& image, const SegMap& seg) {
  if (image.channels() != 3) fail("shape_mismatch", "image must have 3 channels, got " + image.shape().str());
  if (image.height() != seg.h || image.width() != seg.w)
    fail("size_mismatch", "image " + image.shape().str() + " vs segmap " + std::to_string(seg.h) + "x" +
                              std::to_string(seg.w));
  PartStack ps{Tensor<float>(3 * kNumClasses, seg.h, seg.w)};
  for (int y = 0; y < seg.h; ++y)
    for (int x = 0; x < seg.w; ++x) {
      const int k = seg.at(y, x);
      if (k >= kNumClasses) fail("label_out_of_range", std::to_string(k));
      for (int c = 0; c < 3; ++c) ps.stack.at(3 * k + c, y, x) = image.at(c, y, x);
    }
  return ps;
}

/// Sum of all eight parts; equals the source image for any mask_parts output.
inline Tensor<float> merge_parts(const PartStack& ps) {
  Tensor<float> out(3, ps.height(), ps.width());
  for (int k = 0; k < kNumClasses; ++k)
    for (int c = 0; c < 3; ++c) {
      const float* src = ps.stack.channel(3 * k + c);
      float* dst = out.channel(c);
      for (std::size_t i = 0; i < out.shape().plane(); ++i) dst[i] += src[i];
    }
  return out;
}

/// `a` with part k taken from `b`. Every other channel slice is left untouched.
inline PartStack swap_part(const PartStack& a, const PartStack& b, int k) {
  if (k == kBackground) fail("invalid_class", "background cannot be swapped");
  if (k < 0 || k >= kNumClasses) fail("invalid_class", std::to_string(k));
  if (!(a.stack.shape() == b.stack.shape()))
    fail("size_mismatch", "part stacks " + a.stack.shape().str() + " vs " + b.stack.shape().str());
  PartStack out = a;
  const std::size_t plane = a.stack.shape().plane();
  std::copy(b.stack.channel(3 * k), b.stack.channel(3 * k) + 3 * plane, out.stack.channel(3 * k));
  return out;
}

}  // namespace mustgan
