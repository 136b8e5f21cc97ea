#pragma once

#include <string>
#include <vector>

#include "mustgan/params.hpp"

namespace mustgan {

/// Residual downsampling block without normalization:
///   main = [lrelu] -> conv3x3 -> lrelu -> avgpool2 -> conv3x3
///   skip = avgpool2 -> conv1x1
template <typename T>
struct DownBlock {
  Conv2d<T> conv1;
  Conv2d<T> conv2;
  Conv2d<T> skip;
  bool pre_activation = true;

  Var<T> operator()(const Var<T>& x, T slope) const {
    auto h = pre_activation ? ops::leaky_relu(x, slope) : x;
    h = conv2(ops::avg_pool2(ops::leaky_relu(conv1(h), slope)));
    return ops::add(h, skip(ops::avg_pool2(x)));
  }
};

/// Realness critic producing one unbounded scalar per input via global average pooling.
template <typename T>
class Discriminator {
 public:
  Discriminator() = default;

  Discriminator(ParamStore<T>& store, const std::string& name, int in_channels, const std::vector<int>& channels,
                Rng& rng, T slope = T(0.2))
      : in_channels_(in_channels), slope_(slope) {
    if (channels.empty()) fail("invalid_config", "discriminator needs at least one block");
    int cin = in_channels;
    const double s = static_cast<double>(slope);
    for (std::size_t i = 0; i < channels.size(); ++i) {
      const std::string bn = name + ".block" + std::to_string(i + 1);
      DownBlock<T> b{Conv2d<T>::create(store, bn + ".conv1", cin, channels[i], 3, 1, rng, s),
                     Conv2d<T>::create(store, bn + ".conv2", channels[i], channels[i], 3, 1, rng, s),
                     Conv2d<T>::create(store, bn + ".skip", cin, channels[i], 1, 1, rng, s), i > 0};
      blocks_.push_back(b);
      cin = channels[i];
    }
    head_ = Linear<T>::create(store, name + ".head", cin, 1, rng, s);
  }

  int in_channels() const { return in_channels_; }
  const Linear<T>& head() const { return head_; }

  /// Scalar score as a (1, 1, 1) node.
  Var<T> operator()(const Var<T>& x) const {
    if (x->shape().c != in_channels_)
      fail("channel_mismatch", "discriminator expects " + std::to_string(in_channels_) + " channels, got " +
                                   x->shape().str());
    Var<T> h = x;
    for (const auto& b : blocks_) h = b(h, slope_);
    return head_(ops::global_avg_pool(ops::leaky_relu(h, slope_)));
  }

 private:
  std::vector<DownBlock<T>> blocks_;
  Linear<T> head_;
  int in_channels_ = 0;
  T slope_ = T(0.2);
};

/// Scores a person image alone.
template <typename T>
Var<T> disc_image(const Discriminator<T>& d, const Var<T>& image) {
  if (image->shape().c != 3) fail("shape_mismatch", "image discriminator expects a 3-channel image");
  return d(image);
}

/// Scores the channel concatenation [image; pose].
template <typename T>
Var<T> disc_pose(const Discriminator<T>& d, const Var<T>& pose, const Var<T>& image) {
  if (pose->shape().h != image->shape().h || pose->shape().w != image->shape().w)
    fail("shape_mismatch", "pose " + pose->shape().str() + " not aligned with image " + image->shape().str());
  return d(ops::concat(image, pose));
}

}  // namespace mustgan
