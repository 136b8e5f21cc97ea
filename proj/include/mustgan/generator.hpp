#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mustgan/must.hpp"

namespace mustgan {

/// Residual block whose two normalization sites are AdaIN layers driven by one ModParams:
///   main = conv3x3 -> adain -> relu -> conv3x3 -> adain
///   skip = identity, or a learnable 1x1 convolution when channel counts differ
///   out  = main + skip, optionally followed by 2x bilinear upsampling.
template <typename T>
struct StatMatchBlock {
  Conv2d<T> conv1;
  Conv2d<T> conv2;
  std::optional<Conv2d<T>> skip;
  bool upsample = true;
  T eps = T(1e-5);

  static StatMatchBlock create(ParamStore<T>& store, const std::string& name, int cin, int cout, bool upsample, T eps,
                               Rng& rng) {
    StatMatchBlock b;
    b.conv1 = Conv2d<T>::create(store, name + ".conv1", cin, cout, 3, 1, rng);
    b.conv2 = Conv2d<T>::create(store, name + ".conv2", cout, cout, 3, 1, rng);
    if (cin != cout) b.skip = Conv2d<T>::create(store, name + ".skip", cin, cout, 1, 1, rng);
    b.upsample = upsample;
    b.eps = eps;
    return b;
  }

  int in_channels() const { return conv1.in_channels(); }
  int out_channels() const { return conv1.out_channels(); }

  Var<T> operator()(const Var<T>& f, const ModParams<T>& mod) const {
    if (f->shape().c != in_channels())
      fail("channel_mismatch", "block expects " + std::to_string(in_channels()) + " channels, got " + f->shape().str());
    if (mod.size() != static_cast<std::size_t>(out_channels()))
      fail("length_mismatch", "block needs modulation of length " + std::to_string(out_channels()));
    auto h = ops::relu(ops::adain(conv1(f), mod.scale, mod.bias, eps));
    h = ops::adain(conv2(h), mod.scale, mod.bias, eps);
    auto out = ops::add(h, skip ? (*skip)(f) : f);
    return upsample ? ops::upsample_bilinear2x(out) : out;
  }
};

struct GeneratorOptions {
  int in_channels = 256;
  std::vector<int> block_channels{256, 128, 64, 32};
  std::vector<int> upsample{0, 1, 1, 1};
  double eps = 1e-5;
};

/// Pose code -> blocks (coarse to fine, each modulated by its ModParams) -> 1x1 conv -> tanh.
template <typename T>
class Generator {
 public:
  Generator() = default;

  Generator(ParamStore<T>& store, const std::string& name, const GeneratorOptions& opt, Rng& rng) {
    if (opt.block_channels.size() != opt.upsample.size() || opt.block_channels.empty())
      fail("invalid_config", "generator block_channels and upsample plans must be non-empty and equal length");
    int cin = opt.in_channels;
    for (std::size_t i = 0; i < opt.block_channels.size(); ++i) {
      blocks_.push_back(StatMatchBlock<T>::create(store, name + ".block" + std::to_string(i + 1), cin,
                                                  opt.block_channels[i], opt.upsample[i] != 0, static_cast<T>(opt.eps),
                                                  rng));
      cin = opt.block_channels[i];
    }
    head_ = Conv2d<T>::create(store, name + ".head", cin, 3, 1, 1, rng);
    // The residual stream grows to std ~2-3 over the blocks; a small head keeps tanh
    // unsaturated at initialization.
    for (auto& v : head_.weight->value.values()) v *= static_cast<T>(kHeadInitScale);
  }

  static constexpr double kHeadInitScale = 0.1;

  const std::vector<StatMatchBlock<T>>& blocks() const { return blocks_; }
  std::vector<StatMatchBlock<T>>& blocks() { return blocks_; }
  const Conv2d<T>& head() const { return head_; }

  Var<T> operator()(const Var<T>& pose_code, const std::vector<ModParams<T>>& mods) const {
    if (mods.size() != blocks_.size())
      fail("shape_mismatch", "generator needs " + std::to_string(blocks_.size()) + " ModParams");
    Var<T> x = pose_code;
    for (std::size_t i = 0; i < blocks_.size(); ++i) x = blocks_[i](x, mods[i]);
    return ops::tanh(head_(x));
  }

 private:
  std::vector<StatMatchBlock<T>> blocks_;
  Conv2d<T> head_;
};

}  // namespace mustgan
