#pragma once

#include <string>
#include <vector>

#include "mustgan/params.hpp"

namespace mustgan {

/// Downsampling pose pathway: per stage a stride-2 3x3 convolution, instance normalization
/// and a leaky rectifier. Output spatial size is input / 2^stages.
template <typename T>
class PoseEncoder {
 public:
  PoseEncoder() = default;

  PoseEncoder(ParamStore<T>& store, const std::string& name, int in_channels, const std::vector<int>& channels, Rng& rng,
              T eps = T(1e-5), T slope = T(0.2))
      : in_channels_(in_channels), eps_(eps), slope_(slope) {
    if (channels.empty()) fail("invalid_config", "pose encoder needs at least one stage");
    int cin = in_channels;
    for (std::size_t i = 0; i < channels.size(); ++i) {
      stages_.push_back(Conv2d<T>::create(store, name + ".stage" + std::to_string(i + 1), cin, channels[i], 3, 2, rng,
                                          static_cast<double>(slope)));
      cin = channels[i];
    }
  }

  int stages() const { return static_cast<int>(stages_.size()); }
  int in_channels() const { return in_channels_; }
  int out_channels() const { return stages_.back().out_channels(); }

  Var<T> operator()(const Var<T>& pose) const {
    const Shape& s = pose->shape();
    if (s.c != in_channels_)
      fail("shape_mismatch", "pose encoder expects " + std::to_string(in_channels_) + " channels, got " + s.str());
    const int div = 1 << stages();
    if (s.h % div || s.w % div)
      fail("shape_mismatch", "pose input " + s.str() + " not divisible by " + std::to_string(div));
    Var<T> x = pose;
    for (const auto& conv : stages_) x = ops::leaky_relu(ops::instance_norm(conv(x), eps_), slope_);
    return x;
  }

 private:
  std::vector<Conv2d<T>> stages_;
  int in_channels_ = 0;
  T eps_ = T(1e-5);
  T slope_ = T(0.2);
};

/// Four-stage convolutional pyramid over the 24-channel part stack. Stage i applies a
/// strided 3x3 convolution and a stride-1 3x3 convolution, each followed by a leaky
/// rectifier, and exposes its output as feature level f_i.
template <typename T>
class AppearanceEncoder {
 public:
  struct Stage {
    Conv2d<T> down;
    Conv2d<T> refine;
  };

  AppearanceEncoder() = default;

  AppearanceEncoder(ParamStore<T>& store, const std::string& name, int in_channels, const std::vector<int>& channels,
                    const std::vector<int>& strides, Rng& rng, T slope = T(0.2))
      : in_channels_(in_channels), slope_(slope) {
    if (channels.empty() || channels.size() != strides.size())
      fail("invalid_config", "appearance encoder channel/stride plans must be non-empty and equal length");
    int cin = in_channels;
    for (std::size_t i = 0; i < channels.size(); ++i) {
      const std::string sn = name + ".stage" + std::to_string(i + 1);
      Stage st{Conv2d<T>::create(store, sn + ".down", cin, channels[i], 3, strides[i], rng, static_cast<double>(slope)),
               Conv2d<T>::create(store, sn + ".refine", channels[i], channels[i], 3, 1, rng, static_cast<double>(slope))};
      stages_.push_back(st);
      total_stride_ *= strides[i];
      cin = channels[i];
    }
  }

  int levels() const { return static_cast<int>(stages_.size()); }
  int channels(int level) const { return stages_[static_cast<std::size_t>(level)].refine.out_channels(); }

  std::vector<Var<T>> operator()(const Var<T>& parts) const {
    const Shape& s = parts->shape();
    if (s.c != in_channels_)
      fail("shape_mismatch", "appearance encoder expects " + std::to_string(in_channels_) + " channels, got " + s.str());
    if (s.h % total_stride_ || s.w % total_stride_)
      fail("shape_mismatch", "appearance input " + s.str() + " not divisible by " + std::to_string(total_stride_));
    std::vector<Var<T>> taps;
    Var<T> x = parts;
    for (const auto& st : stages_) {
      x = ops::leaky_relu(st.down(x), slope_);
      x = ops::leaky_relu(st.refine(x), slope_);
      taps.push_back(x);
    }
    return taps;
  }

 private:
  std::vector<Stage> stages_;
  int in_channels_ = 0;
  int total_stride_ = 1;
  T slope_ = T(0.2);
};

}  // namespace mustgan
