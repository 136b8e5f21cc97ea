#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mustgan/params.hpp"

namespace mustgan {

struct LossWeights {
  double adv = 5.0;
  double rec = 1.0;
  double perc = 1.0;
  double style = 150.0;

  void validate() const {
    if (adv < 0 || rec < 0 || perc < 0 || style < 0) fail("invalid_config", "loss weights must be >= 0");
  }
};

struct PerceptualOptions {
  std::vector<int> channels{16, 32, 64};
  int perceptual_layer = 2;  // 1-based tap used by the perceptual term
  std::uint64_t seed = 1234;
};

/// Frozen random-weight feature pyramid standing in for a pretrained classifier. Stage i is
/// conv3x3 -> relu (tapped), with 2x average pooling between stages.
template <typename T>
class PerceptualExtractor {
 public:
  PerceptualExtractor() = default;

  explicit PerceptualExtractor(const PerceptualOptions& opt) : opt_(opt) {
    if (opt.channels.empty()) fail("invalid_config", "perceptual extractor needs at least one stage");
    if (opt.perceptual_layer < 1 || opt.perceptual_layer > static_cast<int>(opt.channels.size()))
      fail("invalid_config", "perceptual_layer out of range");
    store_.set_trainable(false);
    Rng rng(opt.seed);
    int cin = 3;
    for (std::size_t i = 0; i < opt.channels.size(); ++i) {
      stages_.push_back(Conv2d<T>::create(store_, "phi.stage" + std::to_string(i + 1), cin, opt.channels[i], 3, 1, rng));
      cin = opt.channels[i];
    }
  }

  const PerceptualOptions& options() const { return opt_; }
  const ParamStore<T>& params() const { return store_; }
  int taps() const { return static_cast<int>(stages_.size()); }

  std::vector<Var<T>> operator()(const Var<T>& image) const {
    if (image->shape().c != 3) fail("shape_mismatch", "perceptual extractor expects 3-channel images");
    std::vector<Var<T>> out;
    Var<T> x = image;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      if (i > 0) x = ops::avg_pool2(x);
      x = ops::relu(stages_[i](x));
      out.push_back(x);
    }
    return out;
  }

 private:
  PerceptualOptions opt_;
  ParamStore<T> store_;
  std::vector<Conv2d<T>> stages_;
};

/// Least-squares discriminator loss for one discriminator: 1/2 [(s_real - 1)^2 + s_fake^2].
template <typename T>
Var<T> lsgan_d_loss(const Var<T>& real_score, const Var<T>& fake_score) {
  return ops::weighted_sum<T>({{T(0.5), ops::squared_error(real_score, T(1))}, {T(0.5), ops::squared_error(fake_score, T(0))}});
}

/// Least-squares generator loss for one discriminator: (s_fake - 1)^2.
template <typename T>
Var<T> lsgan_g_loss(const Var<T>& fake_score) {
  return ops::squared_error(fake_score, T(1));
}

/// Batch forms over plain scores (mean over samples).
inline double lsgan_d_loss(const std::vector<double>& real, const std::vector<double>& fake) {
  if (real.size() != fake.size() || real.empty()) fail("invalid_argument", "score lists must be equal and non-empty");
  double acc = 0;
  for (std::size_t i = 0; i < real.size(); ++i) acc += 0.5 * ((real[i] - 1) * (real[i] - 1) + fake[i] * fake[i]);
  return acc / static_cast<double>(real.size());
}

inline double lsgan_g_loss(const std::vector<double>& fake) {
  if (fake.empty()) fail("invalid_argument", "score list must be non-empty");
  double acc = 0;
  for (double s : fake) acc += (s - 1) * (s - 1);
  return acc / static_cast<double>(fake.size());
}

/// Mean absolute pixel difference.
template <typename T>
Var<T> reconstruction_loss(const Var<T>& gen, const Var<T>& src) {
  return ops::mean_abs_diff(gen, src);
}

template <typename T>
Var<T> gram(const Var<T>& f) {
  return ops::gram(f);
}

/// Mean absolute difference of the configured tap.
template <typename T>
Var<T> perceptual_loss(const std::vector<Var<T>>& gen_feats, const std::vector<Var<T>>& src_feats, int layer) {
  return ops::mean_abs_diff(gen_feats.at(static_cast<std::size_t>(layer - 1)),
                            src_feats.at(static_cast<std::size_t>(layer - 1)));
}

template <typename T>
Var<T> perceptual_loss(const Var<T>& gen, const Var<T>& src, const PerceptualExtractor<T>& phi) {
  return perceptual_loss(phi(gen), phi(src), phi.options().perceptual_layer);
}

/// Sum over taps of the mean absolute difference between Gram matrices.
template <typename T>
Var<T> style_loss(const std::vector<Var<T>>& gen_feats, const std::vector<Var<T>>& src_feats) {
  if (gen_feats.size() != src_feats.size() || gen_feats.empty()) fail("invalid_argument", "tap lists differ");
  std::vector<std::pair<T, Var<T>>> terms;
  for (std::size_t l = 0; l < gen_feats.size(); ++l)
    terms.emplace_back(T(1), ops::mean_abs_diff(ops::gram(gen_feats[l]), ops::gram(src_feats[l])));
  return ops::weighted_sum(terms);
}

template <typename T>
Var<T> style_loss(const Var<T>& gen, const Var<T>& src, const PerceptualExtractor<T>& phi) {
  return style_loss(phi(gen), phi(src));
}

struct LossTerms {
  double adv = 0;
  double rec = 0;
  double perc = 0;
  double style = 0;
};

inline double overall_loss(const LossTerms& t, const LossWeights& w) {
  return w.adv * t.adv + w.rec * t.rec + w.perc * t.perc + w.style * t.style;
}

template <typename T>
Var<T> overall_loss(const Var<T>& adv, const Var<T>& rec, const Var<T>& perc, const Var<T>& style, const LossWeights& w) {
  return ops::weighted_sum<T>({{static_cast<T>(w.adv), adv},
                               {static_cast<T>(w.rec), rec},
                               {static_cast<T>(w.perc), perc},
                               {static_cast<T>(w.style), style}});
}

}  // namespace mustgan
