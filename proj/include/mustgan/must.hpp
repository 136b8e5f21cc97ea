#pragma once

#include <string>
#include <vector>

#include "mustgan/params.hpp"

namespace mustgan {

/// Per-channel spatial mean and population variance.
template <typename T>
struct StatPair {
  std::vector<T> mean;
  std::vector<T> var;
};

template <typename T>
StatPair<T> extract_statistics(const Tensor<T>& f) {
  auto m = ops::moments(constant(f));
  const std::size_t c = static_cast<std::size_t>(f.channels());
  StatPair<T> s;
  s.mean.assign(m->value.data(), m->value.data() + c);
  s.var.assign(m->value.data() + c, m->value.data() + 2 * c);
  return s;
}

/// AdaIN modulation for one generator block.
template <typename T>
struct ModParams {
  Var<T> scale;
  Var<T> bias;
  int level = 0;  // 1..4 feature level that produced it; 0 for the single-level ablation

  std::size_t size() const { return scale->value.size(); }
};

/// Squeeze-style channel gating: x * sigmoid(W2 relu(W1 gap(x))).
template <typename T>
struct ChannelAttention {
  Linear<T> squeeze;
  Linear<T> excite;

  static ChannelAttention create(ParamStore<T>& store, const std::string& name, int channels, int reduction, Rng& rng) {
    if (reduction < 1 || channels % reduction)
      fail("invalid_config", "attention reduction " + std::to_string(reduction) + " must divide " +
                                 std::to_string(channels));
    return {Linear<T>::create(store, name + ".squeeze", channels, channels / reduction, rng),
            Linear<T>::create(store, name + ".excite", channels / reduction, channels, rng)};
  }

  /// The per-channel multipliers in (0, 1).
  Var<T> weights(const Var<T>& f) const {
    if (f->shape().c != squeeze.in_features())
      fail("channel_mismatch", "channel attention expects " + std::to_string(squeeze.in_features()) + " channels");
    return ops::sigmoid(excite(ops::relu(squeeze(ops::global_avg_pool(f)))));
  }

  Var<T> operator()(const Var<T>& f) const { return ops::channel_scale(f, weights(f)); }
};

/// Two fully connected layers mapping [mean; var] to (scale, bias) for a generator block.
template <typename T>
struct StatTransform {
  Linear<T> hidden;
  Linear<T> out;
  int target_channels = 0;

  static StatTransform create(ParamStore<T>& store, const std::string& name, int in, int hidden_width, int target,
                              Rng& rng) {
    StatTransform t{Linear<T>::create(store, name + ".fc1", in, hidden_width, rng),
                    Linear<T>::create(store, name + ".fc2", hidden_width, 2 * target, rng), target};
    return t;
  }

  /// Output = [scale; bias] of length 2 * target_channels.
  Var<T> operator()(const Var<T>& stats) const {
    if (static_cast<int>(stats->value.size()) != hidden.in_features())
      fail("length_mismatch", "statistics transform expects length " + std::to_string(hidden.in_features()) +
                                  ", got " + std::to_string(stats->value.size()));
    return out(ops::relu(hidden(stats)));
  }
};

struct MustOptions {
  std::vector<int> feature_channels;  // C_1..C_4
  std::vector<int> reduced_channels;  // C'_1..C'_4
  std::vector<int> block_channels;    // generator block output channels, coarse to fine
  std::vector<int> level_for_block;   // 1-based feature level driving each block
  int attention_reduction = 4;
  int hidden_multiplier = 1;
  bool channel_attention = true;  // false: identity in place of attention
  bool multi_level = true;        // false: single statistics vector from the deepest level
};

/// Multi-level statistics transfer: per level, attention -> 1x1 channel reduction ->
/// statistics -> learned transform into AdaIN parameters.
template <typename T>
class Must {
 public:
  struct Level {
    ChannelAttention<T> attention;
    Conv2d<T> reduce;
    StatTransform<T> transform;
  };

  Must() = default;

  Must(ParamStore<T>& store, const std::string& name, MustOptions opt, Rng& rng) : opt_(std::move(opt)) {
    const std::size_t nb = opt_.block_channels.size();
    if (opt_.level_for_block.size() != nb) fail("invalid_config", "level_for_block length must match block count");
    if (opt_.multi_level) {
      const std::size_t nl = opt_.feature_channels.size();
      if (opt_.reduced_channels.size() != nl) fail("invalid_config", "reduced_channels length must match levels");
      if (nl != nb) fail("invalid_config", "one feature level per generator block required");
      levels_.resize(nl);
      block_of_level_.assign(nl, -1);
      for (std::size_t b = 0; b < nb; ++b) {
        const int lv = opt_.level_for_block[b];
        if (lv < 1 || lv > static_cast<int>(nl)) fail("invalid_config", "level_for_block entry out of range");
        if (block_of_level_[static_cast<std::size_t>(lv - 1)] != -1)
          fail("invalid_config", "level_for_block must be a permutation");
        block_of_level_[static_cast<std::size_t>(lv - 1)] = static_cast<int>(b);
      }
      for (std::size_t i = 0; i < nl; ++i) {
        const std::string ln = name + ".level" + std::to_string(i + 1);
        const int c = opt_.feature_channels[i], cr = opt_.reduced_channels[i];
        if (cr <= 0) fail("invalid_config", "reduced channel count must be positive");
        const int target = opt_.block_channels[static_cast<std::size_t>(block_of_level_[i])];
        Level lvl;
        if (opt_.channel_attention)
          lvl.attention = ChannelAttention<T>::create(store, ln + ".ca", c, opt_.attention_reduction, rng);
        lvl.reduce = Conv2d<T>::create(store, ln + ".reduce", c, cr, 1, 1, rng);
        lvl.transform = StatTransform<T>::create(store, ln + ".trans", 2 * cr, opt_.hidden_multiplier * 2 * cr, target, rng);
        init_unit_scale(lvl.transform);
        levels_[i] = lvl;
      }
    } else {
      int total = 0;
      for (int c : opt_.block_channels) total += c;
      const int in = 2 * opt_.feature_channels.back();
      // fc2 emits [scale_b; bias_b] per block consecutively
      single_ = StatTransform<T>::create(store, name + ".single.trans", in, opt_.hidden_multiplier * in, total, rng);
      for (std::size_t b = 0, off = 0; b < nb; ++b) {
        const int c = opt_.block_channels[b];
        for (int i = 0; i < c; ++i) single_.out.bias->value[off + static_cast<std::size_t>(i)] = T(1);
        off += 2 * static_cast<std::size_t>(c);
      }
    }
  }

  const MustOptions& options() const { return opt_; }
  const std::vector<Level>& levels() const { return levels_; }

  Var<T> channel_attention(const Var<T>& f, int level) const {
    const auto& lvl = levels_.at(static_cast<std::size_t>(level - 1));
    return opt_.channel_attention ? lvl.attention(f) : f;
  }

  Var<T> reduce_channels(const Var<T>& f, int level) const {
    const auto& lvl = levels_.at(static_cast<std::size_t>(level - 1));
    if (f->shape().c != lvl.reduce.in_channels())
      fail("channel_mismatch", "level " + std::to_string(level) + " expects " + std::to_string(lvl.reduce.in_channels()) +
                                   " channels, got " + f->shape().str());
    return lvl.reduce(f);
  }

  ModParams<T> transform_statistics(const Var<T>& stats, int level) const {
    const auto& lvl = levels_.at(static_cast<std::size_t>(level - 1));
    auto out = lvl.transform(stats);
    const int c = lvl.transform.target_channels;
    return {ops::slice_channels(out, 0, c), ops::slice_channels(out, c, c), level};
  }

  /// One ModParams per generator block, coarse to fine.
  std::vector<ModParams<T>> operator()(const std::vector<Var<T>>& features) const {
    if (features.size() != opt_.feature_channels.size())
      fail("shape_mismatch", "expected " + std::to_string(opt_.feature_channels.size()) + " feature levels");
    for (std::size_t i = 0; i < features.size(); ++i)
      if (features[i]->shape().c != opt_.feature_channels[i])
        fail("channel_mismatch", "feature level " + std::to_string(i + 1) + " has " + features[i]->shape().str());
    const std::size_t nb = opt_.block_channels.size();
    std::vector<ModParams<T>> mods(nb);
    if (!opt_.multi_level) {
      auto out = single_(ops::moments(features.back()));
      int off = 0;
      for (std::size_t b = 0; b < nb; ++b) {
        const int c = opt_.block_channels[b];
        mods[b] = {ops::slice_channels(out, off, c), ops::slice_channels(out, off + c, c), 0};
        off += 2 * c;
      }
      return mods;
    }
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      const int level = static_cast<int>(i) + 1;
      auto stats = ops::moments(reduce_channels(channel_attention(features[i], level), level));
      mods[static_cast<std::size_t>(block_of_level_[i])] = transform_statistics(stats, level);
    }
    return mods;
  }

 private:
  // Scale half of the final bias starts at 1 so AdaIN initially passes normalized features.
  static void init_unit_scale(StatTransform<T>& t) {
    for (int i = 0; i < t.target_channels; ++i) t.out.bias->value[static_cast<std::size_t>(i)] = T(1);
  }

  MustOptions opt_;
  std::vector<Level> levels_;
  std::vector<int> block_of_level_;
  StatTransform<T> single_;
};

}  // namespace mustgan
