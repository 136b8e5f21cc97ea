#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "mustgan/adversary.hpp"
#include "mustgan/encoders.hpp"
#include "mustgan/generator.hpp"
#include "mustgan/must.hpp"
#include "mustgan/parts.hpp"
#include "mustgan/pose.hpp"
#include "mustgan/synth_data.hpp"

namespace mustgan {

struct Ablation {
  bool no_must = false;  // single statistics vector from the deepest level, no per-level path
  bool no_ca = false;    // identity instead of channel attention
  bool no_pcm = false;   // joint heatmaps only, no limb connection map
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Ablation, no_must, no_ca, no_pcm)

struct ModelConfig {
  int height = 64;
  int width = 64;
  double heat_sigma = 1.5;
  double limb_thickness = 3.0;
  std::vector<int> pose_channels{64, 128, 256};
  std::vector<int> app_channels{32, 64, 128, 256};
  std::vector<int> app_strides{2, 2, 2, 2};
  std::vector<int> gen_channels{256, 128, 64, 32};
  std::vector<int> gen_upsample{0, 1, 1, 1};
  std::vector<int> level_for_block{4, 3, 2, 1};
  std::vector<int> reduced_channels{};  // empty: each level reduces to its block's width
  int attention_reduction = 4;
  int trans_hidden_multiplier = 1;
  std::vector<int> disc_channels{64, 128, 256};
  double adain_eps = 1e-5;
  double norm_eps = 1e-5;
  double leaky_slope = 0.2;
  Ablation ablation{};

  PoseRasterConfig raster() const { return {heat_sigma, limb_thickness, !ablation.no_pcm}; }
  int pose_input_channels() const { return raster().channels(); }

  std::vector<int> resolved_reduced_channels() const {
    if (!reduced_channels.empty()) return reduced_channels;
    std::vector<int> out(app_channels.size(), 0);
    for (std::size_t b = 0; b < level_for_block.size() && b < gen_channels.size(); ++b) {
      const int lv = level_for_block[b];
      if (lv >= 1 && lv <= static_cast<int>(out.size())) out[static_cast<std::size_t>(lv - 1)] = gen_channels[b];
    }
    return out;
  }

  void validate() const {
    if (height <= 0 || width <= 0) fail("invalid_config", "image size must be positive");
    auto positive_nondecreasing = [](const std::vector<int>& v, const char* what) {
      if (v.empty()) fail("invalid_config", std::string(what) + " must be non-empty");
      for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] <= 0 || (i > 0 && v[i] < v[i - 1]))
          fail("invalid_config", std::string(what) + " must be positive and nondecreasing");
    };
    positive_nondecreasing(pose_channels, "pose_channels");
    positive_nondecreasing(app_channels, "app_channels");
    if (app_channels.size() != 4) fail("invalid_config", "appearance encoder must expose exactly four levels");
    if (app_strides.size() != app_channels.size()) fail("invalid_config", "app_strides length must match app_channels");
    if (gen_channels.size() != 4 || gen_upsample.size() != 4 || level_for_block.size() != 4)
      fail("invalid_config", "generator has exactly four blocks");
    for (int c : gen_channels)
      if (c <= 0) fail("invalid_config", "gen_channels must be positive");
    for (int c : disc_channels)
      if (c <= 0) fail("invalid_config", "disc_channels must be positive");
    int enc_div = 1 << static_cast<int>(pose_channels.size());
    int ups = 1;
    for (int u : gen_upsample) ups *= u ? 2 : 1;
    if (ups != enc_div) fail("invalid_config", "generator upsampling must undo the pose encoder's downsampling");
    int app_div = 1;
    for (int s : app_strides) app_div *= s;
    const int disc_div = 1 << static_cast<int>(disc_channels.size());
    for (int d : {enc_div, app_div, disc_div})
      if (height % d || width % d) fail("invalid_config", "image size not divisible by network strides");
    if (!(adain_eps > 0) || !(norm_eps > 0)) fail("invalid_config", "epsilon must be positive");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelConfig, height, width, heat_sigma, limb_thickness, pose_channels,
                                                app_channels, app_strides, gen_channels, gen_upsample, level_for_block,
                                                reduced_channels, attention_reduction, trans_hidden_multiplier,
                                                disc_channels, adain_eps, norm_eps, leaky_slope, ablation)

/// Network inputs derived from one sample: the 24-channel part stack and the pose tensor.
struct ModelInputs {
  Tensor<float> parts;
  Tensor<float> pose;
};

inline ModelInputs prepare_inputs(const Tensor<float>& image, const SegMap& seg, const Keypoints& kp,
                                  const ModelConfig& cfg) {
  return {mask_parts(image, seg).stack, pose_input(kp, image.height(), image.width(), cfg.raster())};
}

inline ModelInputs prepare_inputs(const Sample& s, const ModelConfig& cfg) {
  return prepare_inputs(s.image, s.segmap, s.keypoints, cfg);
}

/// Independent stream per submodule so that an ablation of one submodule leaves the
/// initial weights of every other submodule unchanged.
inline Rng submodule_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  return Rng(seq);
}

/// The full model: pose encoder, appearance encoder, statistics transfer, generator, and the
/// two discriminators. Generator-side and discriminator-side parameters live in separate
/// stores so each optimizer sees only its own.
template <typename T>
class MustGan {
 public:
  struct Forward {
    Var<T> pose_code;
    std::vector<Var<T>> features;
    std::vector<ModParams<T>> mods;
    Var<T> image;
  };

  MustGan(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    const T slope = static_cast<T>(cfg.leaky_slope);
    const T eps = static_cast<T>(cfg.norm_eps);
    {
      Rng rng = submodule_rng(seed, 1);
      pose_encoder_ = PoseEncoder<T>(gen_params_, "pose_encoder", cfg.pose_input_channels(), cfg.pose_channels, rng, eps, slope);
    }
    {
      Rng rng = submodule_rng(seed, 2);
      appearance_encoder_ =
          AppearanceEncoder<T>(gen_params_, "appearance_encoder", 3 * kNumClasses, cfg.app_channels, cfg.app_strides, rng, slope);
    }
    {
      Rng rng = submodule_rng(seed, 3);
      MustOptions mo;
      mo.feature_channels = cfg.app_channels;
      mo.reduced_channels = cfg.resolved_reduced_channels();
      mo.block_channels = cfg.gen_channels;
      mo.level_for_block = cfg.level_for_block;
      mo.attention_reduction = cfg.attention_reduction;
      mo.hidden_multiplier = cfg.trans_hidden_multiplier;
      mo.channel_attention = !cfg.ablation.no_ca;
      mo.multi_level = !cfg.ablation.no_must;
      must_ = Must<T>(gen_params_, "must", mo, rng);
    }
    {
      Rng rng = submodule_rng(seed, 4);
      GeneratorOptions go{cfg.pose_channels.back(), cfg.gen_channels, cfg.gen_upsample, cfg.adain_eps};
      generator_ = Generator<T>(gen_params_, "generator", go, rng);
    }
    {
      Rng rng = submodule_rng(seed, 5);
      d_image_ = Discriminator<T>(disc_params_, "d_image", 3, cfg.disc_channels, rng, slope);
    }
    {
      Rng rng = submodule_rng(seed, 6);
      d_pose_ = Discriminator<T>(disc_params_, "d_pose", 3 + cfg.pose_input_channels(), cfg.disc_channels, rng, slope);
    }
  }

  MustGan(const MustGan&) = delete;
  MustGan& operator=(const MustGan&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& gen_params() { return gen_params_; }
  ParamStore<T>& disc_params() { return disc_params_; }
  const ParamStore<T>& gen_params() const { return gen_params_; }
  const ParamStore<T>& disc_params() const { return disc_params_; }

  const PoseEncoder<T>& pose_encoder() const { return pose_encoder_; }
  const AppearanceEncoder<T>& appearance_encoder() const { return appearance_encoder_; }
  const Must<T>& must() const { return must_; }
  const Generator<T>& generator() const { return generator_; }
  const Discriminator<T>& d_image() const { return d_image_; }
  const Discriminator<T>& d_pose() const { return d_pose_; }

  /// Appearance enters only through the modulation parameters; pose only through the code.
  Forward forward(const Var<T>& parts, const Var<T>& pose) const {
    Forward f;
    f.pose_code = pose_encoder_(pose);
    f.features = appearance_encoder_(parts);
    f.mods = must_(f.features);
    f.image = generator_(f.pose_code, f.mods);
    return f;
  }

  Var<T> generate(const Var<T>& parts, const Var<T>& pose) const { return forward(parts, pose).image; }

  Var<T> generate(const ModelInputs& in) const {
    return generate(constant(in.parts.cast<T>()), constant(in.pose.cast<T>()));
  }

  Var<T> score_image(const Var<T>& image) const { return disc_image(d_image_, image); }
  Var<T> score_pose(const Var<T>& pose, const Var<T>& image) const { return disc_pose(d_pose_, pose, image); }

 private:
  ModelConfig cfg_;
  ParamStore<T> gen_params_;
  ParamStore<T> disc_params_;
  PoseEncoder<T> pose_encoder_;
  AppearanceEncoder<T> appearance_encoder_;
  Must<T> must_;
  Generator<T> generator_;
  Discriminator<T> d_image_;
  Discriminator<T> d_pose_;
};

}  // namespace mustgan
