#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mustgan/model.hpp"
#include "mustgan/parts.hpp"
#include "mustgan/synth_data.hpp"

namespace mustgan {

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

namespace detail {

inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double sum = 0;
  for (int i = 0; i < size; ++i) sum += g[static_cast<std::size_t>(i)] = std::exp(-(i - c) * (i - c) / (2 * sigma * sigma));
  for (auto& v : g) v /= sum;
  return g;
}

// Valid-region separable filtering of one h x w plane.
inline std::vector<double> filter_valid(const std::vector<double>& p, int h, int w, const std::vector<double>& g) {
  const int k = static_cast<int>(g.size()), oh = h - k + 1, ow = w - k + 1;
  std::vector<double> rows(static_cast<std::size_t>(h * ow), 0.0), out(static_cast<std::size_t>(oh * ow), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (int i = 0; i < k; ++i) acc += g[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(y * w + x + i)];
      rows[static_cast<std::size_t>(y * ow + x)] = acc;
    }
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0;
      for (int i = 0; i < k; ++i) acc += g[static_cast<std::size_t>(i)] * rows[static_cast<std::size_t>((y + i) * ow + x)];
      out[static_cast<std::size_t>(y * ow + x)] = acc;
    }
  return out;
}

}  // namespace detail

/// Mean local SSIM with a Gaussian window over the valid region, averaged over channels.
/// Inputs are [-1, 1] images and are mapped to [0, 1] first.
inline double ssim(const Tensor<float>& a, const Tensor<float>& b, const SsimOptions& opt = {}) {
  if (!(a.shape() == b.shape())) fail("shape_mismatch", "ssim " + a.shape().str() + " vs " + b.shape().str());
  if (opt.window < 1 || opt.window > a.height() || opt.window > a.width())
    fail("window_too_large", "window " + std::to_string(opt.window) + " exceeds image " + a.shape().str());
  const auto g = detail::gaussian_window(opt.window, opt.sigma);
  const double c1 = opt.k1 * opt.k1, c2 = opt.k2 * opt.k2;
  const int h = a.height(), w = a.width();
  const std::size_t plane = static_cast<std::size_t>(h * w);
  double total = 0;
  for (int c = 0; c < a.channels(); ++c) {
    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      x[i] = (a.values()[c * plane + i] + 1.0) / 2.0;
      y[i] = (b.values()[c * plane + i] + 1.0) / 2.0;
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::filter_valid(x, h, w, g), my = detail::filter_valid(y, h, w, g);
    const auto sxx = detail::filter_valid(xx, h, w, g), syy = detail::filter_valid(yy, h, w, g);
    const auto sxy = detail::filter_valid(xy, h, w, g);
    double acc = 0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cov = sxy[i] - mx[i] * my[i];
      acc += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / a.channels();
}

/// Mean absolute RGB error, in [0, 1] units, between the pixels of class k and target_rgb.
inline double part_color_error(const Tensor<float>& image, const SegMap& seg, int k, const Rgb& target_rgb) {
  if (image.channels() != 3 || image.height() != seg.h || image.width() != seg.w)
    fail("size_mismatch", "image " + image.shape().str() + " does not match segmentation");
  if (k < 0 || k >= kNumClasses) fail("invalid_class", std::to_string(k));
  double acc = 0;
  std::size_t n = 0;
  for (int y = 0; y < seg.h; ++y)
    for (int x = 0; x < seg.w; ++x) {
      if (seg.at(y, x) != k) continue;
      for (int c = 0; c < 3; ++c) acc += std::abs((image.at(c, y, x) + 1.0) / 2.0 - target_rgb[static_cast<std::size_t>(c)]);
      ++n;
    }
  if (n == 0) fail("class_absent", std::string(kClassNames[static_cast<std::size_t>(k)]) + " not present in segmentation");
  return acc / static_cast<double>(3 * n);
}

enum class EvalMode { kReconstruct, kPoseTransfer, kStyleTransfer };

inline const char* eval_mode_name(EvalMode m) {
  switch (m) {
    case EvalMode::kReconstruct: return "reconstruct";
    case EvalMode::kPoseTransfer: return "pose_transfer";
    case EvalMode::kStyleTransfer: return "style_transfer";
  }
  return "?";
}

inline EvalMode eval_mode_from_name(const std::string& s) {
  for (EvalMode m : {EvalMode::kReconstruct, EvalMode::kPoseTransfer, EvalMode::kStyleTransfer})
    if (s == eval_mode_name(m)) return m;
  fail("invalid_argument", "unknown eval mode '" + s + "'");
}

struct EvalOptions {
  int max_pairs = 20;               // style_transfer pair budget
  double min_color_distance = 0.15; // mean per-channel distance between source and donor tops
  int swap_class = kUpperClothes;
};

struct EvalReport {
  std::string mode;
  int count = 0;
  double mean_ssim = 0;
  std::vector<double> ssim;
  double baseline_ssim = 0;
  std::vector<std::string> ids;
  // style_transfer only: error of the swapped region against the donor and the source color
  std::vector<double> color_error_style;
  std::vector<double> color_error_source;
  double transfer_success_rate = 0;
  // reserved for externally computed metrics
  std::optional<double> is, fid, lpips;
};

inline nlohmann::json to_json(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"mode", r.mode},
          {"count", r.count},
          {"mean_ssim", r.mean_ssim},
          {"ssim", r.ssim},
          {"baseline_ssim", r.baseline_ssim},
          {"ids", r.ids},
          {"color_error_style", r.color_error_style},
          {"color_error_source", r.color_error_source},
          {"transfer_success_rate", r.transfer_success_rate},
          {"is", opt(r.is)},
          {"fid", opt(r.fid)},
          {"lpips", opt(r.lpips)}};
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.mode = j.at("mode").get<std::string>();
  r.count = j.at("count").get<int>();
  r.mean_ssim = j.at("mean_ssim").get<double>();
  r.ssim = j.at("ssim").get<std::vector<double>>();
  r.baseline_ssim = j.at("baseline_ssim").get<double>();
  r.ids = j.at("ids").get<std::vector<std::string>>();
  r.color_error_style = j.at("color_error_style").get<std::vector<double>>();
  r.color_error_source = j.at("color_error_source").get<std::vector<double>>();
  r.transfer_success_rate = j.at("transfer_success_rate").get<double>();
  for (auto [key, field] : {std::pair{"is", &r.is}, {"fid", &r.fid}, {"lpips", &r.lpips}})
    if (j.contains(key) && !j.at(key).is_null()) *field = j.at(key).get<double>();
  if (r.ssim.size() != static_cast<std::size_t>(r.count) && r.color_error_style.size() != static_cast<std::size_t>(r.count))
    fail("malformed_report", "count does not match list lengths");
  return r;
}

/// Inference-only forward pass: no gradient graph is retained.
template <typename T>
Tensor<float> run_generator(const MustGan<T>& model, const Tensor<float>& parts, const Tensor<float>& pose) {
  const auto out = model.generate(constant(parts.template cast<T>()), constant(pose.template cast<T>()));
  return out->value.template cast<float>();
}

inline Tensor<float> mean_image(const std::vector<Sample>& samples) {
  Tensor<float> m(samples.front().image.shape());
  for (const auto& s : samples) m += s.image;
  for (auto& v : m.values()) v /= static_cast<float>(samples.size());
  return m;
}

/// Style-transfer pairs: both tops flat, donor top color at least min_distance away.
/// Pairs source i with the next eligible donor after it, in source order.
inline std::vector<std::pair<std::size_t, std::size_t>> style_pairs(const std::vector<Sample>& s, int max_pairs,
                                                                    double min_distance, int k = kUpperClothes) {
  auto eligible = [&](const Sample& x) {
    return x.meta && x.meta->spec.texture[static_cast<std::size_t>(k)] == Texture::kFlat && x.segmap.count(k) > 0;
  };
  auto dist = [&](const Sample& a, const Sample& b) {
    const auto& ca = a.meta->spec.part_colors[static_cast<std::size_t>(k)];
    const auto& cb = b.meta->spec.part_colors[static_cast<std::size_t>(k)];
    return (std::abs(ca[0] - cb[0]) + std::abs(ca[1] - cb[1]) + std::abs(ca[2] - cb[2])) / 3.0;
  };
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < s.size() && static_cast<int>(out.size()) < max_pairs; ++i) {
    if (!eligible(s[i])) continue;
    for (std::size_t d = 1; d < s.size(); ++d) {
      const std::size_t j = (i + d) % s.size();
      if (eligible(s[j]) && dist(s[i], s[j]) >= min_distance) {
        out.emplace_back(i, j);
        break;
      }
    }
  }
  return out;
}

/// Evaluates a model on a dataset. Deterministic given model and dataset order.
template <typename T>
EvalReport evaluate(const MustGan<T>& model, const DatasetSource& data, EvalMode mode, const EvalOptions& opt = {}) {
  const ModelConfig& cfg = model.config();
  std::vector<Sample> samples;
  for (const auto& id : data.ids()) samples.push_back(data.fetch(id));
  if (samples.empty()) fail("empty_dataset", "dataset has no samples");
  for (const auto& s : samples)
    if (s.image.height() != cfg.height || s.image.width() != cfg.width)
      fail("incompatible_checkpoint", "model expects " + std::to_string(cfg.height) + "x" + std::to_string(cfg.width) +
                                          " images, sample " + s.id + " is " + s.image.shape().str());
  EvalReport r;
  r.mode = eval_mode_name(mode);
  const Tensor<float> mean = mean_image(samples);
  double base = 0;

  if (mode == EvalMode::kStyleTransfer) {
    const auto pairs = style_pairs(samples, opt.max_pairs, opt.min_color_distance, opt.swap_class);
    if (pairs.empty()) fail("no_style_pairs", "dataset has no eligible flat-top pairs");
    int wins = 0;
    for (const auto& [i, j] : pairs) {
      const Sample& src = samples[i];
      const Sample& donor = samples[j];
      const ModelInputs in = prepare_inputs(src, cfg);
      const PartStack swapped = swap_part(mask_parts(src.image, src.segmap), mask_parts(donor.image, donor.segmap), opt.swap_class);
      const Tensor<float> out = run_generator(model, swapped.stack, in.pose);
      const auto k = static_cast<std::size_t>(opt.swap_class);
      const double e_style = part_color_error(out, src.segmap, opt.swap_class, donor.meta->spec.part_colors[k]);
      const double e_src = part_color_error(out, src.segmap, opt.swap_class, src.meta->spec.part_colors[k]);
      r.color_error_style.push_back(e_style);
      r.color_error_source.push_back(e_src);
      r.ids.push_back(src.id + "+" + donor.id);
      if (e_style < e_src) ++wins;
    }
    r.count = static_cast<int>(pairs.size());
    r.transfer_success_rate = static_cast<double>(wins) / r.count;
    return r;
  }

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& src = samples[i];
    Tensor<float> target, out;
    if (mode == EvalMode::kReconstruct) {
      const ModelInputs in = prepare_inputs(src, cfg);
      out = run_generator(model, in.parts, in.pose);
      target = src.image;
    } else {
      const Sample& other = samples[(i + 1) % samples.size()];
      if (!src.meta || !other.meta) fail("missing_meta", "pose transfer needs synthetic samples with metadata");
      const Sample gt = generate_sprite(src.meta->spec, other.meta->pose, cfg.height, cfg.width, src.id);
      out = run_generator(model, mask_parts(src.image, src.segmap).stack,
                          pose_input(gt.keypoints, cfg.height, cfg.width, cfg.raster()));
      target = gt.image;
    }
    r.ssim.push_back(ssim(out, target));
    base += ssim(mean, target);
    r.ids.push_back(src.id);
  }
  r.count = static_cast<int>(r.ssim.size());
  for (double v : r.ssim) r.mean_ssim += v;
  r.mean_ssim /= r.count;
  r.baseline_ssim = base / r.count;
  return r;
}

}  // namespace mustgan
