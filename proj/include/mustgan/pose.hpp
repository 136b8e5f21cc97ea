#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>

#include "mustgan/tensor.hpp"

namespace mustgan {

inline constexpr int kNumJoints = 18;

/// 18-joint 2D pose convention (nose, neck, right arm, left arm, right leg, left leg, eyes, ears).
enum Joint : int {
  kNose = 0,
  kNeck,
  kRShoulder,
  kRElbow,
  kRWrist,
  kLShoulder,
  kLElbow,
  kLWrist,
  kRHip,
  kRKnee,
  kRAnkle,
  kLHip,
  kLKnee,
  kLAnkle,
  kREye,
  kLEye,
  kREar,
  kLEar,
};

inline constexpr std::array<const char*, kNumJoints> kJointNames = {
    "nose",      "neck",   "r_shoulder", "r_elbow", "r_wrist", "l_shoulder", "l_elbow", "l_wrist", "r_hip",
    "r_knee",    "r_ankle", "l_hip",     "l_knee",  "l_ankle", "r_eye",      "l_eye",   "r_ear",   "l_ear"};

struct Limb {
  int a;
  int b;
  const char* name;
};

/// Trunk and limb segments rasterized into the connection map.
inline constexpr std::array<Limb, 13> kLimbs = {{
    {kNeck, kNose, "neck_nose"},
    {kNeck, kRShoulder, "neck_r_shoulder"},
    {kNeck, kLShoulder, "neck_l_shoulder"},
    {kRShoulder, kRElbow, "r_upper_arm"},
    {kLShoulder, kLElbow, "l_upper_arm"},
    {kRElbow, kRWrist, "r_forearm"},
    {kLElbow, kLWrist, "l_forearm"},
    {kNeck, kRHip, "neck_r_hip"},
    {kNeck, kLHip, "neck_l_hip"},
    {kRHip, kRKnee, "r_thigh"},
    {kLHip, kLKnee, "l_thigh"},
    {kRKnee, kRAnkle, "r_shin"},
    {kLKnee, kLAnkle, "l_shin"},
}};

inline constexpr int kNumLimbs = static_cast<int>(kLimbs.size());

struct KeypointEntry {
  double x = 0;
  double y = 0;
  bool visible = false;
  bool operator==(const KeypointEntry&) const = default;
};

/// Joint positions in pixels; pixel (col, row) has its center at integer coordinates (col, row).
struct Keypoints {
  std::array<KeypointEntry, kNumJoints> joints{};
  bool operator==(const Keypoints&) const = default;

  Keypoints translated(double dx, double dy) const {
    Keypoints k = *this;
    for (auto& j : k.joints) {
      j.x += dx;
      j.y += dy;
    }
    return k;
  }
};

inline bool in_frame(const KeypointEntry& j, int h, int w) {
  return j.x >= 0 && j.x < w && j.y >= 0 && j.y < h;
}

/// One unnormalized Gaussian (peak 1) per visible joint; invisible joints give zero channels.
inline Tensor<float> rasterize_heatmaps(const Keypoints& kp, int h, int w, double sigma) {
  if (!(sigma > 0)) fail("invalid_argument", "heatmap sigma must be positive");
  Tensor<float> out(kNumJoints, h, w);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int j = 0; j < kNumJoints; ++j) {
    const auto& jt = kp.joints[static_cast<std::size_t>(j)];
    if (!jt.visible) continue;
    if (!in_frame(jt, h, w))
      fail("joint_out_of_frame", std::string(kJointNames[static_cast<std::size_t>(j)]) + " at (" +
                                     std::to_string(jt.x) + ", " + std::to_string(jt.y) + ")");
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double d2 = (x - jt.x) * (x - jt.x) + (y - jt.y) * (y - jt.y);
        out.at(j, y, x) = static_cast<float>(std::exp(-d2 * inv));
      }
  }
  return out;
}

inline double point_segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = 0;
  if (len2 > 0) t = std::clamp(((px - ax) * vx + (py - ay) * vy) / len2, 0.0, 1.0);
  const double cx = ax + t * vx - px, cy = ay + t * vy - py;
  return std::sqrt(cx * cx + cy * cy);
}

/// Channel l is 1 within thickness/2 of limb l's segment, falling off linearly to 0 over
/// one further pixel. A limb with an invisible endpoint yields a zero channel.
inline Tensor<float> rasterize_connections(const Keypoints& kp, int h, int w, double thickness,
                                           std::span<const Limb> limbs = kLimbs) {
  if (!(thickness >= 1)) fail("invalid_argument", "limb thickness must be >= 1");
  Tensor<float> out(static_cast<int>(limbs.size()), h, w);
  const double half = thickness / 2.0;
  for (std::size_t l = 0; l < limbs.size(); ++l) {
    const auto& a = kp.joints[static_cast<std::size_t>(limbs[l].a)];
    const auto& b = kp.joints[static_cast<std::size_t>(limbs[l].b)];
    if (!a.visible || !b.visible) continue;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double d = point_segment_distance(x, y, a.x, a.y, b.x, b.y);
        const double v = d <= half ? 1.0 : std::max(0.0, 1.0 - (d - half));
        out.at(static_cast<int>(l), y, x) = static_cast<float>(v);
      }
  }
  return out;
}

struct PoseRasterConfig {
  double sigma = 1.5;
  double thickness = 3.0;
  bool connections = true;

  int channels() const { return kNumJoints + (connections ? kNumLimbs : 0); }
};

/// [heatmaps; connection map] along channels. Without connections only the 18 heatmaps.
inline Tensor<float> pose_input(const Keypoints& kp, int h, int w, const PoseRasterConfig& cfg = {}) {
  Tensor<float> heat = rasterize_heatmaps(kp, h, w, cfg.sigma);
  if (!cfg.connections) return heat;
  return concat_channels(heat, rasterize_connections(kp, h, w, cfg.thickness));
}

}  // namespace mustgan
