#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "mustgan/image_io.hpp"
#include "mustgan/parts.hpp"
#include "mustgan/pose.hpp"

namespace mustgan {

enum class Texture { kFlat, kStripes, kChecker };
enum class Bottom { kPants, kSkirt };

inline const char* texture_name(Texture t) {
  switch (t) {
    case Texture::kStripes: return "stripes";
    case Texture::kChecker: return "checker";
    default: return "flat";
  }
}

inline Texture texture_from_name(const std::string& s) {
  if (s == "flat") return Texture::kFlat;
  if (s == "stripes") return Texture::kStripes;
  if (s == "checker") return Texture::kChecker;
  fail("malformed_json", "unknown texture '" + s + "'");
}

using Rgb = std::array<double, 3>;

/// Appearance of one sprite person. part_colors[0] is the background color; classes
/// 1..7 are the garment/body parts. Colors are rendered at 8-bit precision.
struct SpriteSpec {
  std::array<Rgb, kNumClasses> part_colors{};
  std::array<Texture, kNumClasses> texture{};
  Bottom bottom = Bottom::kPants;
  double body_scale = 1.0;

  void validate() const {
    for (const auto& c : part_colors)
      for (double v : c)
        if (!(v >= 0.0 && v <= 1.0)) fail("invalid_spec", "part color component outside [0, 1]");
    if (!(body_scale >= 0.5 && body_scale <= 1.5)) fail("invalid_spec", "body_scale outside [0.5, 1.5]");
  }
};

struct AngleBound {
  const char* limb;
  double lo;
  double hi;
};

/// Plausible angle ranges (radians). Arms and legs are measured from hanging straight down,
/// positive away from the body's midline; forearm and shin angles are bends relative to the
/// parent segment; head is the tilt of the neck-to-head axis.
inline constexpr std::array<AngleBound, 9> kAngleBounds = {{
    {"head", -0.4, 0.4},
    {"r_upper_arm", -0.3, 2.2},
    {"l_upper_arm", -0.3, 2.2},
    {"r_forearm", -1.5, 1.5},
    {"l_forearm", -1.5, 1.5},
    {"r_thigh", -0.2, 0.7},
    {"l_thigh", -0.2, 0.7},
    {"r_shin", -0.6, 0.6},
    {"l_shin", -0.6, 0.6},
}};

inline constexpr double kMaxRootTilt = 0.3;

struct PoseParams {
  std::map<std::string, double> joint_angles;
  std::array<double, 2> root_position{0.5, 0.6};  // pelvis center, normalized (x, y)
  double root_orientation = 0.0;                  // torso tilt, radians

  double angle(const char* limb) const {
    auto it = joint_angles.find(limb);
    return it == joint_angles.end() ? 0.0 : it->second;
  }

  void validate() const {
    for (const auto& [name, value] : joint_angles) {
      const AngleBound* b = nullptr;
      for (const auto& ab : kAngleBounds)
        if (name == ab.limb) b = &ab;
      if (!b) fail("invalid_pose", "unknown limb '" + name + "'");
      if (value < b->lo || value > b->hi) fail("invalid_pose", "angle of " + name + " out of bounds");
    }
    if (std::abs(root_orientation) > kMaxRootTilt) fail("invalid_pose", "root_orientation out of bounds");
    for (double v : root_position)
      if (!(v >= 0.0 && v <= 1.0)) fail("out_of_bounds", "root_position outside the unit square");
  }
};

struct SampleMeta {
  SpriteSpec spec;
  PoseParams pose;
};

struct Sample {
  std::string id;
  Tensor<float> image;  // 3 x H x W, [-1, 1]
  Keypoints keypoints;
  SegMap segmap;
  std::optional<SampleMeta> meta;  // present for synthetic samples
};

inline float color_value(double c) { return from_byte(static_cast<std::uint8_t>(std::lround(c * 255.0))); }

/// Second stripe/checker color: the base color at half intensity (8-bit floor).
inline float shade_value(double c) {
  return from_byte(static_cast<std::uint8_t>(std::lround(c * 255.0) / 2));
}

namespace sprite {

struct Vec2 {
  double x, y;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }

// Body-frame direction for a limb hanging down and swung by `a` radians; `side` is -1 for the
// person's right (image left) and +1 for the left.
inline Vec2 limb_dir(double a, int side) { return {side * std::sin(a), std::cos(a)}; }

/// Body-frame skeleton (units of 1/64 frame height at body_scale 1), origin at the pelvis
/// center, y pointing down.
struct Skeleton {
  std::array<Vec2, kNumJoints> joint{};
  Vec2 head_center{};
  Vec2 head_dir{};  // unit vector from neck toward the top of the head
};

inline Skeleton build_skeleton(const PoseParams& pose) {
  Skeleton s;
  auto& j = s.joint;
  j[kNeck] = {0, -16};
  j[kRHip] = {-3.5, 0};
  j[kLHip] = {3.5, 0};
  j[kRShoulder] = {-5.5, -15};
  j[kLShoulder] = {5.5, -15};
  const double ht = pose.angle("head");
  s.head_dir = {std::sin(ht), -std::cos(ht)};
  s.head_center = j[kNeck] + 6.5 * s.head_dir;
  const Vec2 perp{-s.head_dir.y, s.head_dir.x};  // image-right when upright
  j[kNose] = s.head_center;
  j[kREye] = s.head_center + (-1.8) * perp + 1.2 * s.head_dir;
  j[kLEye] = s.head_center + 1.8 * perp + 1.2 * s.head_dir;
  j[kREar] = s.head_center + (-4.0) * perp + 0.3 * s.head_dir;
  j[kLEar] = s.head_center + 4.0 * perp + 0.3 * s.head_dir;

  const double rua = pose.angle("r_upper_arm"), lua = pose.angle("l_upper_arm");
  j[kRElbow] = j[kRShoulder] + 9.0 * limb_dir(rua, -1);
  j[kLElbow] = j[kLShoulder] + 9.0 * limb_dir(lua, 1);
  j[kRWrist] = j[kRElbow] + 8.0 * limb_dir(rua + pose.angle("r_forearm"), -1);
  j[kLWrist] = j[kLElbow] + 8.0 * limb_dir(lua + pose.angle("l_forearm"), 1);

  const double rth = pose.angle("r_thigh"), lth = pose.angle("l_thigh");
  j[kRKnee] = j[kRHip] + 10.0 * limb_dir(rth, -1);
  j[kLKnee] = j[kLHip] + 10.0 * limb_dir(lth, 1);
  j[kRAnkle] = j[kRKnee] + 10.0 * limb_dir(rth + pose.angle("r_shin"), -1);
  j[kLAnkle] = j[kLKnee] + 10.0 * limb_dir(lth + pose.angle("l_shin"), 1);
  return s;
}

inline double seg_dist(Vec2 p, Vec2 a, Vec2 b) { return point_segment_distance(p.x, p.y, a.x, a.y, b.x, b.y); }

inline bool in_convex(Vec2 p, const std::array<Vec2, 4>& q) {
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2 a = q[i], b = q[(i + 1) % 4];
    const double cr = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    pos = pos || cr > 0;
    neg = neg || cr < 0;
  }
  return !(pos && neg);
}

// Part label of a body-frame point, painter's order: legs, skirt, torso, head, arms.
inline int classify(Vec2 p, const Skeleton& s, Bottom bottom) {
  const auto& j = s.joint;
  int label = kBackground;
  const bool pants = bottom == Bottom::kPants;
  const double thigh_r = pants ? 2.5 : 2.3, shin_r = pants ? 2.2 : 2.0;
  if (seg_dist(p, j[kRHip], j[kRKnee]) <= thigh_r || seg_dist(p, j[kLHip], j[kLKnee]) <= thigh_r ||
      seg_dist(p, j[kRKnee], j[kRAnkle]) <= shin_r || seg_dist(p, j[kLKnee], j[kLAnkle]) <= shin_r)
    label = pants ? kPants : kLeg;
  if (!pants && in_convex(p, {{{-5, -1}, {5, -1}, {8, 9}, {-8, 9}}})) label = kSkirt;
  if (in_convex(p, {{{-6, -16.5}, {6, -16.5}, {4.5, 1}, {-4.5, 1}}})) label = kUpperClothes;

  const Vec2 rel{p.x - s.head_center.x, p.y - s.head_center.y};
  const double hd = std::sqrt(rel.x * rel.x + rel.y * rel.y);
  const double along = rel.x * s.head_dir.x + rel.y * s.head_dir.y;
  if (seg_dist(p, j[kNeck], s.head_center) <= 1.8) label = kFace;
  if (hd <= 5.5 && along >= 1.5) label = kHair;
  else if (hd <= 5.0) label = kFace;

  if (seg_dist(p, j[kRShoulder], j[kRElbow]) <= 1.8 || seg_dist(p, j[kLShoulder], j[kLElbow]) <= 1.8 ||
      seg_dist(p, j[kRElbow], j[kRWrist]) <= 1.6 || seg_dist(p, j[kLElbow], j[kLWrist]) <= 1.6)
    label = kArm;
  return label;
}

}  // namespace sprite

/// Renders one sprite person. Pixel (col, row) is sampled at its center (col, row).
inline Sample generate_sprite(const SpriteSpec& spec, const PoseParams& pose, int h, int w, std::string id = "sprite") {
  if (h <= 0 || w <= 0 || h % 16 != 0 || w % 16 != 0)
    fail("invalid_size", "image size must be a positive multiple of 16, got " + std::to_string(h) + "x" +
                             std::to_string(w));
  spec.validate();
  pose.validate();
  using sprite::Vec2;
  const double unit = (std::min(h, w) / 64.0) * spec.body_scale;
  const double rx = pose.root_position[0] * w, ry = pose.root_position[1] * h;
  const double ct = std::cos(pose.root_orientation), st = std::sin(pose.root_orientation);
  const sprite::Skeleton skel = sprite::build_skeleton(pose);

  Sample s;
  s.id = std::move(id);
  s.meta = SampleMeta{spec, pose};
  for (int k = 0; k < kNumJoints; ++k) {
    const Vec2 b = skel.joint[static_cast<std::size_t>(k)];
    auto& kp = s.keypoints.joints[static_cast<std::size_t>(k)];
    kp.x = rx + unit * (ct * b.x - st * b.y);
    kp.y = ry + unit * (st * b.x + ct * b.y);
    kp.visible = in_frame(kp, h, w);
  }

  s.image = Tensor<float>(3, h, w);
  s.segmap = SegMap(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x - rx, dy = y - ry;
      const Vec2 body{(ct * dx + st * dy) / unit, (-st * dx + ct * dy) / unit};
      const int label = sprite::classify(body, skel, spec.bottom);
      s.segmap.at(y, x) = static_cast<std::uint8_t>(label);
      const Rgb& col = spec.part_colors[static_cast<std::size_t>(label)];
      bool shaded = false;
      switch (spec.texture[static_cast<std::size_t>(label)]) {
        case Texture::kStripes: shaded = static_cast<long>(std::floor(dy / 2.0)) % 2 != 0; break;
        case Texture::kChecker:
          shaded = (static_cast<long>(std::floor(dx / 2.0)) + static_cast<long>(std::floor(dy / 2.0))) % 2 != 0;
          break;
        default: break;
      }
      for (int c = 0; c < 3; ++c)
        s.image.at(c, y, x) = shaded ? shade_value(col[static_cast<std::size_t>(c)]) : color_value(col[static_cast<std::size_t>(c)]);
    }
  }
  return s;
}

/// Uniform draw of a 0..255 color, returned in [0, 1].
inline Rgb random_color(Rng& rng) {
  std::uniform_int_distribution<int> byte(0, 255);
  return {byte(rng) / 255.0, byte(rng) / 255.0, byte(rng) / 255.0};
}

/// Documented sampling ranges for the synthetic dataset:
///   colors: every channel uniform over 0..255; skin shared by face/arm/leg; background
///           uniform over 200..240 gray.
///   textures: upper_clothes/pants/skirt flat 1/2, stripes 1/4, checker 1/4; others flat.
///   bottom: pants or skirt with probability 1/2; body_scale uniform [0.85, 1.05].
///   pose: root x uniform [0.42, 0.58], root y uniform [0.55, 0.6], tilt uniform [-0.15, 0.15],
///         each limb angle uniform over the middle 60% of its bound.
inline std::pair<SpriteSpec, PoseParams> random_sprite_params(Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> gray(200, 240);
  SpriteSpec spec;
  const double bg = gray(rng) / 255.0;
  spec.part_colors[kBackground] = {bg, bg, bg};
  const Rgb skin = random_color(rng);
  for (int k : {kUpperClothes, kPants, kSkirt, kHair}) spec.part_colors[static_cast<std::size_t>(k)] = random_color(rng);
  for (int k : {kFace, kArm, kLeg}) spec.part_colors[static_cast<std::size_t>(k)] = skin;
  for (int k : {kUpperClothes, kPants, kSkirt}) {
    const double u = unit(rng);
    spec.texture[static_cast<std::size_t>(k)] = u < 0.5 ? Texture::kFlat : (u < 0.75 ? Texture::kStripes : Texture::kChecker);
  }
  spec.bottom = unit(rng) < 0.5 ? Bottom::kPants : Bottom::kSkirt;
  spec.body_scale = 0.85 + 0.2 * unit(rng);

  PoseParams pose;
  pose.root_position = {0.42 + 0.16 * unit(rng), 0.55 + 0.05 * unit(rng)};
  pose.root_orientation = -0.15 + 0.3 * unit(rng);
  for (const auto& b : kAngleBounds) {
    const double span = b.hi - b.lo;
    pose.joint_angles[b.limb] = b.lo + span * (0.2 + 0.6 * unit(rng));
  }
  return {spec, pose};
}

inline std::vector<Sample> sample_dataset(int n, std::uint64_t seed, int h, int w) {
  if (n < 1) fail("invalid_argument", "dataset size must be >= 1");
  Rng rng(seed);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto [spec, pose] = random_sprite_params(rng);
    char id[48];
    std::snprintf(id, sizeof id, "s%llu_%05d", static_cast<unsigned long long>(seed), i);
    out.push_back(generate_sprite(spec, pose, h, w, id));
  }
  return out;
}

// ---------------------------------------------------------------------------------------
// On-disk format: <dir>/manifest.json {"ids": [...]} and one <dir>/<id>/ directory per
// sample holding image.png (RGB), segmap.png (gray, labels 0..7), keypoints.json
// ([[x, y, v] x 18]) and, for synthetic samples, meta.json.

using json = nlohmann::json;

inline json spec_to_json(const SpriteSpec& s) {
  json j;
  json colors = json::object(), tex = json::object();
  for (int k = 0; k < kNumClasses; ++k) {
    colors[kClassNames[static_cast<std::size_t>(k)]] = s.part_colors[static_cast<std::size_t>(k)];
    tex[kClassNames[static_cast<std::size_t>(k)]] = texture_name(s.texture[static_cast<std::size_t>(k)]);
  }
  j["part_colors"] = colors;
  j["texture"] = tex;
  j["bottom"] = s.bottom == Bottom::kPants ? "pants" : "skirt";
  j["body_scale"] = s.body_scale;
  return j;
}

inline SpriteSpec spec_from_json(const json& j) {
  SpriteSpec s;
  for (int k = 0; k < kNumClasses; ++k) {
    const char* name = kClassNames[static_cast<std::size_t>(k)];
    s.part_colors[static_cast<std::size_t>(k)] = j.at("part_colors").at(name).get<Rgb>();
    s.texture[static_cast<std::size_t>(k)] = texture_from_name(j.at("texture").at(name).get<std::string>());
  }
  s.bottom = j.at("bottom").get<std::string>() == "skirt" ? Bottom::kSkirt : Bottom::kPants;
  s.body_scale = j.at("body_scale").get<double>();
  return s;
}

inline json pose_to_json(const PoseParams& p) {
  return {{"joint_angles", p.joint_angles}, {"root_position", p.root_position}, {"root_orientation", p.root_orientation}};
}

inline PoseParams pose_from_json(const json& j) {
  PoseParams p;
  p.joint_angles = j.at("joint_angles").get<std::map<std::string, double>>();
  p.root_position = j.at("root_position").get<std::array<double, 2>>();
  p.root_orientation = j.at("root_orientation").get<double>();
  return p;
}

inline json keypoints_to_json(const Keypoints& kp) {
  json arr = json::array();
  for (const auto& jt : kp.joints) arr.push_back({jt.x, jt.y, jt.visible ? 1 : 0});
  return arr;
}

inline Keypoints keypoints_from_json(const json& arr) {
  if (!arr.is_array() || arr.size() != kNumJoints) fail("malformed_json", "keypoints must be an array of 18 [x, y, v]");
  Keypoints kp;
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    const auto& e = arr[i];
    if (!e.is_array() || e.size() != 3) fail("malformed_json", "keypoint entry must be [x, y, v]");
    kp.joints[i] = {e[0].get<double>(), e[1].get<double>(), e[2].get<int>() != 0};
  }
  return kp;
}

inline json read_json(const std::filesystem::path& path, const std::string& missing_code = "missing_file") {
  std::ifstream in(path);
  if (!in) fail(missing_code, path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail("malformed_json", path.string() + ": " + e.what());
  }
}

/// Writes `text` to `path` via a sibling temp file and rename, so readers never see a
/// partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail("io_error", "cannot open " + tmp.string());
    out << text;
    out.flush();
    if (!out) fail("io_error", "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail("io_error", "rename to " + path.string() + " failed: " + ec.message());
}

inline void write_manifest(const std::filesystem::path& dir, const std::vector<std::string>& ids) {
  write_file_atomic(dir / "manifest.json", json{{"ids", ids}}.dump(1) + "\n");
}

inline std::vector<std::string> read_manifest(const std::filesystem::path& dir) {
  const json j = read_json(dir / "manifest.json", "missing_manifest");
  try {
    return j.at("ids").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail("malformed_json", "manifest.json: " + std::string(e.what()));
  }
}

/// Writes the sample directory and registers its id in the manifest.
inline void save_sample(const Sample& s, const std::filesystem::path& dir) {
  if (s.image.height() != s.segmap.h || s.image.width() != s.segmap.w)
    fail("size_mismatch", "image and segmap sizes differ for " + s.id);
  std::filesystem::create_directories(dir / s.id);
  const auto sd = dir / s.id;
  save_image(sd / "image.png", s.image);
  write_png(sd / "segmap.png", RawImage{s.segmap.h, s.segmap.w, 1, s.segmap.labels});
  write_file_atomic(sd / "keypoints.json", keypoints_to_json(s.keypoints).dump() + "\n");
  if (s.meta)
    write_file_atomic(sd / "meta.json",
                      json{{"spec", spec_to_json(s.meta->spec)}, {"pose", pose_to_json(s.meta->pose)}}.dump(1) + "\n");
  std::vector<std::string> ids;
  if (std::filesystem::exists(dir / "manifest.json")) ids = read_manifest(dir);
  if (std::find(ids.begin(), ids.end(), s.id) == ids.end()) ids.push_back(s.id);
  write_manifest(dir, ids);
}

inline void save_dataset(const std::vector<Sample>& samples, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> ids;
  for (const auto& s : samples) {
    if (std::find(ids.begin(), ids.end(), s.id) != ids.end()) fail("duplicate_id", s.id);
    const auto sd = dir / s.id;
    std::filesystem::create_directories(sd);
    save_image(sd / "image.png", s.image);
    write_png(sd / "segmap.png", RawImage{s.segmap.h, s.segmap.w, 1, s.segmap.labels});
    write_file_atomic(sd / "keypoints.json", keypoints_to_json(s.keypoints).dump() + "\n");
    if (s.meta)
      write_file_atomic(sd / "meta.json",
                        json{{"spec", spec_to_json(s.meta->spec)}, {"pose", pose_to_json(s.meta->pose)}}.dump(1) + "\n");
    ids.push_back(s.id);
  }
  write_manifest(dir, ids);
}

inline Sample load_sample(const std::filesystem::path& dir, const std::string& id) {
  const auto sd = dir / id;
  if (!std::filesystem::is_directory(sd)) fail("missing_sample", id);
  Sample s;
  s.id = id;
  if (!std::filesystem::exists(sd / "image.png")) fail("missing_image", (sd / "image.png").string());
  s.image = load_image(sd / "image.png");
  if (!std::filesystem::exists(sd / "segmap.png")) fail("missing_segmentation", (sd / "segmap.png").string());
  RawImage seg = read_png(sd / "segmap.png");
  if (seg.channels != 1) fail("malformed_png", "segmap must be single-channel");
  if (seg.h != s.image.height() || seg.w != s.image.width())
    fail("size_mismatch", "image and segmap sizes differ for " + id);
  s.segmap.h = seg.h;
  s.segmap.w = seg.w;
  s.segmap.labels = std::move(seg.bytes);
  for (auto l : s.segmap.labels)
    if (l >= kNumClasses) fail("label_out_of_range", "segmap label " + std::to_string(l) + " in " + id);
  s.keypoints = keypoints_from_json(read_json(sd / "keypoints.json", "missing_keypoints"));
  if (std::filesystem::exists(sd / "meta.json")) {
    const json m = read_json(sd / "meta.json");
    try {
      s.meta = SampleMeta{spec_from_json(m.at("spec")), pose_from_json(m.at("pose"))};
    } catch (const json::exception& e) {
      fail("malformed_json", "meta.json: " + std::string(e.what()));
    }
  }
  return s;
}

/// Source of training/evaluation samples. Real datasets plug in by implementing this.
class DatasetSource {
 public:
  virtual ~DatasetSource() = default;
  virtual std::vector<std::string> ids() const = 0;
  virtual Sample fetch(const std::string& id) const = 0;
};

class MemorySource : public DatasetSource {
 public:
  explicit MemorySource(std::vector<Sample> samples) : samples_(std::move(samples)) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      if (!seen.insert(samples_[i].id).second) fail("duplicate_id", samples_[i].id);
      index_[samples_[i].id] = i;
    }
  }
  std::vector<std::string> ids() const override {
    std::vector<std::string> out;
    for (const auto& s : samples_) out.push_back(s.id);
    return out;
  }
  Sample fetch(const std::string& id) const override {
    auto it = index_.find(id);
    if (it == index_.end()) fail("missing_sample", id);
    return samples_[it->second];
  }

 private:
  std::vector<Sample> samples_;
  std::map<std::string, std::size_t> index_;
};

/// Reads samples lazily from a dataset directory written by save_dataset/save_sample.
class DirectorySource : public DatasetSource {
 public:
  explicit DirectorySource(std::filesystem::path dir) : dir_(std::move(dir)), ids_(read_manifest(dir_)) {}
  std::vector<std::string> ids() const override { return ids_; }
  Sample fetch(const std::string& id) const override { return load_sample(dir_, id); }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> ids_;
};

}  // namespace mustgan
