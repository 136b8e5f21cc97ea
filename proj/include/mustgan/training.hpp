#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mustgan/losses.hpp"
#include "mustgan/model.hpp"
#include "mustgan/optim.hpp"

namespace mustgan {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LossWeights, adv, rec, perc, style)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PerceptualOptions, channels, perceptual_layer, seed)

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double lr_g = 1e-4;
  double lr_d = 4e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // epochs between periodic checkpoints; 0 writes only the final one
  LossWeights weights{};
  PerceptualOptions perceptual{};

  void validate() const {
    if (!(lr_g > 0) || !(lr_d > 0)) fail("invalid_config", "learning rates must be positive");
    if (batch_size < 1) fail("invalid_config", "batch_size must be >= 1");
    if (epochs < 0) fail("invalid_config", "epochs must be >= 0");
    weights.validate();
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, epochs, batch_size, lr_g, lr_d, beta1, beta2, seed,
                                                checkpoint_every, weights, perceptual)

struct ExperimentConfig {
  ModelConfig model{};
  TrainConfig train{};
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExperimentConfig, model, train)

/// Per-step record written to the metrics log (batch means).
struct StepMetrics {
  int epoch = 0;
  std::int64_t step = 0;
  double l_adv_g = 0;
  double l_adv_d = 0;
  double l_rec = 0;
  double l_perc = 0;
  double l_style = 0;
  double l_total = 0;
  std::vector<std::string> ids;
};

inline nlohmann::json to_json_record(const StepMetrics& m) {
  return {{"epoch", m.epoch}, {"step", m.step},     {"l_adv_g", m.l_adv_g}, {"l_adv_d", m.l_adv_d},
          {"l_rec", m.l_rec}, {"l_perc", m.l_perc}, {"l_style", m.l_style}, {"l_total", m.l_total}};
}

struct EpochSummary {
  int epoch = 0;  // 1-based
  double mean_rec = 0;
  double mean_total = 0;
  double mean_adv_d = 0;
  int steps = 0;
};

/// Self-describing checkpoint: version tag, config JSON, counters, RNG state and named
/// float32 little-endian tensors.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  nlohmann::json config;
  int epoch = 0;
  std::int64_t step = 0;
  std::int64_t adam_g_steps = 0;
  std::int64_t adam_d_steps = 0;
  std::string rng_state;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>& tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return t;
    fail("corrupt_checkpoint", "missing tensor " + name);
  }
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'M', 'U', 'S', 'T', 'C', 'K', 'P', 'T'};

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : b_(bytes) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) fail("corrupt_checkpoint", "unexpected end of file");
  }
  const std::string& b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
  std::string out(detail::kCheckpointMagic, 8);
  detail::put_u32(out, Checkpoint::kVersion);
  nlohmann::json meta = {{"config", ck.config},
                         {"epoch", ck.epoch},
                         {"step", ck.step},
                         {"adam_g_steps", ck.adam_g_steps},
                         {"adam_d_steps", ck.adam_d_steps},
                         {"rng_state", ck.rng_state}};
  const std::string js = meta.dump();
  detail::put_u64(out, js.size());
  out += js;
  detail::put_u32(out, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_u32(out, static_cast<std::uint32_t>(t.channels()));
    detail::put_u32(out, static_cast<std::uint32_t>(t.height()));
    detail::put_u32(out, static_cast<std::uint32_t>(t.width()));
    for (float v : t.values()) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), detail::kCheckpointMagic, 8) != 0)
    fail("corrupt_checkpoint", "bad magic");
  detail::Reader r(bytes);
  r.bytes(8);
  const std::uint32_t version = r.u32();
  if (version != Checkpoint::kVersion)
    fail("version_mismatch", "checkpoint version " + std::to_string(version) + ", expected " +
                                 std::to_string(Checkpoint::kVersion));
  Checkpoint ck;
  try {
    const auto meta = nlohmann::json::parse(r.bytes(r.u64()));
    ck.config = meta.at("config");
    ck.epoch = meta.at("epoch").get<int>();
    ck.step = meta.at("step").get<std::int64_t>();
    ck.adam_g_steps = meta.at("adam_g_steps").get<std::int64_t>();
    ck.adam_d_steps = meta.at("adam_d_steps").get<std::int64_t>();
    ck.rng_state = meta.at("rng_state").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail("corrupt_checkpoint", std::string("metadata: ") + e.what());
  }
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.bytes(r.u32());
    const int c = static_cast<int>(r.u32()), h = static_cast<int>(r.u32()), w = static_cast<int>(r.u32());
    if (static_cast<std::uint64_t>(c) * h * w > (bytes.size() / 4)) fail("corrupt_checkpoint", "tensor too large");
    Tensor<float> t(c, h, w);
    for (auto& v : t.values()) v = std::bit_cast<float>(r.u32());
    ck.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) fail("corrupt_checkpoint", "trailing bytes");
  return ck;
}

inline void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(ck));
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("missing_file", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

/// Disables gradient bookkeeping on every parameter for the guard's lifetime.
template <typename T>
class InferenceGuard {
 public:
  explicit InferenceGuard(MustGan<T>& m) : m_(m), g_(m.gen_params().trainable()), d_(m.disc_params().trainable()) {
    m_.gen_params().set_trainable(false);
    m_.disc_params().set_trainable(false);
  }
  ~InferenceGuard() {
    m_.gen_params().set_trainable(g_);
    m_.disc_params().set_trainable(d_);
  }
  InferenceGuard(const InferenceGuard&) = delete;
  InferenceGuard& operator=(const InferenceGuard&) = delete;

 private:
  MustGan<T>& m_;
  bool g_, d_;
};

/// Self-driven trainer: every sample supervises its own reconstruction from its part stack
/// and pose. One discriminator update, then one generator update, per batch.
template <typename T = float>
class Trainer {
 public:
  explicit Trainer(ExperimentConfig cfg)
      : cfg_(std::move(cfg)),
        model_((cfg_.model.validate(), cfg_.train.validate(), cfg_.model), cfg_.train.seed),
        phi_(cfg_.train.perceptual),
        adam_g_(model_.gen_params(), {cfg_.train.lr_g, cfg_.train.beta1, cfg_.train.beta2}),
        adam_d_(model_.disc_params(), {cfg_.train.lr_d, cfg_.train.beta1, cfg_.train.beta2}),
        rng_(cfg_.train.seed) {}

  const ExperimentConfig& config() const { return cfg_; }
  MustGan<T>& model() { return model_; }
  const MustGan<T>& model() const { return model_; }
  const PerceptualExtractor<T>& phi() const { return phi_; }
  int epoch() const { return epoch_; }
  std::int64_t step() const { return step_; }

  StepMetrics train_step(const std::vector<Sample>& batch) {
    if (batch.empty()) fail("invalid_argument", "empty batch");
    const int h = batch.front().image.height(), w = batch.front().image.width();
    for (const auto& s : batch)
      if (s.image.height() != h || s.image.width() != w) fail("size_mismatch", "batch samples differ in size");
    if (h != cfg_.model.height || w != cfg_.model.width)
      fail("size_mismatch", "sample size " + std::to_string(h) + "x" + std::to_string(w) + " does not match model");

    const auto& wts = cfg_.train.weights;
    const T inv_b = T(1) / static_cast<T>(batch.size());
    StepMetrics m;
    m.epoch = epoch_ + 1;
    m.step = step_ + 1;

    struct Item {
      Var<T> real;
      Var<T> pose;
      Var<T> fake;
    };
    std::vector<Item> items;
    items.reserve(batch.size());
    for (const auto& s : batch) {
      const ModelInputs in = prepare_inputs(s, cfg_.model);
      Item it{constant(s.image.cast<T>()), constant(in.pose.cast<T>()), nullptr};
      it.fake = model_.generate(constant(in.parts.cast<T>()), it.pose);
      items.push_back(std::move(it));
      m.ids.push_back(s.id);
    }

    // Discriminator update on detached fakes.
    model_.disc_params().zero_grad();
    for (const auto& it : items) {
      auto fake = detach(it.fake);
      auto li = lsgan_d_loss(model_.score_image(it.real), model_.score_image(fake));
      auto lp = lsgan_d_loss(model_.score_pose(it.pose, it.real), model_.score_pose(it.pose, fake));
      auto ld = ops::weighted_sum<T>({{T(0.5), li}, {T(0.5), lp}});
      check_finite(ops::scalar(ld), "l_adv_d");
      m.l_adv_d += static_cast<double>(ops::scalar(ld)) / static_cast<double>(batch.size());
      backward(ops::scale(ld, inv_b));
    }
    adam_d_.step();

    // Generator update through the (now frozen) discriminators.
    model_.gen_params().zero_grad();
    model_.disc_params().set_trainable(false);
    try {
      for (const auto& it : items) {
        auto adv = ops::weighted_sum<T>({{T(0.5), lsgan_g_loss(model_.score_image(it.fake))},
                                         {T(0.5), lsgan_g_loss(model_.score_pose(it.pose, it.fake))}});
        auto rec = reconstruction_loss(it.fake, it.real);
        const auto fake_feats = phi_(it.fake);
        const auto real_feats = phi_(it.real);
        auto perc = perceptual_loss(fake_feats, real_feats, phi_.options().perceptual_layer);
        auto sty = style_loss(fake_feats, real_feats);
        auto total = overall_loss(adv, rec, perc, sty, wts);
        const double n = static_cast<double>(batch.size());
        for (auto [name, v] : {std::pair{"l_adv_g", adv}, {"l_rec", rec}, {"l_perc", perc}, {"l_style", sty}, {"l_total", total}})
          check_finite(ops::scalar(v), name);
        m.l_adv_g += static_cast<double>(ops::scalar(adv)) / n;
        m.l_rec += static_cast<double>(ops::scalar(rec)) / n;
        m.l_perc += static_cast<double>(ops::scalar(perc)) / n;
        m.l_style += static_cast<double>(ops::scalar(sty)) / n;
        m.l_total += static_cast<double>(ops::scalar(total)) / n;
        backward(ops::scale(total, inv_b));
      }
    } catch (...) {
      model_.disc_params().set_trainable(true);
      throw;
    }
    model_.disc_params().set_trainable(true);
    adam_g_.step();
    ++step_;
    return m;
  }

  using StepCallback = std::function<void(const StepMetrics&)>;

  /// One pass over the source in a seeded shuffled order.
  EpochSummary train_epoch(const DatasetSource& source, const StepCallback& on_step = {}) {
    std::vector<std::string> ids = source.ids();
    if (ids.empty()) fail("empty_dataset", "dataset has no samples");
    std::shuffle(ids.begin(), ids.end(), rng_);
    EpochSummary sum;
    sum.epoch = epoch_ + 1;
    const std::size_t bs = static_cast<std::size_t>(cfg_.train.batch_size);
    for (std::size_t start = 0; start < ids.size(); start += bs) {
      std::vector<Sample> batch;
      for (std::size_t i = start; i < std::min(ids.size(), start + bs); ++i) batch.push_back(source.fetch(ids[i]));
      const StepMetrics m = train_step(batch);
      sum.mean_rec += m.l_rec;
      sum.mean_total += m.l_total;
      sum.mean_adv_d += m.l_adv_d;
      ++sum.steps;
      if (on_step) on_step(m);
    }
    sum.mean_rec /= sum.steps;
    sum.mean_total /= sum.steps;
    sum.mean_adv_d /= sum.steps;
    ++epoch_;
    return sum;
  }

  /// Runs the remaining epochs, appending step records to <out>/metrics.jsonl and writing
  /// <out>/checkpoint.bin (plus checkpoint_epochNNN.bin every checkpoint_every epochs).
  std::vector<EpochSummary> train(const DatasetSource& source, const std::filesystem::path& out,
                                  const std::function<void(const EpochSummary&)>& on_epoch = {}) {
    std::filesystem::create_directories(out);
    std::ofstream log(out / "metrics.jsonl", std::ios::app);
    if (!log) fail("io_error", "cannot open metrics log in " + out.string());
    std::vector<EpochSummary> summaries;
    while (epoch_ < cfg_.train.epochs) {
      summaries.push_back(train_epoch(source, [&](const StepMetrics& m) {
        log << to_json_record(m).dump() << "\n";
        log.flush();
        if (!log) fail("io_error", "metrics log write failed");
      }));
      if (on_epoch) on_epoch(summaries.back());
      if (cfg_.train.checkpoint_every > 0 && epoch_ % cfg_.train.checkpoint_every == 0) {
        char name[64];
        std::snprintf(name, sizeof name, "checkpoint_epoch%03d.bin", epoch_);
        write_checkpoint(snapshot(), out / name);
      }
    }
    write_checkpoint(snapshot(), out / "checkpoint.bin");
    return summaries;
  }

  Checkpoint snapshot() const {
    Checkpoint ck;
    ck.config = cfg_;
    ck.epoch = epoch_;
    ck.step = step_;
    ck.adam_g_steps = adam_g_.steps();
    ck.adam_d_steps = adam_d_.steps();
    std::ostringstream rs;
    rs << rng_;
    ck.rng_state = rs.str();
    add_store(ck, "gen/", model_.gen_params(), const_cast<Adam<T>&>(adam_g_), "adam_g/");
    add_store(ck, "disc/", model_.disc_params(), const_cast<Adam<T>&>(adam_d_), "adam_d/");
    return ck;
  }

  void restore(const Checkpoint& ck) {
    if (nlohmann::json(cfg_) != ck.config) fail("incompatible_checkpoint", "checkpoint config differs from trainer config");
    load_store(ck, "gen/", model_.gen_params(), adam_g_, "adam_g/");
    load_store(ck, "disc/", model_.disc_params(), adam_d_, "adam_d/");
    adam_g_.set_steps(ck.adam_g_steps);
    adam_d_.set_steps(ck.adam_d_steps);
    epoch_ = ck.epoch;
    step_ = ck.step;
    std::istringstream rs(ck.rng_state);
    rs >> rng_;
    if (!rs) fail("corrupt_checkpoint", "rng state");
  }

  void save_checkpoint(const std::filesystem::path& path) const { write_checkpoint(snapshot(), path); }

 private:
  static void check_finite(T v, const char* component) {
    if (!std::isfinite(static_cast<double>(v))) fail("non_finite_loss", std::string(component) + " is not finite");
  }

  static void add_store(Checkpoint& ck, const std::string& prefix, const ParamStore<T>& store, Adam<T>& opt,
                        const std::string& opt_prefix) {
    const auto& entries = store.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& [name, v] = entries[i];
      ck.tensors.emplace_back(prefix + name, v->value.template cast<float>());
      ck.tensors.emplace_back(opt_prefix + "m/" + name, opt.first_moments()[i].template cast<float>());
      ck.tensors.emplace_back(opt_prefix + "v/" + name, opt.second_moments()[i].template cast<float>());
    }
  }

  static void load_store(const Checkpoint& ck, const std::string& prefix, ParamStore<T>& store, Adam<T>& opt,
                         const std::string& opt_prefix) {
    const auto& entries = store.entries();
    auto copy_into = [](const Tensor<float>& src, Tensor<T>& dst, const std::string& name) {
      if (!(src.shape() == dst.shape()))
        fail("incompatible_checkpoint", name + " has shape " + src.shape().str() + ", model expects " + dst.shape().str());
      dst = src.template cast<T>();
    };
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& [name, v] = entries[i];
      copy_into(ck.tensor(prefix + name), v->value, prefix + name);
      copy_into(ck.tensor(opt_prefix + "m/" + name), opt.first_moments()[i], opt_prefix + "m/" + name);
      copy_into(ck.tensor(opt_prefix + "v/" + name), opt.second_moments()[i], opt_prefix + "v/" + name);
    }
  }

  ExperimentConfig cfg_;
  MustGan<T> model_;
  PerceptualExtractor<T> phi_;
  Adam<T> adam_g_;
  Adam<T> adam_d_;
  Rng rng_;
  int epoch_ = 0;
  std::int64_t step_ = 0;
};

/// Rebuilds a trainer from a checkpoint file, including its configuration.
template <typename T = float>
std::unique_ptr<Trainer<T>> load_checkpoint(const std::filesystem::path& path) {
  const Checkpoint ck = read_checkpoint(path);
  ExperimentConfig cfg;
  try {
    cfg = ck.config.get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    fail("corrupt_checkpoint", std::string("config: ") + e.what());
  }
  auto t = std::make_unique<Trainer<T>>(cfg);
  t->restore(ck);
  return t;
}

}  // namespace mustgan
