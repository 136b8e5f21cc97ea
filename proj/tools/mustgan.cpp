// Command-line front end: data generation, training, reconstruction, pose transfer,
// clothes style transfer and evaluation. Exit codes: 0 success, 2 bad arguments,
// 3 runtime failure. Failures print one line "error code=<code> detail=<text>" on stderr.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mustgan/mustgan.hpp"

namespace fs = std::filesystem;
using namespace mustgan;

namespace {

constexpr int kExitBadArgs = 2;
constexpr int kExitRuntime = 3;

bool is_argument_error(const std::string& code) {
  static const std::set<std::string> codes = {"invalid_argument", "invalid_override", "unknown_key", "invalid_config",
                                              "invalid_class", "unknown_class", "missing_config"};
  return codes.count(code) > 0;
}

std::string one_line(std::string s) {
  for (auto& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

void save_png_atomic(const fs::path& path, const Tensor<float>& image) {
  fs::path tmp = path;
  tmp += ".tmp";
  save_image(tmp, image);
  fs::rename(tmp, path);
}

struct Paths {
  fs::path out;
  fs::path file(const std::string& name) const { return out / name; }
};

std::unique_ptr<Trainer<float>> open_checkpoint(const std::string& path) { return load_checkpoint<float>(path); }

Tensor<float> generate(const MustGan<float>& m, const Tensor<float>& parts, const Tensor<float>& pose) {
  return run_generator(m, parts, pose);
}

int cmd_gen_data(int n, std::uint64_t seed, int size, const Paths& p) {
  fs::create_directories(p.out);
  const auto samples = sample_dataset(n, seed, size, size);
  save_dataset(samples, p.out);
  write_file_atomic(p.file("gen_config.json"),
                    nlohmann::json{{"n", n}, {"seed", seed}, {"size", size}}.dump(2) + "\n");
  std::cout << "wrote " << n << " samples to " << p.out.string() << "\n";
  return 0;
}

int cmd_train(const std::string& config, const std::string& data, std::optional<std::uint64_t> seed,
              const std::vector<std::string>& sets, const Paths& p) {
  ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : load_config(config);
  cfg = apply_overrides(cfg, sets);
  if (seed) cfg.train.seed = *seed;
  cfg.model.validate();
  cfg.train.validate();
  fs::create_directories(p.out);
  write_config_snapshot(cfg, p.file("config.json"));
  DirectorySource source(data);
  Trainer<float> trainer(cfg);
  trainer.train(source, p.out, [](const EpochSummary& s) {
    std::cout << "epoch " << s.epoch << " l_rec " << s.mean_rec << " l_total " << s.mean_total << "\n" << std::flush;
  });
  std::cout << "checkpoint " << p.file("checkpoint.bin").string() << "\n";
  return 0;
}

void snapshot_from_checkpoint(const Trainer<float>& t, const Paths& p) {
  fs::create_directories(p.out);
  write_config_snapshot(t.config(), p.file("config.json"));
}

int cmd_reconstruct(const std::string& ckpt, const std::string& data, const std::string& id, const Paths& p) {
  auto t = open_checkpoint(ckpt);
  snapshot_from_checkpoint(*t, p);
  const Sample s = DirectorySource(data).fetch(id);
  const auto in = prepare_inputs(s, t->model().config());
  const auto out = generate(t->model(), in.parts, in.pose);
  save_png_atomic(p.file("reconstruct_" + id + ".png"), contact_sheet({s.image, out}));
  return 0;
}

int cmd_pose_transfer(const std::string& ckpt, const std::string& data, const std::string& src_id,
                      const std::string& tgt_id, const Paths& p) {
  auto t = open_checkpoint(ckpt);
  snapshot_from_checkpoint(*t, p);
  DirectorySource source(data);
  const Sample src = source.fetch(src_id), tgt = source.fetch(tgt_id);
  const auto& cfg = t->model().config();
  const auto pose = pose_input(tgt.keypoints, cfg.height, cfg.width, cfg.raster());
  const auto out = generate(t->model(), mask_parts(src.image, src.segmap).stack, pose);
  save_png_atomic(p.file("pose_transfer_" + src_id + "_" + tgt_id + ".png"), contact_sheet({src.image, pose_preview(pose), out}));
  return 0;
}

int cmd_style_transfer(const std::string& ckpt, const std::string& data, const std::string& src_id,
                       const std::string& style_id, const std::string& cls, const std::string& tgt_id, const Paths& p) {
  const int k = class_from_name(cls);
  if (k == kBackground) fail("invalid_class", "background cannot be swapped");
  auto t = open_checkpoint(ckpt);
  snapshot_from_checkpoint(*t, p);
  DirectorySource source(data);
  const Sample src = source.fetch(src_id), style = source.fetch(style_id);
  const auto& cfg = t->model().config();
  const Keypoints kp = tgt_id.empty() ? src.keypoints : source.fetch(tgt_id).keypoints;
  const auto pose = pose_input(kp, cfg.height, cfg.width, cfg.raster());
  const auto parts = swap_part(mask_parts(src.image, src.segmap), mask_parts(style.image, style.segmap), k);
  const auto out = generate(t->model(), parts.stack, pose);
  std::string name = "style_transfer_" + src_id + "_" + style_id + "_" + cls;
  if (!tgt_id.empty()) name += "_" + tgt_id;
  save_png_atomic(p.file(name + ".png"), contact_sheet({src.image, style.image, pose_preview(pose), out}));
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& mode, const Paths& p) {
  const EvalMode m = eval_mode_from_name(mode);
  auto t = open_checkpoint(ckpt);
  snapshot_from_checkpoint(*t, p);
  const EvalReport r = evaluate(t->model(), DirectorySource(data), m);
  write_file_atomic(p.file(std::string("eval_") + eval_mode_name(m) + ".json"), to_json(r).dump(2) + "\n");
  if (m == EvalMode::kStyleTransfer)
    std::cout << "pairs " << r.count << " transfer_success_rate " << r.transfer_success_rate << "\n";
  else
    std::cout << "count " << r.count << " mean_ssim " << r.mean_ssim << " baseline_ssim " << r.baseline_ssim << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mustgan: self-driven person image generation via multi-level statistics transfer"};
  app.require_subcommand(1);
  std::string out, ckpt, data, config, id, src, tgt, style, cls = "upper_clothes", mode = "reconstruct";
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  int n = 200, size = 64;

  auto* gen = app.add_subcommand("gen-data", "render a synthetic sprite dataset");
  gen->add_option("--n", n, "number of samples")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "sampling seed");
  gen->add_option("--size", size, "image side in pixels (multiple of 16)");
  gen->add_option("--out", out, "dataset directory")->required();

  auto* train = app.add_subcommand("train", "self-driven training");
  train->add_option("--config", config, "experiment config JSON");
  train->add_option("--data", data, "dataset directory")->required();
  auto* train_seed = train->add_option("--seed", seed, "training seed (overrides train.seed)");
  train->add_option("--set", sets, "override key=value (repeatable)");
  train->add_option("--out", out, "run directory")->required();

  auto* rec = app.add_subcommand("reconstruct", "render [source | reconstruction]");
  rec->add_option("--ckpt", ckpt)->required();
  rec->add_option("--data", data)->required();
  rec->add_option("--id", id, "sample id")->required();
  rec->add_option("--out", out)->required();

  auto* pt = app.add_subcommand("pose-transfer", "render [source | target pose | output]");
  pt->add_option("--ckpt", ckpt)->required();
  pt->add_option("--data", data)->required();
  pt->add_option("--source", src)->required();
  pt->add_option("--target", tgt)->required();
  pt->add_option("--out", out)->required();

  auto* st = app.add_subcommand("style-transfer", "swap one part from a style donor");
  st->add_option("--ckpt", ckpt)->required();
  st->add_option("--data", data)->required();
  st->add_option("--source", src)->required();
  st->add_option("--style", style)->required();
  st->add_option("--class", cls, "part class name");
  st->add_option("--target", tgt, "optional target-pose sample id");
  st->add_option("--out", out)->required();

  auto* ev = app.add_subcommand("eval", "write an evaluation report");
  ev->add_option("--ckpt", ckpt)->required();
  ev->add_option("--data", data)->required();
  ev->add_option("--mode", mode, "reconstruct | pose_transfer | style_transfer");
  ev->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error code=bad_arguments detail=" << one_line(e.what()) << "\n";
    return kExitBadArgs;
  }

  const Paths p{out};
  try {
    if (*gen) return cmd_gen_data(n, seed, size, p);
    if (*train) return cmd_train(config, data, train_seed->count() ? std::optional<std::uint64_t>(seed) : std::nullopt, sets, p);
    if (*rec) return cmd_reconstruct(ckpt, data, id, p);
    if (*pt) return cmd_pose_transfer(ckpt, data, src, tgt, p);
    if (*st) return cmd_style_transfer(ckpt, data, src, style, cls, tgt, p);
    if (*ev) return cmd_eval(ckpt, data, mode, p);
  } catch (const Error& e) {
    std::cerr << "error code=" << e.code() << " detail=" << one_line(e.what()) << "\n";
    return is_argument_error(e.code()) ? kExitBadArgs : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error code=runtime_error detail=" << one_line(e.what()) << "\n";
    return kExitRuntime;
  }
  return kExitBadArgs;
}
