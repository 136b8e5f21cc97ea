#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "test_support.hpp"

using namespace mustgan;
namespace fs = std::filesystem;

namespace {

std::string code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "<no error>";
}

}  // namespace

TEST(Config, DefaultsRoundTripThroughJson) {
  const ExperimentConfig d;
  const ExperimentConfig e = config_from_json(nlohmann::json(d));
  EXPECT_EQ(nlohmann::json(e), nlohmann::json(d));
  EXPECT_EQ(e.train.weights.style, 150.0);
  EXPECT_EQ(e.train.lr_d, 4e-4);
}

TEST(Config, PartialJsonKeepsDefaults) {
  const ExperimentConfig e = config_from_json(nlohmann::json::parse(R"({"train": {"epochs": 3}})"));
  EXPECT_EQ(e.train.epochs, 3);
  EXPECT_EQ(e.train.batch_size, 8);
  EXPECT_EQ(e.model.height, 64);
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_EQ(code_of([] { config_from_json(nlohmann::json::parse(R"({"train": {"epoch": 3}})")); }), "unknown_key");
  EXPECT_EQ(code_of([] { config_from_json(nlohmann::json::parse(R"({"optimizer": {}})")); }), "unknown_key");
  EXPECT_EQ(code_of([] { config_from_json(nlohmann::json::parse("[1, 2]")); }), "invalid_config");
  EXPECT_EQ(code_of([] { config_from_json(nlohmann::json::parse(R"({"train": {"epochs": "many"}})")); }), "invalid_config");
}

TEST(Config, OverridesParseJsonValues) {
  ExperimentConfig e = apply_overrides({}, {"train.epochs=2", "model.pose_channels=[8,16]", "train.weights.style=0",
                                            "train.perceptual.seed=7"});
  EXPECT_EQ(e.train.epochs, 2);
  EXPECT_EQ(e.model.pose_channels, (std::vector<int>{8, 16}));
  EXPECT_EQ(e.train.weights.style, 0.0);
  EXPECT_EQ(e.train.perceptual.seed, 7u);
}

TEST(Config, AblationShorthand) {
  const ExperimentConfig a = apply_override({}, "ablation.no_must=true");
  const ExperimentConfig b = apply_override({}, "model.ablation.no_must=true");
  EXPECT_TRUE(a.model.ablation.no_must);
  EXPECT_EQ(nlohmann::json(a), nlohmann::json(b));
}

TEST(Config, BadOverrides) {
  EXPECT_EQ(code_of([] { apply_override({}, "train.epochs"); }), "invalid_override");
  EXPECT_EQ(code_of([] { apply_override({}, "=3"); }), "invalid_override");
  EXPECT_EQ(code_of([] { apply_override({}, "train.epochz=3"); }), "unknown_key");
  EXPECT_EQ(code_of([] { apply_override({}, "train.epochs.x=3"); }), "unknown_key");
  EXPECT_EQ(code_of([] { apply_override({}, "train.epochs=abc"); }), "invalid_config");
}

TEST(Config, SnapshotLoadsBackIdentically) {
  const fs::path dir = fs::temp_directory_path() / "mustgan_config_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const ExperimentConfig e = apply_overrides({}, {"train.seed=11", "ablation.no_ca=true"});
  write_config_snapshot(e, dir / "config.json");
  EXPECT_EQ(nlohmann::json(load_config(dir / "config.json")), nlohmann::json(e));
  EXPECT_EQ(code_of([&] { load_config(dir / "absent.json"); }), "missing_config");
  std::ofstream(dir / "bad.json") << "{";
  EXPECT_EQ(code_of([&] { load_config(dir / "bad.json"); }), "malformed_json");
  fs::remove_all(dir);
}

TEST(Config, ValidationCatchesBadValues) {
  ExperimentConfig e;
  e.train.batch_size = 0;
  EXPECT_EQ(code_of([&] { e.train.validate(); }), "invalid_config");
  e = {};
  e.model.gen_channels = {8, 8};
  EXPECT_EQ(code_of([&] { e.model.validate(); }), "invalid_config");
}
