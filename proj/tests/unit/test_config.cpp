#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "../support/fixtures.hpp"
#include "mvae/config.hpp"
#include "mvae/error.hpp"

using namespace mvae;
namespace fs = std::filesystem;
using mvae::testing::scratch_dir;

namespace {

const char* kBase = R"(# comment
[experiment]
name = demo

[data]
format = synthetic
classes = 4
samples = 100
dim = 8
spread = 0.25 ; trailing comment
split = 60,20,20
seed = 3

[train]
model = vae
latent = 4
hidden = 32
epochs = 7
learning_rate = 0.002
couple_mean = off

[output]
dir = out/demo
)";

ExperimentConfig parse(const std::string& text, const fs::path& base = "/base") {
  return config_from_ini(parse_ini(text), base);
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse(kBase);
  CHECK(cfg.name == "demo");
  CHECK(cfg.data.format == DataFormat::synthetic);
  CHECK(cfg.data.synth_classes == 4);
  CHECK(cfg.data.synth_spread == 0.25);
  REQUIRE(cfg.data.split.has_value());
  CHECK(cfg.data.split->val == 20);
  CHECK(cfg.train.model == ModelKind::vae);
  CHECK(cfg.train.latent == 4);
  CHECK(cfg.train.learning_rate == 0.002);
  CHECK_FALSE(cfg.train.couple_mean);
  CHECK(cfg.train.batch_size == 100);  // default
  CHECK(cfg.train.weight_decay == 1e-2);
  CHECK(cfg.eval.ece_bins == 15);
  CHECK(cfg.render.sweep_range == 2.0);
}

TEST_CASE("config rejects unknown or malformed input") {
  CHECK_THROWS_AS(parse(std::string(kBase) + "\n[extra]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse(std::string(kBase) + "\n[eval]\nbins = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("[train]\nepochs = many\n"), ConfigError);
  CHECK_THROWS_AS(parse("[train]\nepochs = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("[train]\nmodel = flow\n"), ConfigError);
  CHECK_THROWS_AS(parse("[train]\nepochs = 3\nepochs = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse("epochs = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("[data]\nformat = idx\n"), ConfigError);
  CHECK_THROWS_AS(parse("[data]\nsplit = 1,2\n"), ConfigError);
  CHECK_THROWS_AS(parse("[train\n"), ConfigError);
  CHECK_THROWS_AS(load_config(scratch_dir("cfg-missing") / "none.ini"), ConfigError);
}

TEST_CASE("paths resolve against the config and output root") {
  const auto cfg = parse("[data]\nformat = idx\ntrain_files = a/img, /abs/lab\n[output]\ndir = /tmp/x\n",
                         "/configs");
  REQUIRE(cfg.data.train_files.size() == 2);
  CHECK(cfg.data.train_files[0] == fs::path("/configs/a/img"));
  CHECK(cfg.data.train_files[1] == fs::path("/abs/lab"));
  CHECK(cfg.output_dir == fs::path("/tmp/x"));

  ::setenv(kOutputRootEnv, "/runs-root", 1);
  CHECK(parse(kBase).output_dir == fs::path("/runs-root/out/demo"));
  ::unsetenv(kOutputRootEnv);
}

TEST_CASE("canonical snapshot reloads to the same configuration") {
  const auto dir = scratch_dir("cfg");
  auto cfg = parse(kBase, dir);
  cfg.train.learning_rate = 0.1 + 0.2;
  const std::string text = to_ini(cfg);
  std::ofstream(dir / "snap.ini") << text;
  const auto back = load_config(dir / "snap.ini");
  CHECK(to_ini(back) == text);
  CHECK(back.train.learning_rate == cfg.train.learning_rate);
  CHECK(back.output_dir == cfg.output_dir);
}
