#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mvae/data.hpp"
#include "mvae/evaluate.hpp"
#include "mvae/train.hpp"

namespace mvae {

/// Parsed INI text: section -> key -> raw value. Keys outside any section
/// are rejected; '#' and ';' start comments.
using IniDocument = std::map<std::string, std::map<std::string, std::string>>;

IniDocument parse_ini(std::string_view text, const std::string& origin = "<config>");

struct RenderOptions {
  std::size_t recon_count = 10;
  std::size_t sweep_grid = 10;
  double sweep_range = 2.0;
  std::size_t sweep_dim_a = 0;
  std::size_t sweep_dim_b = 1;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetSpec data;
  TrainConfig train;
  EvalConfig eval;
  RenderOptions render;
  std::filesystem::path output_dir;
  /// Record real per-epoch wall time in the epoch log instead of 0.
  bool wall_time = false;
};

/// Environment variable naming the root for relative output directories.
inline constexpr const char* kOutputRootEnv = "MVAE_OUTPUT_ROOT";

/// Builds a validated configuration. Relative data paths resolve against
/// base_dir; a relative output_dir resolves against $MVAE_OUTPUT_ROOT when
/// set, else the working directory. Unknown sections or keys, malformed
/// values and out-of-range settings raise ConfigError.
ExperimentConfig config_from_ini(const IniDocument& doc, const std::filesystem::path& base_dir);

ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical INI text with every field resolved; loading it reproduces the
/// configuration exactly.
std::string to_ini(const ExperimentConfig& cfg);

}  // namespace mvae
