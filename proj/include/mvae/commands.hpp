#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mvae/checkpoint.hpp"
#include "mvae/config.hpp"
#include "mvae/evaluate.hpp"
#include "mvae/image.hpp"
#include "mvae/train.hpp"

namespace mvae {

// Files written into an experiment directory.
inline constexpr const char* kConfigSnapshotFile = "config.ini";
inline constexpr const char* kEpochLogFile = "epochs.csv";
inline constexpr const char* kBestCheckpointFile = "best.ckpt";
inline constexpr const char* kMetricsCsvFile = "metrics.csv";
inline constexpr const char* kMetricsJsonFile = "metrics.json";
inline constexpr const char* kSweepSummaryFile = "summary.csv";

struct TrainOutcome {
  std::filesystem::path dir;
  TrainResult result;
  MetricReport report;
};

/// Loads data, trains, and writes the config snapshot, epoch log, best
/// checkpoint and final metric report into cfg.output_dir.
TrainOutcome run_experiment(const ExperimentConfig& cfg);
TrainOutcome cmd_train(const std::filesystem::path& config_path);

struct SweepRow {
  std::size_t latent = 0;
  ModelKind model = ModelKind::vae;
  MetricReport report;
  std::string error;               // empty unless the cell aborted
  std::vector<std::string> wins;   // metrics on which this row is at least as good as its pair
};

/// Trains one sweep cell and returns its metrics.
using CellRunner = std::function<MetricReport(const ExperimentConfig&)>;

/// One cell per (latent, model) in latent-major order, vae before mvae, each
/// in its own subdirectory <model>_z<latent>. Numeric aborts become NaN rows.
std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::vector<std::size_t>& latents,
                                const CellRunner& runner = {});

/// Fills SweepRow::wins by comparing the vae and mvae rows of each latent.
void mark_winners(std::vector<SweepRow>& rows);

/// latent,model,<metrics...>,wins,error
std::string sweep_csv(const std::vector<SweepRow>& rows);

std::filesystem::path cmd_sweep(const std::filesystem::path& config_path,
                                const std::vector<std::size_t>& latents);

/// "2,4,16" -> {2, 4, 16}. Throws ConfigError on malformed input.
std::vector<std::size_t> parse_latent_list(const std::string& text);

/// A dataset cache file (container magic) or an experiment config whose
/// [data] section is loaded.
DatasetSplit load_data_argument(const std::filesystem::path& path);

/// 3 x n grid: originals, reconstructions from the posterior mean, and
/// reconstructions from one posterior sample.
ImageGrid render_recon(const Checkpoint& ckpt, const Matrix& samples, std::uint64_t seed = 0);

/// Mesh coordinates for a traversal of `grid` nodes over [-range, range].
/// Odd grids include both endpoints; even grids use spacing 2 range / grid
/// starting at -range, so node grid/2 is exactly zero.
std::vector<double> sweep_mesh(std::size_t grid, double range);

/// grid x grid decoder outputs over the mesh on (z_dim_a, z_dim_b) with the
/// other coordinates zero. Tile (r, c) decodes z_dim_a = mesh[c], z_dim_b = mesh[r].
ImageGrid render_sweep(const Checkpoint& ckpt, std::size_t dim_a, std::size_t dim_b,
                       std::size_t grid, double range);

std::filesystem::path cmd_render_recon(const std::filesystem::path& ckpt,
                                       const std::filesystem::path& data, std::size_t n,
                                       const std::filesystem::path& out, std::uint64_t seed = 0);

std::filesystem::path cmd_render_sweep(const std::filesystem::path& ckpt, std::size_t dim_a,
                                       std::size_t dim_b, std::size_t grid, double range,
                                       const std::filesystem::path& out);

/// Evaluates a checkpoint; writes metrics.csv/json into out_dir when given.
MetricReport cmd_eval(const std::filesystem::path& ckpt, const std::filesystem::path& data,
                      const EvalConfig& cfg,
                      const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace mvae
