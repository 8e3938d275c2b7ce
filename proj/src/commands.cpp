#include "mvae/commands.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mvae/container.hpp"
#include "mvae/error.hpp"
#include "mvae/posterior.hpp"

namespace mvae {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_report(const fs::path& dir, const MetricReport& report) {
  write_text(dir / kMetricsCsvFile, MetricReport::csv_header() + "\n" + report.csv_row() + "\n");
  write_text(dir / kMetricsJsonFile, report.to_json() + "\n");
}

}  // namespace

TrainOutcome run_experiment(const ExperimentConfig& cfg) {
  const DatasetSplit data = load_dataset(cfg.data);
  const Matrix train_x = data.features_of(Partition::train);
  const Matrix val_x = data.features_of(Partition::val);
  if (train_x.rows() == 0 || val_x.rows() == 0) {
    throw ConfigError("dataset '" + data.name + "' needs nonempty train and val partitions");
  }
  if (data.count(Partition::test) == 0) {
    throw ConfigError("dataset '" + data.name + "' needs a nonempty test partition");
  }

  TrainOutcome outcome;
  outcome.dir = cfg.output_dir;
  fs::create_directories(outcome.dir);
  write_text(outcome.dir / kConfigSnapshotFile, to_ini(cfg));

  std::ofstream log(outcome.dir / kEpochLogFile, std::ios::binary | std::ios::trunc);
  if (!log) throw ConfigError("cannot write epoch log in " + outcome.dir.string());
  write_epoch_csv_header(log);
  const ModelSpec spec = cfg.train.model_spec(train_x.cols());
  const fs::path best_path = outcome.dir / kBestCheckpointFile;

  outcome.result =
      train(cfg.train, train_x, val_x, [&](const EpochLog& e, const MlpParams& params, bool improved) {
        write_epoch_csv_row(log, e, cfg.wall_time);
        log.flush();
        if (improved) save_checkpoint(best_path, Checkpoint{spec, params});
      });

  outcome.report = evaluate_model(spec, outcome.result.best_params, data, cfg.eval);
  write_report(outcome.dir, outcome.report);
  return outcome;
}

TrainOutcome cmd_train(const fs::path& config_path) { return run_experiment(load_config(config_path)); }

std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const std::vector<std::size_t>& latents,
                                const CellRunner& runner) {
  if (latents.empty()) throw ConfigError("sweep needs at least one latent size");
  const CellRunner run =
      runner ? runner : CellRunner([](const ExperimentConfig& c) { return run_experiment(c).report; });
  std::vector<SweepRow> rows;
  for (std::size_t latent : latents) {
    for (ModelKind model : {ModelKind::vae, ModelKind::mvae}) {
      ExperimentConfig cell = base;
      cell.train.latent = latent;
      cell.train.model = model;
      cell.name = base.name + "_" + std::string(to_string(model)) + "_z" + std::to_string(latent);
      cell.output_dir = base.output_dir / (std::string(to_string(model)) + "_z" + std::to_string(latent));
      SweepRow row;
      row.latent = latent;
      row.model = model;
      try {
        row.report = run(cell);
      } catch (const NumericError& e) {
        row.report = MetricReport::nan();
        row.error = e.what();
      } catch (const SingularityError& e) {
        row.report = MetricReport::nan();
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  mark_winners(rows);
  return rows;
}

void mark_winners(std::vector<SweepRow>& rows) {
  for (auto& r : rows) r.wins.clear();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (i == j || rows[i].latent != rows[j].latent) continue;
      for (const Metric& m : rows[i].report.metrics()) {
        const double other = rows[j].report[m.name];
        if (std::isnan(m.value) && std::isnan(other)) continue;
        if (MetricReport::wins(m.value, other, m.orientation)) rows[i].wins.push_back(m.name);
      }
    }
  }
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream o;
  o << "latent,model," << MetricReport::csv_header() << ",wins,error\n";
  for (const auto& r : rows) {
    std::string wins;
    for (const auto& w : r.wins) {
      if (!wins.empty()) wins += ';';
      wins += w;
    }
    std::string err = r.error;
    for (char& c : err)
      if (c == ',' || c == '\n' || c == '"') c = ' ';
    o << r.latent << ',' << to_string(r.model) << ',' << r.report.csv_row() << ',' << wins << ','
      << err << '\n';
  }
  return o.str();
}

fs::path cmd_sweep(const fs::path& config_path, const std::vector<std::size_t>& latents) {
  const ExperimentConfig base = load_config(config_path);
  const auto rows = run_sweep(base, latents);
  fs::create_directories(base.output_dir);
  const fs::path out = base.output_dir / kSweepSummaryFile;
  write_text(out, sweep_csv(rows));
  return out;
}

std::vector<std::size_t> parse_latent_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    const auto b = tok.find_first_not_of(' ');
    const auto e = tok.find_last_not_of(' ');
    if (b == std::string::npos) throw ConfigError("empty entry in latent list '" + text + "'");
    tok = tok.substr(b, e - b + 1);
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || v == 0) {
      throw ConfigError("latent size '" + tok + "' is not a positive integer");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty latent list");
  return out;
}

DatasetSplit load_data_argument(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("data file not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::string(magic, 4) == "MVAE") return load_dataset_cache(path);
  return load_dataset(load_config(path).data);
}

ImageGrid render_recon(const Checkpoint& ckpt, const Matrix& samples, std::uint64_t seed) {
  if (samples.cols() != ckpt.spec.input_dim) {
    throw ContractError("render_recon: data width " + std::to_string(samples.cols()) +
                        " does not match checkpoint input " + std::to_string(ckpt.spec.input_dim));
  }
  if (samples.rows() == 0) throw ContractError("render_recon: no samples");
  Rng rng = Rng(seed).derive("render-recon");
  const Matrix mean = reconstruct_mean(ckpt.spec, ckpt.params, samples);
  const Matrix sampled = reconstruct_sample(ckpt.spec, ckpt.params, samples, rng);
  ImageGrid grid(3, samples.rows(), infer_tile_shape(samples.cols()));
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    grid.set_tile(0, i, samples.row(i));
    grid.set_tile(1, i, mean.row(i));
    grid.set_tile(2, i, sampled.row(i));
  }
  return grid;
}

std::vector<double> sweep_mesh(std::size_t grid, double range) {
  if (grid == 0) throw ContractError("sweep_mesh: grid must be positive");
  std::vector<double> mesh(grid);
  if (grid == 1) return {0.0};
  for (std::size_t k = 0; k < grid; ++k) {
    const auto kk = static_cast<double>(k);
    const auto g = static_cast<double>(grid);
    mesh[k] = grid % 2 == 1 ? range * (2.0 * kk - (g - 1.0)) / (g - 1.0)
                            : range * (2.0 * kk - g) / g;
  }
  return mesh;
}

ImageGrid render_sweep(const Checkpoint& ckpt, std::size_t dim_a, std::size_t dim_b,
                       std::size_t grid, double range) {
  const std::size_t k = ckpt.spec.latent;
  if (k < 2) throw ContractError("render_sweep: needs d_z >= 2");
  if (dim_a >= k || dim_b >= k || dim_a == dim_b) {
    throw ContractError("render_sweep: dims " + std::to_string(dim_a) + "," + std::to_string(dim_b) +
                        " must be distinct and below d_z = " + std::to_string(k));
  }
  if (!(range > 0.0)) throw ContractError("render_sweep: range must be positive");
  const std::vector<double> mesh = sweep_mesh(grid, range);
  Matrix z(grid * grid, k);
  for (std::size_t r = 0; r < grid; ++r) {
    for (std::size_t c = 0; c < grid; ++c) {
      z(r * grid + c, dim_a) = mesh[c];
      z(r * grid + c, dim_b) = mesh[r];
    }
  }
  const Matrix out = decode(ckpt.params, z, ckpt.spec.likelihood).output;
  ImageGrid img(grid, grid, infer_tile_shape(ckpt.spec.input_dim));
  for (std::size_t r = 0; r < grid; ++r)
    for (std::size_t c = 0; c < grid; ++c) img.set_tile(r, c, out.row(r * grid + c));
  return img;
}

namespace {

fs::path prepare_output(const fs::path& out) {
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  return out;
}

}  // namespace

fs::path cmd_render_recon(const fs::path& ckpt_path, const fs::path& data_path, std::size_t n,
                          const fs::path& out, std::uint64_t seed) {
  if (n == 0) throw ConfigError("render-recon: n must be positive");
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const DatasetSplit data = load_data_argument(data_path);
  if (data.features.cols() != ckpt.spec.input_dim) {
    throw ConfigError("render-recon: dataset width " + std::to_string(data.features.cols()) +
                      " does not match checkpoint input " + std::to_string(ckpt.spec.input_dim));
  }
  Matrix pool = data.features_of(Partition::test);
  if (pool.rows() == 0) pool = data.features;
  std::vector<std::size_t> idx(std::min(n, pool.rows()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  write_pnm(prepare_output(out), render_recon(ckpt, gather_rows(pool, idx), seed));
  return out;
}

fs::path cmd_render_sweep(const fs::path& ckpt_path, std::size_t dim_a, std::size_t dim_b,
                          std::size_t grid, double range, const fs::path& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  ImageGrid img = [&] {
    try {
      return render_sweep(ckpt, dim_a, dim_b, grid, range);
    } catch (const ContractError& e) {
      throw ConfigError(e.what());
    }
  }();
  write_pnm(prepare_output(out), img);
  return out;
}

MetricReport cmd_eval(const fs::path& ckpt_path, const fs::path& data_path, const EvalConfig& cfg,
                      const std::optional<fs::path>& out_dir) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const DatasetSplit data = load_data_argument(data_path);
  if (data.features.cols() != ckpt.spec.input_dim) {
    throw ConfigError("eval: dataset width does not match checkpoint input");
  }
  MetricReport report = evaluate_model(ckpt.spec, ckpt.params, data, cfg);
  if (out_dir) {
    fs::create_directories(*out_dir);
    write_report(*out_dir, report);
  }
  return report;
}

}  // namespace mvae
