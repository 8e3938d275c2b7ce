// mvae: train, sweep, evaluate and render coupled-posterior VAEs.
//
// Exit codes: 0 success, 2 configuration / input errors, 3 numeric aborts
// during training, 1 anything else.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "mvae/commands.hpp"
#include "mvae/error.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::pair<std::size_t, std::size_t> parse_dims(const std::string& s) {
  const auto v = mvae::parse_latent_list(s.empty() ? "" : [&] {
    // dims may legitimately be 0, so shift by one to reuse the list parser
    std::string shifted;
    std::size_t start = 0;
    while (start <= s.size()) {
      const auto end = s.find(',', start);
      const std::string tok = s.substr(start, end == std::string::npos ? std::string::npos : end - start);
      std::size_t value = 0;
      try {
        value = std::stoul(tok) + 1;
      } catch (const std::exception&) {
        throw mvae::ConfigError("--dims expects i,j (got '" + s + "')");
      }
      if (!shifted.empty()) shifted += ',';
      shifted += std::to_string(value);
      if (end == std::string::npos) break;
      start = end + 1;
    }
    return shifted;
  }());
  if (v.size() != 2) throw mvae::ConfigError("--dims expects exactly two indices");
  return {v[0] - 1, v[1] - 1};
}

fs::path default_image_path(const fs::path& ckpt, const char* stem, std::size_t input_dim) {
  const bool rgb = mvae::infer_tile_shape(input_dim).channels == 3;
  return ckpt.parent_path() / (std::string(stem) + (rgb ? ".ppm" : ".pgm"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled-posterior variational autoencoder toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  auto* train = app.add_subcommand("train", "Train one model and evaluate it");
  train->add_option("config", config_path, "Experiment config (INI)")->required();

  std::string latents = "2,4,16,32,256,512";
  auto* sweep = app.add_subcommand("sweep", "Train vae and mvae over latent sizes");
  sweep->add_option("config", config_path, "Base experiment config (INI)")->required();
  sweep->add_option("--latents", latents, "Comma-separated latent sizes");

  std::string ckpt_path, data_path, out_path;
  std::size_t n = 10;
  std::uint64_t seed = 0;
  auto* recon = app.add_subcommand("render-recon", "Original / mean / sample reconstruction grid");
  recon->add_option("checkpoint", ckpt_path)->required();
  recon->add_option("data", data_path, "Dataset cache or experiment config")->required();
  recon->add_option("--n", n, "Number of samples");
  recon->add_option("--out", out_path, "Output PGM/PPM path");
  recon->add_option("--seed", seed, "Noise seed for the sampled row");

  std::string dims = "0,1";
  std::size_t grid = 10;
  double range = 2.0;
  auto* traverse = app.add_subcommand("render-sweep", "Latent traversal over two coordinates");
  traverse->add_option("checkpoint", ckpt_path)->required();
  traverse->add_option("--dims", dims, "Latent coordinates i,j");
  traverse->add_option("--grid", grid, "Nodes per axis");
  traverse->add_option("--range", range, "Mesh covers [-range, range]");
  traverse->add_option("--out", out_path, "Output PGM/PPM path");

  mvae::EvalConfig eval_cfg;
  std::string eval_out;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("checkpoint", ckpt_path)->required();
  eval->add_option("data", data_path, "Dataset cache or experiment config")->required();
  eval->add_option("--out", eval_out, "Directory for metrics.csv / metrics.json");
  eval->add_option("--elbo-samples", eval_cfg.elbo_samples);
  eval->add_option("--seed", eval_cfg.seed);

  auto* cache = app.add_subcommand("cache", "Write the dataset of a config to a cache file");
  cache->add_option("config", config_path)->required();
  cache->add_option("out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) {
      const auto outcome = mvae::cmd_train(config_path);
      std::cout << "wrote " << outcome.dir.string() << " (best epoch " << outcome.result.best_epoch
                << " of " << outcome.result.epochs.size() << ")\n"
                << outcome.report.to_json() << "\n";
    } else if (*sweep) {
      const auto path = mvae::cmd_sweep(config_path, mvae::parse_latent_list(latents));
      std::cout << "wrote " << path.string() << "\n";
    } else if (*recon) {
      if (out_path.empty()) {
        out_path = default_image_path(ckpt_path, "recon",
                                      mvae::load_checkpoint(ckpt_path).spec.input_dim).string();
      }
      std::cout << "wrote " << mvae::cmd_render_recon(ckpt_path, data_path, n, out_path, seed).string()
                << "\n";
    } else if (*traverse) {
      const auto [a, b] = parse_dims(dims);
      if (out_path.empty()) {
        out_path = default_image_path(ckpt_path, "sweep",
                                      mvae::load_checkpoint(ckpt_path).spec.input_dim).string();
      }
      std::cout << "wrote "
                << mvae::cmd_render_sweep(ckpt_path, a, b, grid, range, out_path).string() << "\n";
    } else if (*eval) {
      std::optional<fs::path> dir;
      if (!eval_out.empty()) dir = eval_out;
      std::cout << mvae::cmd_eval(ckpt_path, data_path, eval_cfg, dir).to_json() << "\n";
    } else if (*cache) {
      mvae::save_dataset_cache(out_path, mvae::load_dataset(mvae::load_config(config_path).data));
      std::cout << "wrote " << out_path << "\n";
    }
  } catch (const mvae::NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const mvae::SingularityError& e) {
    std::cerr << "numeric abort: " << e.what() << " (log|det| = " << e.log_abs_det() << ")\n";
    return kExitNumeric;
  } catch (const mvae::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mvae::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mvae::ContractError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
