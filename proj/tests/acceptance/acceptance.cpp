// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Scratch output goes under the directory given as argv[1].

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "mvae/commands.hpp"
#include "mvae/gradcheck.hpp"
#include "mvae/metrics.hpp"
#include "mvae/posterior.hpp"

using namespace mvae;
namespace fs = std::filesystem;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path g_scratch;

fs::path fresh_dir(const std::string& name) {
  const fs::path d = g_scratch / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Closed-form KL vs. a Monte-Carlo estimate of E_q[log q - log p], 50 configs.
Outcome kl_monte_carlo() {
  const auto t0 = Clock::now();
  Rng rng(1);
  const std::size_t draws = 200000;
  int within = 0;
  double worst_z = 0.0;
  for (int cfg = 0; cfg < 50; ++cfg) {
    const std::size_t d = std::size_t{2} << (cfg % 3);
    Matrix mu(1, d), lv(1, d), c = Matrix::identity(d);
    for (std::size_t j = 0; j < d; ++j) {
      mu(0, j) = rng.normal();
      lv(0, j) = 2.0 * std::log(rng.uniform(0.3, 3.0));
    }
    for (double& v : c.values()) v += 0.3 * rng.normal();
    const PosteriorParams p{mu, lv, &c, true};
    const double closed = kl_coupled(p)[0];

    const Matrix m = effective_mean(p);
    Eigen::MatrixXd l(d, d);  // C diag(sigma), a square root of Sigma
    Eigen::VectorXd mean(d);
    for (std::size_t i = 0; i < d; ++i) {
      mean(i) = m(0, i);
      for (std::size_t j = 0; j < d; ++j) l(i, j) = c(i, j) * std::exp(0.5 * lv(0, j));
    }
    const Eigen::MatrixXd cov = l * l.transpose();
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const Eigen::MatrixXd chol = llt.matrixL();
    const double log_det = 2.0 * chol.diagonal().array().log().sum();
    Eigen::VectorXd eps(d);
    double sum = 0.0, sq = 0.0;
    for (std::size_t s = 0; s < draws; ++s) {
      for (std::size_t j = 0; j < d; ++j) eps(j) = rng.normal();
      const Eigen::VectorXd z = mean + chol * eps;
      // chol^-1 (z - mean) = eps exactly, so log q needs only |eps|^2.
      const double log_q = -0.5 * (static_cast<double>(d) * kLog2Pi + log_det + eps.squaredNorm());
      const double log_p = -0.5 * (static_cast<double>(d) * kLog2Pi + z.squaredNorm());
      const double v = log_q - log_p;
      sum += v;
      sq += v * v;
    }
    const double n = static_cast<double>(draws);
    const double est = sum / n;
    const double se = std::sqrt(std::max(sq / n - est * est, 0.0) / n);
    const double zscore = std::abs(closed - est) / se;
    worst_z = std::max(worst_z, zscore);
    if (zscore < 3.0) ++within;
  }
  const double secs = seconds_since(t0);
  return {within == 50 && secs < 60.0,
          fmt("%d/50 configs within 3 SE (worst %.2f SE), %.1f s (limit 60 s)", within, worst_z, secs)};
}

// Full-model finite differences, both heads, couple_mean on and off.
Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_where;
  for (Likelihood head : {Likelihood::bernoulli, Likelihood::gaussian}) {
    for (bool couple : {true, false}) {
      const ModelSpec spec{10, 16, 4, head, ModelKind::mvae, couple};
      Rng rng(42);
      const Matrix x = mvae::testing::uniform_matrix(rng, 6, 10, 0.0, 1.0);
      const Matrix eps = randn(rng, 6, 4);
      const auto report = grad_check_model(spec, mvae::testing::random_params(spec, 7), x, eps, 1e-4);
      for (const auto& b : report.blocks) {
        if (b.max_relative_error >= worst) {
          worst = b.max_relative_error;
          worst_where = std::string(to_string(head)) + (couple ? "/coupled-mean " : "/raw-mean ") + b.name;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 30.0,
          fmt("max relative error %.2e at %s (limit 1e-4), %.1f s (limit 30 s)", worst,
              worst_where.c_str(), secs)};
}

// Empirical moments of 1e5 reparameterized draws.
Outcome reparameterization_covariance() {
  const std::size_t n = 100000, d = 3;
  const Matrix mu1{{0.5, -1.0, 0.25}};
  const Matrix lv1{{std::log(0.5), 0.0, std::log(2.0)}};
  const Matrix c{{1.0, 0.4, 0.0}, {-0.3, 1.2, 0.2}, {0.1, 0.0, 0.8}};
  Matrix mu(n, d), lv(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mu(i, j) = mu1(0, j), lv(i, j) = lv1(0, j);
  Rng rng(3);
  const PosteriorParams p{mu, lv, &c, true};
  const Matrix z = reparameterize(p, randn(rng, n, d));
  const Matrix target_mean = effective_mean({mu1, lv1, &c, true});
  const Matrix target_cov = assemble_covariance(mvae::testing::flat(posterior_scale(lv1)), c);

  Matrix m = column_sums(z) * (1.0 / static_cast<double>(n));
  Matrix cov(d, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) cov(a, b) += (z(i, a) - m(0, a)) * (z(i, b) - m(0, b));
  cov *= 1.0 / static_cast<double>(n - 1);
  const double rel = frobenius_norm(cov - target_cov) / frobenius_norm(target_cov);
  const double mean_err = max_abs(m - target_mean);
  return {rel < 0.05 && mean_err < 0.02,
          fmt("covariance relative Frobenius error %.4f (limit 0.05), max mean error %.4f (limit 0.02)",
              rel, mean_err)};
}

// VAE vs. MVAE with frozen identity coupling and raw mean, 5 epochs.
Outcome baseline_equivalence() {
  const auto pool = synth_blobs(3, 8, 400, 16, 0.5);
  const auto split = apply_split(pool, SplitRule{300, 100, 0, 1});
  TrainConfig vae;
  vae.epochs = 5;
  vae.batch_size = 50;
  vae.hidden = 32;
  vae.latent = 4;
  vae.seed = 17;
  vae.patience = 5;
  vae.model = ModelKind::vae;
  TrainConfig mv = vae;
  mv.model = ModelKind::mvae;
  mv.freeze_coupling = true;
  mv.couple_mean = false;
  const Matrix tx = split.features_of(Partition::train), vx = split.features_of(Partition::val);
  const auto a = train(vae, tx, vx);
  const auto b = train(mv, tx, vx);
  if (a.step_objectives.size() != b.step_objectives.size()) return {false, "step counts differ"};
  double loss_diff = 0.0, param_diff = 0.0;
  for (std::size_t i = 0; i < a.step_objectives.size(); ++i)
    loss_diff = std::max(loss_diff, std::abs(a.step_objectives[i] - b.step_objectives[i]));
  const auto pa = a.final_params.blocks();
  const auto pb = b.final_params.blocks();
  for (std::size_t k = 0; k < kBlockCount; ++k)
    param_diff = std::max(param_diff, max_abs(*pa[k].matrix - *pb[k].matrix));
  return {loss_diff <= 1e-9 && param_diff <= 1e-9 && a.epochs.size() == 5,
          fmt("%zu steps over %zu epochs: max loss difference %.2e, max parameter difference %.2e (limit 1e-9)",
              a.step_objectives.size(), a.epochs.size(), loss_diff, param_diff)};
}

// NMI, ARI, ECE vs. brute force; Brier/NLL trivial cases.
Outcome metric_oracles() {
  Rng rng(2);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<int> a(n), b(n);
    const int ka = 1 + static_cast<int>(rng.below(6)), kb = 1 + static_cast<int>(rng.below(6));
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(ka)));
      b[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(kb)));
    }
    worst = std::max(worst, std::abs(nmi(a, b) - mvae::testing::nmi_oracle(a, b)));
    worst = std::max(worst, std::abs(ari(a, b) - mvae::testing::ari_oracle(a, b)));

    std::vector<double> conf(n);
    std::vector<bool> correct(n);
    auto flags = std::make_unique<bool[]>(n);
    for (std::size_t i = 0; i < n; ++i) {
      conf[i] = rng.below(4) == 0 ? static_cast<double>(rng.below(16)) / 15.0 : rng.uniform();
      correct[i] = flags[i] = rng.below(2) == 1;
    }
    const double ece = expected_calibration_error(conf, std::span<const bool>(flags.get(), n), 15);
    worst = std::max(worst, std::abs(ece - mvae::testing::ece_oracle(conf, correct, 15)));
  }
  const auto perfect = classification_metrics(Matrix{{1, 0}, {0, 1}}, std::vector<int>{0, 1});
  const auto uniform = classification_metrics(Matrix{{0.5, 0.5}}, std::vector<int>{1});
  const bool trivial = perfect.brier == 0.0 && perfect.nll == 0.0 && uniform.brier == 0.5 &&
                       uniform.nll == std::log(2.0);
  return {worst < 1e-12 && trivial,
          fmt("max deviation from brute force %.2e over 100 labelings (limit 1e-12); Brier/NLL trivial cases %s",
              worst, trivial ? "exact" : "WRONG")};
}

// d_z = 16, 50 epochs, both models on 2000 MNIST-format samples.
Outcome desk_scale_trend() {
  const auto t0 = Clock::now();
  DatasetSplit data;
  std::string source;
  const char* mnist = std::getenv("MVAE_MNIST_DIR");
  if (mnist != nullptr && fs::exists(fs::path(mnist) / "train-images-idx3-ubyte")) {
    LabeledData all = load_idx(fs::path(mnist) / "train-images-idx3-ubyte",
                               fs::path(mnist) / "train-labels-idx1-ubyte");
    std::vector<std::size_t> first(2000);
    for (std::size_t i = 0; i < first.size(); ++i) first[i] = i;
    LabeledData subset{"mnist", gather_rows(all.features, first),
                       std::vector<int>(all.labels.begin(), all.labels.begin() + 2000), all.class_count};
    data = apply_split(subset, SplitRule{1600, 200, 200, 7});
    source = "MNIST subset";
  } else {
    data = apply_split(synth_blobs(7, 10, 2000, 784, 0.5), SplitRule{1600, 200, 200, 7});
    source = "synthetic 784-d blobs (no MNIST files)";
  }
  const Matrix tx = data.features_of(Partition::train), vx = data.features_of(Partition::val),
               te = data.features_of(Partition::test);
  double mse[2] = {0, 0};
  for (int k = 0; k < 2; ++k) {
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.latent = 16;
    cfg.seed = 7;
    cfg.model = k == 0 ? ModelKind::vae : ModelKind::mvae;
    const auto r = train(cfg, tx, vx);
    mse[k] = mse_per_pixel(reconstruct_mean(r.spec, r.best_params, te), te);
  }
  const double secs = seconds_since(t0);
  const double ratio = mse[1] / mse[0];
  return {mse[0] < 0.06 && mse[1] < 0.06 && ratio <= 1.05 && secs < 600.0,
          fmt("%s: test MSE vae %.5f, mvae %.5f (limit 0.06), ratio %.3f (limit 1.05), %.0f s (limit 600 s)",
              source.c_str(), mse[0], mse[1], ratio, secs)};
}

fs::path write_small_config(const fs::path& dir, const std::string& name) {
  const fs::path p = dir / (name + ".ini");
  std::ofstream(p) << "[experiment]\nname = " << name
                   << "\n[data]\nformat = synthetic\nclasses = 4\nsamples = 400\ndim = 16\n"
                      "spread = 0.3\nsplit = 240,80,80\nseed = 4\n"
                      "[train]\nlatent = 2\nhidden = 32\nepochs = 8\nbatch_size = 40\nlearning_rate = 0.005\nseed = 9\n"
                      "[eval]\nkmeans_restarts = 3\n"
                      "[output]\ndir = " << (dir / "run").string() << "\n";
  return p;
}

// Two cmd_train runs give byte-identical logs and checkpoints.
Outcome determinism() {
  const fs::path dir = fresh_dir("determinism");
  const fs::path cfg = write_small_config(dir, "det");
  const auto a = cmd_train(cfg);
  const std::string log = slurp(a.dir / kEpochLogFile), ckpt = slurp(a.dir / kBestCheckpointFile);
  cmd_train(cfg);
  const bool same_log = slurp(a.dir / kEpochLogFile) == log;
  const bool same_ckpt = slurp(a.dir / kBestCheckpointFile) == ckpt;
  return {same_log && same_ckpt && !log.empty() && !ckpt.empty(),
          fmt("epoch CSV %s (%zu bytes), checkpoint %s (%zu bytes)", same_log ? "identical" : "DIFFERS",
              log.size(), same_ckpt ? "identical" : "DIFFERS", ckpt.size())};
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// cmd_sweep over {2, 4}: 4 rows x 8 metrics, winners consistent with values.
Outcome sweep_shape() {
  const fs::path dir = fresh_dir("sweep");
  const fs::path summary = cmd_sweep(write_small_config(dir, "sweep"), {2, 4});
  std::istringstream in(slurp(summary));
  std::string line;
  std::getline(in, line);
  const auto header = split_csv(line);
  if (header.size() != 12) return {false, "header has " + std::to_string(header.size()) + " columns"};
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) rows.push_back(split_csv(line));
  if (rows.size() != 4) return {false, std::to_string(rows.size()) + " rows"};

  const auto& schema = MetricReport::schema();
  std::size_t checked = 0, mismatches = 0, metrics_seen = 0;
  for (std::size_t r = 0; r < 4; ++r) {
    if (rows[r].size() != 12) return {false, "row " + std::to_string(r) + " is ragged"};
    const auto& other = rows[r ^ 1];  // vae/mvae pairs are adjacent
    if (rows[r][0] != other[0]) return {false, "rows not paired by latent"};
    std::string wins = rows[r][10];
    for (std::size_t m = 0; m < schema.size(); ++m) {
      ++metrics_seen;
      const double mine = std::stod(rows[r][2 + m]), theirs = std::stod(other[2 + m]);
      const bool expected = schema[m].second == Orientation::higher ? mine >= theirs : mine <= theirs;
      const std::string name(schema[m].first);
      const bool marked = (";" + wins + ";").find(";" + name + ";") != std::string::npos;
      ++checked;
      if (expected != marked) ++mismatches;
    }
  }
  return {mismatches == 0 && metrics_seen == 32,
          fmt("4 rows x %zu metrics; %zu/%zu winner marks agree with the metric columns",
              schema.size(), checked - mismatches, checked)};
}

// cmd_render_sweep at d_z = 2, grid 10 gives a 10x10 PGM that reads back.
Outcome rendering() {
  const fs::path dir = fresh_dir("render");
  const auto outcome = cmd_train(write_small_config(dir, "render"));
  const fs::path ckpt_path = outcome.dir / kBestCheckpointFile;
  const fs::path out = cmd_render_sweep(ckpt_path, 0, 1, 10, 2.0, dir / "sweep.pgm");
  const PnmImage img = read_pnm(out);
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const ImageGrid grid = render_sweep(ckpt, 0, 1, 10, 2.0);
  const TileShape tile = infer_tile_shape(ckpt.spec.input_dim);
  bool same = img.pixels.size() == grid.payload().size();
  double worst = 0.0;
  for (std::size_t i = 0; same && i < img.pixels.size(); ++i) {
    same = img.pixels[i] == quantize(grid.payload()[i]);
    worst = std::max(worst, std::abs(img.pixels[i] / 255.0 - grid.payload()[i]));
  }
  const bool geometry = img.channels == 1 && img.width == 10 * tile.width && img.height == 10 * tile.height &&
                        grid.tile_rows() == 10 && grid.tile_cols() == 10;
  return {geometry && same && worst <= 0.5 / 255.0 + 1e-12,
          fmt("P5 %zux%zu = 10x10 tiles of %zux%zu; round trip %s, max error %.5f (limit 1/510)", img.width,
              img.height, tile.width, tile.height, same ? "exact after quantization" : "MISMATCH", worst)};
}

}  // namespace

int main(int argc, char** argv) {
  g_scratch = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "mvae-acceptance";
  fs::create_directories(g_scratch);

  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"kl-closed-form-vs-monte-carlo", kl_monte_carlo},
      {"gradient-fidelity", gradient_fidelity},
      {"reparameterization-covariance", reparameterization_covariance},
      {"baseline-equivalence", baseline_equivalence},
      {"metric-oracles", metric_oracles},
      {"desk-scale-learning-trend", desk_scale_trend},
      {"determinism", determinism},
      {"sweep-artifact-shape", sweep_shape},
      {"rendering", rendering},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
