#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

#include "mvae/matrix.hpp"
#include "mvae/network.hpp"

namespace mvae {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 100;
  double learning_rate = 1e-3;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t patience = 10;
  double min_delta = 0.0;
  std::uint64_t seed = 0;
  Likelihood likelihood = Likelihood::bernoulli;
  ModelKind model = ModelKind::mvae;
  std::size_t latent = 2;
  std::size_t hidden = kDefaultHidden;
  bool couple_mean = true;
  /// Keep the coupling matrix at its initial value (identity).
  bool freeze_coupling = false;

  /// Throws ContractError when a field is out of range.
  void validate() const;
  ModelSpec model_spec(std::size_t input_dim) const;
};

struct TrainState {
  MlpParams params;
  GradBuffer first_moment;
  GradBuffer second_moment;
  std::uint64_t step = 0;
  double best_validation = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improvement = 0;

  explicit TrainState(MlpParams initial);
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_nelbo = 0.0;
  double val_nelbo = 0.0;
  double recon = 0.0;  // train reconstruction term
  double kl = 0.0;     // train KL term
  double seconds = 0.0;
};

/// Decoupled weight decay on weight matrices (not biases, not the coupling
/// matrix), then a bias-corrected Adam update. The coupling matrix is left
/// untouched when train_coupling is false. Throws NumericError naming the
/// offending block when a gradient is not finite.
void adamw_step(TrainState& state, const GradBuffer& grads, const TrainConfig& cfg,
                bool train_coupling = true, std::size_t epoch = 0);

/// Tracks the best validation objective and decides when to stop.
class EarlyStopper {
 public:
  EarlyStopper(std::size_t patience, double min_delta);
  /// Records one validation value; returns true if it improved on the best.
  bool observe(double validation);
  bool should_stop() const noexcept { return since_improvement_ >= patience_; }
  double best() const noexcept { return best_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t since_improvement_ = 0;
};

struct TrainResult {
  ModelSpec spec;
  MlpParams final_params;
  MlpParams best_params;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  std::vector<EpochLog> epochs;
  /// Mini-batch objective at every optimizer step.
  std::vector<double> step_objectives;
};

using EpochCallback = std::function<void(const EpochLog&, const MlpParams& params, bool improved)>;

/// Deterministic mini-batch training. Initialization, per-epoch shuffles,
/// reparameterization noise and validation noise each come from their own
/// stream derived from cfg.seed.
TrainResult train(const TrainConfig& cfg, const Matrix& train_x, const Matrix& val_x,
                  const EpochCallback& on_epoch = {});

/// Mean single-sample negative ELBO over x in batches; noise from rng.
double mean_negative_elbo(const ModelSpec& spec, const MlpParams& params, const Matrix& x,
                          std::size_t batch_size, Rng& rng, std::size_t n_samples = 1);

void write_epoch_csv_header(std::ostream& out);
/// With include_seconds false the seconds column is written as 0 so logs are
/// byte-reproducible.
void write_epoch_csv_row(std::ostream& out, const EpochLog& log, bool include_seconds);

}  // namespace mvae
