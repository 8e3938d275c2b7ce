#include "mvae/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "mvae/error.hpp"
#include "mvae/objective.hpp"

namespace mvae {

void TrainConfig::validate() const {
  if (epochs < 1) throw ContractError("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw ContractError("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ContractError("TrainConfig: learning_rate must be finite and non-negative");
  if (!(weight_decay >= 0.0)) throw ContractError("TrainConfig: weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ContractError("TrainConfig: betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ContractError("TrainConfig: adam_eps must be positive");
  if (patience < 1) throw ContractError("TrainConfig: patience must be >= 1");
  if (!(min_delta >= 0.0)) throw ContractError("TrainConfig: min_delta must be >= 0");
  if (latent < 1) throw ContractError("TrainConfig: latent must be >= 1");
  if (hidden < 1) throw ContractError("TrainConfig: hidden must be >= 1");
}

ModelSpec TrainConfig::model_spec(std::size_t input_dim) const {
  return ModelSpec{input_dim, hidden, latent, likelihood, model, couple_mean};
}

TrainState::TrainState(MlpParams initial)
    : params(std::move(initial)), first_moment(params), second_moment(params) {}

void adamw_step(TrainState& state, const GradBuffer& grads, const TrainConfig& cfg,
                bool train_coupling, std::size_t epoch) {
  if (!grads.same_shape(state.params)) throw ContractError("adamw_step: gradient shape mismatch");
  for (const auto& b : grads.blocks()) {
    if (!b.matrix->all_finite()) {
      double worst = 0.0;
      for (double v : b.matrix->values())
        if (!std::isfinite(v) || std::abs(v) > worst) worst = std::abs(v);
      throw NumericError("non-finite gradient at epoch " + std::to_string(epoch) + ", block " +
                         std::string(b.name) + ", max |g| = " + std::to_string(worst));
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - cfg.learning_rate * cfg.weight_decay;

  auto params = state.params.blocks();
  auto m1 = state.first_moment.blocks();
  auto m2 = state.second_moment.blocks();
  const auto g = grads.blocks();
  for (std::size_t i = 0; i < kBlockCount; ++i) {
    if (params[i].role == BlockRole::coupling && !train_coupling) continue;
    auto theta = params[i].matrix->values();
    auto m = m1[i].matrix->values();
    auto v = m2[i].matrix->values();
    auto gv = g[i].matrix->values();
    const bool decays = params[i].role == BlockRole::weight;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      if (decays) theta[j] *= decay;
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gv[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gv[j] * gv[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      theta[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
}

EarlyStopper::EarlyStopper(std::size_t patience, double min_delta)
    : patience_(patience), min_delta_(min_delta) {}

bool EarlyStopper::observe(double validation) {
  if (validation < best_ - min_delta_ || (std::isinf(best_) && std::isfinite(validation))) {
    best_ = validation;
    since_improvement_ = 0;
    return true;
  }
  ++since_improvement_;
  return false;
}

double mean_negative_elbo(const ModelSpec& spec, const MlpParams& params, const Matrix& x,
                          std::size_t batch_size, Rng& rng, std::size_t n_samples) {
  if (x.rows() == 0) throw ContractError("mean_negative_elbo: empty data");
  double total = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < x.rows(); start += batch_size) {
    const std::size_t end = std::min(x.rows(), start + batch_size);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    const Matrix batch = gather_rows(x, idx);
    const ObjectiveResult r = negative_elbo(spec, params, batch, rng, n_samples, false);
    total += r.terms.objective * static_cast<double>(batch.rows());
  }
  return total / static_cast<double>(x.rows());
}

TrainResult train(const TrainConfig& cfg, const Matrix& train_x, const Matrix& val_x,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_x.rows() == 0) throw ContractError("train: empty training partition");
  if (val_x.rows() == 0) throw ContractError("train: empty validation partition");
  if (val_x.cols() != train_x.cols()) throw ContractError("train: partition widths differ");

  const ModelSpec spec = cfg.model_spec(train_x.cols());
  const Rng root(cfg.seed);
  Rng init_rng = root.derive("init");
  Rng noise_rng = root.derive("noise");
  const bool train_coupling = spec.coupled() && !cfg.freeze_coupling;

  TrainState state(MlpParams::initialize(spec, init_rng));
  EarlyStopper stopper(cfg.patience, cfg.min_delta);
  TrainResult result;
  result.spec = spec;
  result.best_params = state.params;

  const std::size_t n = train_x.rows();
  std::vector<std::size_t> idx;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const std::vector<std::size_t> order = root.derive("shuffle", epoch).permutation(n);
    double recon_sum = 0.0, kl_sum = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                 order.begin() + static_cast<std::ptrdiff_t>(end));
      const Matrix batch = gather_rows(train_x, idx);
      const ObjectiveResult r = negative_elbo(spec, state.params, batch, noise_rng, 1, true);
      if (!std::isfinite(r.terms.objective)) {
        throw NumericError("non-finite objective at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(state.step + 1));
      }
      const double w = static_cast<double>(batch.rows());
      recon_sum += r.terms.reconstruction * w;
      kl_sum += r.terms.kl * w;
      result.step_objectives.push_back(r.terms.objective);
      adamw_step(state, r.grads, cfg, train_coupling, epoch);
    }

    EpochLog log;
    log.epoch = epoch;
    log.recon = recon_sum / static_cast<double>(n);
    log.kl = kl_sum / static_cast<double>(n);
    log.train_nelbo = log.recon + log.kl;
    Rng val_rng = root.derive("validation");
    log.val_nelbo = mean_negative_elbo(spec, state.params, val_x, cfg.batch_size, val_rng);
    if (!std::isfinite(log.val_nelbo)) {
      throw NumericError("non-finite validation objective at epoch " + std::to_string(epoch));
    }
    log.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    const bool improved = stopper.observe(log.val_nelbo);
    if (improved) {
      result.best_params = state.params;
      result.best_epoch = epoch;
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log, state.params, improved);
    if (stopper.should_stop()) {
      result.stopped_early = epoch < cfg.epochs;
      break;
    }
  }
  result.final_params = std::move(state.params);
  return result;
}

void write_epoch_csv_header(std::ostream& out) {
  out << "epoch,train_nelbo,val_nelbo,recon,kl,seconds\n";
}

void write_epoch_csv_row(std::ostream& out, const EpochLog& log, bool include_seconds) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.6f\n", log.epoch, log.train_nelbo,
                log.val_nelbo, log.recon, log.kl, include_seconds ? log.seconds : 0.0);
  out << buf;
}

}  // namespace mvae
