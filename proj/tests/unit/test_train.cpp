#include <doctest.h>

#include <cmath>
#include <sstream>

#include "../support/fixtures.hpp"
#include "mvae/data.hpp"
#include "mvae/error.hpp"
#include "mvae/objective.hpp"
#include "mvae/train.hpp"

using namespace mvae;
using mvae::testing::random_params;
using mvae::testing::uniform_matrix;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 50;
  cfg.hidden = 16;
  cfg.latent = 2;
  cfg.seed = 17;
  return cfg;
}

struct Blobs {
  Matrix train, val;
};

Blobs blobs(std::size_t n = 400) {
  const auto pool = synth_blobs(3, 8, n, 16, 0.5);
  const auto split = apply_split(pool, SplitRule{n * 3 / 4, n / 4, 0, 1});
  return {split.features_of(Partition::train), split.features_of(Partition::val)};
}

}  // namespace

TEST_CASE("adamw_step") {
  ModelSpec spec{3, 2, 2, Likelihood::bernoulli, ModelKind::mvae, true};
  SUBCASE("zero gradient without decay leaves parameters unchanged") {
    TrainConfig cfg;
    cfg.weight_decay = 0.0;
    const MlpParams p = random_params(spec, 1);
    TrainState s(p);
    adamw_step(s, GradBuffer(p), cfg);
    CHECK(s.params == p);
    CHECK(s.step == 1);
  }
  SUBCASE("decay scales weights only") {
    TrainConfig cfg;
    cfg.weight_decay = 0.1;
    cfg.learning_rate = 0.001;
    const MlpParams p = random_params(spec, 2);
    TrainState s(p);
    adamw_step(s, GradBuffer(p), cfg);
    const auto before = p.blocks();
    const auto after = std::as_const(s.params).blocks();
    for (std::size_t b = 0; b < kBlockCount; ++b) {
      const double scale = before[b].role == BlockRole::weight ? 0.9999 : 1.0;
      for (std::size_t k = 0; k < before[b].matrix->size(); ++k)
        CHECK(after[b].matrix->values()[k] == doctest::Approx(before[b].matrix->values()[k] * scale).epsilon(1e-15));
    }
  }
  SUBCASE("first step moves by lr against the gradient sign") {
    TrainConfig cfg;
    cfg.weight_decay = 0.0;
    cfg.learning_rate = 1e-3;
    const MlpParams p = random_params(spec, 3);
    TrainState s(p);
    GradBuffer g(p);
    g.enc_b1(0, 0) = 1.0;
    g.coupling(0, 1) = -2.0;
    adamw_step(s, g, cfg);
    // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
    CHECK(s.params.enc_b1(0, 0) - p.enc_b1(0, 0) == doctest::Approx(-1e-3 / (1 + 1e-8)).epsilon(1e-12));
    CHECK(s.params.coupling(0, 1) - p.coupling(0, 1) == doctest::Approx(2e-3 / (2 + 1e-8)).epsilon(1e-12));
    CHECK(s.params.enc_b1(0, 1) == p.enc_b1(0, 1));
  }
  SUBCASE("frozen coupling") {
    TrainConfig cfg;
    const MlpParams p = random_params(spec, 4);
    TrainState s(p);
    GradBuffer g(p);
    g.coupling.fill(1.0);
    adamw_step(s, g, cfg, false);
    CHECK(s.params.coupling == p.coupling);
  }
  SUBCASE("non-finite gradient names the block") {
    TrainConfig cfg;
    const MlpParams p = random_params(spec, 5);
    TrainState s(p);
    GradBuffer g(p);
    g.dec_w_out(0, 0) = std::nan("");
    try {
      adamw_step(s, g, cfg, true, 7);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      const std::string what = e.what();
      CHECK(what.find("dec_w_out") != std::string::npos);
      CHECK(what.find("epoch 7") != std::string::npos);
    }
  }
}

TEST_CASE("EarlyStopper") {
  EarlyStopper s(2, 0.1);
  CHECK(s.observe(10.0));
  CHECK(s.observe(9.0));
  CHECK_FALSE(s.observe(8.95));  // not better by min_delta
  CHECK_FALSE(s.should_stop());
  CHECK_FALSE(s.observe(9.5));
  CHECK(s.should_stop());

  EarlyStopper strict(1, 0.0);
  for (double v = 100.0; v > 0.0; v -= 1.0) {
    CHECK(strict.observe(v));
    CHECK_FALSE(strict.should_stop());
  }
}

TEST_CASE("training with lr = 0 and patience 1 stops after two epochs") {
  const auto data = blobs(200);
  TrainConfig cfg = small_config();
  cfg.learning_rate = 0.0;
  cfg.patience = 1;
  const auto r = train(cfg, data.train, data.val);
  CHECK(r.epochs.size() == 2);
  CHECK(r.stopped_early);
  CHECK(r.best_epoch == 1);
}

TEST_CASE("training is deterministic and logs consistent terms") {
  const auto data = blobs(200);
  const TrainConfig cfg = small_config();
  const auto a = train(cfg, data.train, data.val);
  const auto b = train(cfg, data.train, data.val);
  REQUIRE(a.epochs.size() == b.epochs.size());
  std::ostringstream sa, sb;
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    write_epoch_csv_row(sa, a.epochs[i], false);
    write_epoch_csv_row(sb, b.epochs[i], false);
    CHECK(std::abs(a.epochs[i].train_nelbo - (a.epochs[i].recon + a.epochs[i].kl)) < 1e-9);
  }
  CHECK(sa.str() == sb.str());
  CHECK(a.final_params == b.final_params);
  CHECK(a.step_objectives == b.step_objectives);
}

TEST_CASE("vae equals mvae with frozen identity coupling and raw mean") {
  const auto data = blobs(200);
  TrainConfig vae = small_config();
  vae.model = ModelKind::vae;
  TrainConfig mv = vae;
  mv.model = ModelKind::mvae;
  mv.freeze_coupling = true;
  mv.couple_mean = false;
  const auto a = train(vae, data.train, data.val);
  const auto b = train(mv, data.train, data.val);
  REQUIRE(a.step_objectives.size() == b.step_objectives.size());
  for (std::size_t i = 0; i < a.step_objectives.size(); ++i)
    CHECK(std::abs(a.step_objectives[i] - b.step_objectives[i]) <= 1e-9);
  const auto pa = a.final_params.blocks();
  const auto pb = std::as_const(b.final_params).blocks();
  for (std::size_t k = 0; k < kBlockCount; ++k) CHECK(max_abs(*pa[k].matrix - *pb[k].matrix) <= 1e-9);
}

TEST_CASE("training reduces the negative ELBO on eight blobs") {
  const auto pool = synth_blobs(1, 8, 2000, 16, 0.3);
  const auto split = apply_split(pool, SplitRule{1600, 400, 0, 1});
  TrainConfig cfg = small_config();
  cfg.epochs = 150;
  cfg.batch_size = 100;
  cfg.patience = cfg.epochs;
  cfg.hidden = 64;
  cfg.learning_rate = 1e-2;
  const auto r = train(cfg, split.features_of(Partition::train), split.features_of(Partition::val));
  const double first = r.epochs.front().train_nelbo;
  const double last = r.epochs.back().train_nelbo;
  MESSAGE("epoch-1 nelbo " << first << ", final " << last);
  CHECK(last <= 0.8 * first);
}

TEST_CASE("small learning rate descends on a toy problem for most seeds") {
  Rng data_rng(3);
  const Matrix x = uniform_matrix(data_rng, 6, 10, 0.0, 1.0);
  int descended = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TrainConfig cfg;
    cfg.learning_rate = 1e-4;
    cfg.weight_decay = 0.0;
    ModelSpec spec{10, 16, 4, Likelihood::bernoulli, ModelKind::mvae, true};
    Rng init(seed);
    TrainState s(MlpParams::initialize(spec, init));
    Rng noise(seed + 100);
    const Matrix eps = randn(noise, 6, 4);
    const double start = negative_elbo(spec, s.params, x, eps, false).terms.objective;
    for (int step = 0; step < 10; ++step) adamw_step(s, negative_elbo(spec, s.params, x, eps).grads, cfg);
    if (negative_elbo(spec, s.params, x, eps, false).terms.objective < start) ++descended;
  }
  CHECK(descended >= 19);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = TrainConfig{};
  cfg.patience = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = TrainConfig{};
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  const auto data = blobs(40);
  CHECK_THROWS_AS(train(TrainConfig{}, data.train, Matrix(0, 16)), ContractError);
}
