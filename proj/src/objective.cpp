#include "mvae/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mvae/error.hpp"

namespace mvae {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string(what) + ": prediction and target shapes differ");
  }
}

}  // namespace

ReconLoss bce_loss(const Matrix& logits, const Matrix& x) {
  require_same_shape(logits, x, "bce_loss");
  ReconLoss out{std::vector<double>(x.rows(), 0.0), Matrix(x.rows(), x.cols())};
  for (std::size_t n = 0; n < x.rows(); ++n) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double t = x(n, j);
      if (!(t >= 0.0 && t <= 1.0)) {
        throw ContractError("bce_loss: target " + std::to_string(t) + " at (" + std::to_string(n) +
                            "," + std::to_string(j) + ") outside [0,1]");
      }
      const double a = logits(n, j);
      s += std::max(a, 0.0) - a * t + std::log1p(std::exp(-std::abs(a)));
      out.grad(n, j) = sigmoid(a) - t;
    }
    out.per_sample[n] = s;
  }
  return out;
}

double gaussian_constant(std::size_t pixels, double variance) {
  return 0.5 * static_cast<double>(pixels) * std::log(2.0 * std::numbers::pi * variance);
}

ReconLoss gaussian_loss(const Matrix& xhat, const Matrix& x, double variance) {
  require_same_shape(xhat, x, "gaussian_loss");
  if (!(variance > 0.0)) throw ContractError("gaussian_loss: variance must be positive");
  const double constant = gaussian_constant(x.cols(), variance);
  ReconLoss out{std::vector<double>(x.rows(), 0.0), Matrix(x.rows(), x.cols())};
  for (std::size_t n = 0; n < x.rows(); ++n) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double r = xhat(n, j) - x(n, j);
      s += r * r;
      out.grad(n, j) = r / variance;
    }
    out.per_sample[n] = 0.5 * s / variance + constant;
  }
  return out;
}

ReconLoss reconstruction_loss(Likelihood head, const Matrix& logits, const Matrix& x) {
  return head == Likelihood::bernoulli ? bce_loss(logits, x) : gaussian_loss(logits, x);
}

PosteriorParams make_posterior(const ModelSpec& spec, const MlpParams& params,
                               const EncoderOutput& enc) {
  return PosteriorParams{enc.mu_raw, enc.logvar, spec.coupled() ? &params.coupling : nullptr,
                         spec.couple_mean};
}

ObjectiveResult negative_elbo(const ModelSpec& spec, const MlpParams& params, const Matrix& x,
                              const Matrix& eps, bool with_grads) {
  const std::size_t batch = x.rows();
  const std::size_t k = params.latent();
  if (batch == 0) throw ContractError("negative_elbo: empty batch");
  if (eps.cols() != k || eps.rows() == 0 || eps.rows() % batch != 0) {
    throw ContractError("negative_elbo: eps must stack whole batch x d_z blocks");
  }
  const std::size_t samples = eps.rows() / batch;
  const double inv_batch = 1.0 / static_cast<double>(batch);
  const double inv_samples = 1.0 / static_cast<double>(samples);

  const EncoderOutput enc = encode(params, x);
  const PosteriorParams post = make_posterior(spec, params, enc);

  ObjectiveResult result;
  const std::vector<double> kl = kl_divergence(post);
  for (double v : kl) result.terms.kl += v;
  result.terms.kl *= inv_batch;

  Matrix d_mu(batch, k), d_logvar(batch, k), d_coupling(k, k);
  if (with_grads) result.grads = GradBuffer(params);

  double recon_sum = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    Matrix eps_s(batch, k);
    for (std::size_t n = 0; n < batch; ++n) {
      auto src = eps.row(s * batch + n);
      std::copy(src.begin(), src.end(), eps_s.row(n).begin());
    }
    const Matrix z = reparameterize(post, eps_s);
    const DecoderOutput dec = decode(params, z, spec.likelihood);
    ReconLoss rec = reconstruction_loss(spec.likelihood, dec.tape.logits, x);
    for (double v : rec.per_sample) recon_sum += v;
    if (!with_grads) continue;

    rec.grad *= inv_batch * inv_samples;
    const Matrix d_z = decoder_backward(params, dec.tape, rec.grad, result.grads);
    const PosteriorGradients pg = reparameterize_backward(post, eps_s, d_z);
    d_mu += pg.d_mu_raw;
    d_logvar += pg.d_logvar;
    d_coupling += pg.d_coupling;
  }
  result.terms.reconstruction = recon_sum * inv_batch * inv_samples;
  result.terms.objective = result.terms.reconstruction + result.terms.kl;

  if (with_grads) {
    const PosteriorGradients kg = kl_grads(post, inv_batch);
    d_mu += kg.d_mu_raw;
    d_logvar += kg.d_logvar;
    d_coupling += kg.d_coupling;
    encoder_backward(params, enc.tape, d_mu, d_logvar, result.grads);
    if (spec.coupled()) result.grads.coupling += d_coupling;
  }
  return result;
}

ObjectiveResult negative_elbo(const ModelSpec& spec, const MlpParams& params, const Matrix& x,
                              Rng& rng, std::size_t n_samples, bool with_grads) {
  if (n_samples == 0) throw ContractError("negative_elbo: n_samples must be positive");
  const Matrix eps = randn(rng, n_samples * x.rows(), params.latent());
  return negative_elbo(spec, params, x, eps, with_grads);
}

}  // namespace mvae
