#pragma once

#include <vector>

#include "mvae/matrix.hpp"
#include "mvae/network.hpp"
#include "mvae/posterior.hpp"
#include "mvae/rng.hpp"

namespace mvae {

/// Per-sample reconstruction loss (summed over pixels) and its gradient with
/// respect to the decoder's output pre-activation.
struct ReconLoss {
  std::vector<double> per_sample;
  Matrix grad;
};

/// Binary cross-entropy evaluated from logits, log(1 + e^a) - x a, which is
/// the stable form of -[x log sigmoid(a) + (1 - x) log(1 - sigmoid(a))].
/// Targets must lie in [0, 1].
ReconLoss bce_loss(const Matrix& logits, const Matrix& x);

/// Gaussian negative log-likelihood with fixed variance:
/// |x - xhat|^2 / (2 var) + D/2 log(2 pi var).
ReconLoss gaussian_loss(const Matrix& xhat, const Matrix& x, double variance = 1.0);

/// The additive constant of gaussian_loss for D pixels.
double gaussian_constant(std::size_t pixels, double variance = 1.0);

ReconLoss reconstruction_loss(Likelihood head, const Matrix& logits, const Matrix& x);

/// Batch means of the negative ELBO and its two terms.
struct ObjectiveTerms {
  double objective = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
};

struct ObjectiveResult {
  ObjectiveTerms terms;
  GradBuffer grads;  // empty unless gradients were requested
};

/// Builds the posterior view of spec's family over an encoder output.
PosteriorParams make_posterior(const ModelSpec& spec, const MlpParams& params,
                               const EncoderOutput& enc);

/// Negative ELBO with injected noise: eps holds n_samples stacked blocks of
/// batch x d_z standard-normal draws; the reconstruction term is averaged
/// over them and the KL term is analytic.
ObjectiveResult negative_elbo(const ModelSpec& spec, const MlpParams& params, const Matrix& x,
                              const Matrix& eps, bool with_grads = true);

/// Same, drawing n_samples noise blocks from rng.
ObjectiveResult negative_elbo(const ModelSpec& spec, const MlpParams& params, const Matrix& x,
                              Rng& rng, std::size_t n_samples = 1, bool with_grads = true);

}  // namespace mvae
