#pragma once

#include <span>
#include <vector>

#include "mvae/matrix.hpp"

namespace mvae {

/// log|det C| below this is treated as a divergent, singular coupling.
inline constexpr double kMinLogAbsDetCoupling = -300.0;

/// Encoder outputs for one batch plus the global coupling matrix.
/// coupling == nullptr selects the diagonal (factorized) family, for which
/// C is implicitly the identity.
struct PosteriorParams {
  const Matrix& mu_raw;  // batch x d_z
  const Matrix& logvar;  // batch x d_z, already clamped
  const Matrix* coupling = nullptr;
  bool couple_mean = false;

  std::size_t batch() const noexcept { return mu_raw.rows(); }
  std::size_t latent() const noexcept { return mu_raw.cols(); }
  bool diagonal() const noexcept { return coupling == nullptr; }
  /// Throws ContractError on inconsistent shapes.
  void validate() const;
};

/// Per-sample mean: C * mu_raw when the mean is coupled, else mu_raw.
Matrix effective_mean(const PosteriorParams& p);

/// exp(logvar / 2), elementwise.
Matrix posterior_scale(const Matrix& logvar);

/// z = mu_eff + C * (sigma .* eps) per row; C = I for the diagonal family.
Matrix reparameterize(const PosteriorParams& p, const Matrix& eps);

/// C * diag(sigma^2) * C^T.
Matrix assemble_covariance(std::span<const double> sigma, const Matrix& coupling);

/// log|det C|, enforcing the singularity policy: throws SingularityError when
/// the factorization fails or the value is below kMinLogAbsDetCoupling.
double coupling_log_abs_det(const Matrix& coupling);

/// Closed-form KL(q || N(0, I)) per sample for the coupled posterior:
/// 1/2 [tr(Sigma) + |mu_eff|^2 - d - log det Sigma], with
/// tr(Sigma) = sum_j sigma_j^2 |C_:j|^2 and
/// log det Sigma = 2 (log|det C| + sum_j log sigma_j).
std::vector<double> kl_coupled(const PosteriorParams& p);

/// Closed-form KL per sample for the factorized posterior (ignores coupling).
std::vector<double> kl_diagonal(const PosteriorParams& p);

/// Dispatches on p.diagonal().
std::vector<double> kl_divergence(const PosteriorParams& p);

struct PosteriorGradients {
  Matrix d_mu_raw;    // batch x d_z
  Matrix d_logvar;    // batch x d_z
  Matrix d_coupling;  // d_z x d_z, all zero for the diagonal family
};

/// Gradient of sum_n weight * KL_n.
PosteriorGradients kl_grads(const PosteriorParams& p, double weight = 1.0);

/// Pulls dL/dz back through reparameterize for fixed eps.
PosteriorGradients reparameterize_backward(const PosteriorParams& p, const Matrix& eps,
                                           const Matrix& d_z);

}  // namespace mvae
