#include "mvae/posterior.hpp"

#include <cmath>
#include <string>

#include "mvae/error.hpp"
#include "mvae/linalg.hpp"

namespace mvae {

void PosteriorParams::validate() const {
  if (logvar.rows() != mu_raw.rows() || logvar.cols() != mu_raw.cols()) {
    throw ContractError("PosteriorParams: mu_raw and logvar shapes differ");
  }
  if (coupling != nullptr && (coupling->rows() != latent() || coupling->cols() != latent())) {
    throw ContractError("PosteriorParams: coupling must be " + std::to_string(latent()) + "x" +
                        std::to_string(latent()));
  }
}

Matrix effective_mean(const PosteriorParams& p) {
  p.validate();
  if (p.diagonal() || !p.couple_mean) return p.mu_raw;
  return matmul_nt(p.mu_raw, *p.coupling);
}

Matrix posterior_scale(const Matrix& logvar) {
  Matrix s = logvar;
  for (double& v : s.values()) v = std::exp(0.5 * v);
  return s;
}

Matrix reparameterize(const PosteriorParams& p, const Matrix& eps) {
  p.validate();
  if (eps.rows() != p.batch() || eps.cols() != p.latent()) {
    throw ContractError("reparameterize: eps shape must match mu_raw");
  }
  const Matrix noise = hadamard(posterior_scale(p.logvar), eps);
  if (p.diagonal()) return p.mu_raw + noise;
  if (p.couple_mean) return matmul_nt(p.mu_raw + noise, *p.coupling);
  return p.mu_raw + matmul_nt(noise, *p.coupling);
}

Matrix assemble_covariance(std::span<const double> sigma, const Matrix& coupling) {
  if (coupling.rows() != sigma.size() || coupling.cols() != sigma.size()) {
    throw ContractError("assemble_covariance: coupling must be square with side |sigma|");
  }
  for (double s : sigma) {
    if (!(s > 0.0)) throw ContractError("assemble_covariance: sigma must be positive");
  }
  Matrix factor = coupling;  // L = C diag(sigma)
  for (std::size_t i = 0; i < factor.rows(); ++i)
    for (std::size_t j = 0; j < factor.cols(); ++j) factor(i, j) *= sigma[j];
  Matrix cov = matmul_nt(factor, factor);
  for (std::size_t i = 0; i < cov.rows(); ++i) {
    for (std::size_t j = i + 1; j < cov.cols(); ++j) {
      const double avg = 0.5 * (cov(i, j) + cov(j, i));
      cov(i, j) = cov(j, i) = avg;
    }
  }
  return cov;
}

double coupling_log_abs_det(const Matrix& coupling) {
  const double lad = log_abs_det(lu_factor(coupling));
  if (lad < kMinLogAbsDetCoupling) {
    throw SingularityError("coupling matrix is numerically singular (log|det C| = " +
                               std::to_string(lad) + ")",
                           lad);
  }
  return lad;
}

namespace {

std::vector<double> column_norms_sq(const Matrix& c) {
  std::vector<double> n(c.cols(), 0.0);
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) n[j] += c(i, j) * c(i, j);
  return n;
}

}  // namespace

std::vector<double> kl_coupled(const PosteriorParams& p) {
  p.validate();
  const Matrix identity = Matrix::identity(p.latent());
  const Matrix& c = p.diagonal() ? identity : *p.coupling;
  const double lad = coupling_log_abs_det(c);
  const std::vector<double> col_sq = column_norms_sq(c);
  const Matrix mean = effective_mean(p);
  const std::size_t k = p.latent();

  std::vector<double> kl(p.batch());
  for (std::size_t n = 0; n < p.batch(); ++n) {
    double trace = 0.0, mean_sq = 0.0, sum_logvar = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double lv = p.logvar(n, j);
      trace += std::exp(lv) * col_sq[j];
      mean_sq += mean(n, j) * mean(n, j);
      sum_logvar += lv;
    }
    const double log_det_sigma = 2.0 * lad + sum_logvar;
    kl[n] = 0.5 * (trace + mean_sq - static_cast<double>(k) - log_det_sigma);
  }
  return kl;
}

std::vector<double> kl_diagonal(const PosteriorParams& p) {
  p.validate();
  std::vector<double> kl(p.batch());
  for (std::size_t n = 0; n < p.batch(); ++n) {
    double s = 0.0;
    for (std::size_t j = 0; j < p.latent(); ++j) {
      const double lv = p.logvar(n, j);
      const double mu = p.mu_raw(n, j);
      s += std::exp(lv) + mu * mu - 1.0 - lv;
    }
    kl[n] = 0.5 * s;
  }
  return kl;
}

std::vector<double> kl_divergence(const PosteriorParams& p) {
  return p.diagonal() ? kl_diagonal(p) : kl_coupled(p);
}

PosteriorGradients kl_grads(const PosteriorParams& p, double weight) {
  p.validate();
  const std::size_t b = p.batch(), k = p.latent();
  PosteriorGradients g{Matrix(b, k), Matrix(b, k), Matrix(k, k)};

  if (p.diagonal()) {
    for (std::size_t n = 0; n < b; ++n) {
      for (std::size_t j = 0; j < k; ++j) {
        g.d_mu_raw(n, j) = weight * p.mu_raw(n, j);
        g.d_logvar(n, j) = weight * 0.5 * (std::exp(p.logvar(n, j)) - 1.0);
      }
    }
    return g;
  }

  const Matrix& c = *p.coupling;
  const LuFactors lu = lu_factor(c);
  if (log_abs_det(lu) < kMinLogAbsDetCoupling) {
    throw SingularityError("kl_grads: coupling matrix is numerically singular", log_abs_det(lu));
  }
  const std::vector<double> col_sq = column_norms_sq(c);
  const Matrix mean = effective_mean(p);

  // d/dlogvar_j of 1/2 [sigma_j^2 |C_:j|^2 - logvar_j]
  std::vector<double> var_sum(k, 0.0);
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t j = 0; j < k; ++j) {
      const double var = std::exp(p.logvar(n, j));
      var_sum[j] += var;
      g.d_logvar(n, j) = weight * 0.5 * (var * col_sq[j] - 1.0);
    }
  }

  // 1/2 tr(C diag(s) C^T) -> C diag(s); -log|det C| -> -C^{-T}
  g.d_coupling = c;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) g.d_coupling(i, j) *= var_sum[j];
  g.d_coupling -= inverse_transpose(lu) * static_cast<double>(b);

  if (p.couple_mean) {
    // 1/2 |C m|^2: d/dm = C^T (C m), d/dC = (C m) m^T
    g.d_mu_raw = matmul(mean, c);
    g.d_coupling += matmul_tn(mean, p.mu_raw);
  } else {
    g.d_mu_raw = p.mu_raw;
  }
  g.d_mu_raw *= weight;
  g.d_coupling *= weight;
  return g;
}

PosteriorGradients reparameterize_backward(const PosteriorParams& p, const Matrix& eps,
                                           const Matrix& d_z) {
  p.validate();
  const std::size_t b = p.batch(), k = p.latent();
  if (eps.rows() != b || eps.cols() != k || d_z.rows() != b || d_z.cols() != k) {
    throw ContractError("reparameterize_backward: eps and d_z must match mu_raw");
  }
  const Matrix sigma = posterior_scale(p.logvar);
  const Matrix noise = hadamard(sigma, eps);
  PosteriorGradients g{Matrix(b, k), Matrix(b, k), Matrix(k, k)};

  // d_noise = dL/d(sigma .* eps)
  Matrix d_noise;
  if (p.diagonal()) {
    g.d_mu_raw = d_z;
    d_noise = d_z;
  } else if (p.couple_mean) {
    // z = (mu + noise) C^T
    d_noise = matmul(d_z, *p.coupling);
    g.d_mu_raw = d_noise;
    g.d_coupling = matmul_tn(d_z, p.mu_raw + noise);
  } else {
    // z = mu + noise C^T
    g.d_mu_raw = d_z;
    d_noise = matmul(d_z, *p.coupling);
    g.d_coupling = matmul_tn(d_z, noise);
  }
  // d noise_j / d logvar_j = 1/2 sigma_j eps_j
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t j = 0; j < k; ++j) g.d_logvar(n, j) = 0.5 * d_noise(n, j) * noise(n, j);
  return g;
}

}  // namespace mvae
