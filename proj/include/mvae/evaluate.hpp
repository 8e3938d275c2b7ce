#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mvae/data.hpp"
#include "mvae/metrics.hpp"
#include "mvae/network.hpp"

namespace mvae {

enum class Orientation { higher, lower };

struct Metric {
  std::string name;
  double value;
  Orientation orientation;
};

/// The fixed metric set, in column order, with the direction in which each
/// one improves.
class MetricReport {
 public:
  static constexpr std::size_t kSize = 8;
  static const std::array<std::pair<std::string_view, Orientation>, kSize>& schema();

  MetricReport();  // all NaN
  static MetricReport nan() { return {}; }

  double& operator[](std::string_view name);
  double operator[](std::string_view name) const;
  const std::vector<Metric>& metrics() const noexcept { return metrics_; }
  bool all_finite() const;

  static std::string csv_header();
  std::string csv_row() const;
  /// {"name": {"value": v, "orientation": "higher"|"lower"}, ...}; NaN as null.
  std::string to_json() const;

  /// Whether a beats b on a metric of the given orientation. NaN never wins
  /// against a finite value; exact ties count as a win for both.
  static bool wins(double a, double b, Orientation o);

 private:
  std::vector<Metric> metrics_;
};

struct EvalConfig {
  std::size_t elbo_samples = 16;
  std::size_t ece_bins = kDefaultEceBins;
  std::size_t kmeans_restarts = 10;
  ProbeConfig probe;
  std::uint64_t seed = 0;
  std::size_t batch_size = 100;
};

/// Posterior effective means, no sampling.
Matrix latent_codes(const ModelSpec& spec, const MlpParams& params, const Matrix& x);

/// Decoder output at the posterior effective mean.
Matrix reconstruct_mean(const ModelSpec& spec, const MlpParams& params, const Matrix& x);

/// Decoder output at one reparameterized sample.
Matrix reconstruct_sample(const ModelSpec& spec, const MlpParams& params, const Matrix& x,
                          Rng& rng);

/// Mean ELBO (higher is better) with an n_samples Monte-Carlo average of the
/// reconstruction log-likelihood and the analytic KL.
double eval_elbo(const ModelSpec& spec, const MlpParams& params, const Matrix& x,
                 std::size_t n_samples, Rng& rng, std::size_t batch_size = 100);

/// Reconstruction, ELBO, probe and clustering metrics. The probe is fit on
/// train-partition codes and scored on the test partition; k-means runs on
/// test codes with K = class count.
MetricReport evaluate_model(const ModelSpec& spec, const MlpParams& params,
                            const DatasetSplit& data, const EvalConfig& cfg = {});

}  // namespace mvae
