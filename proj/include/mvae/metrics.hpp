#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mvae/matrix.hpp"
#include "mvae/rng.hpp"

namespace mvae {

/// Mean over all entries of (xhat - x)^2.
double mse_per_pixel(const Matrix& xhat, const Matrix& x);

struct ProbeConfig {
  std::size_t iterations = 500;
  double learning_rate = 0.1;
  double l2 = 1e-4;
};

/// Multinomial logistic regression on standardized features.
struct ProbeModel {
  Matrix weights;  // d x K
  Matrix bias;     // 1 x K
  Matrix feature_mean;   // 1 x d, training statistics
  Matrix feature_scale;  // 1 x d
  std::size_t iterations = 0;
  double final_loss = 0.0;

  std::size_t class_count() const noexcept { return weights.cols(); }
  /// Row-wise softmax class probabilities.
  Matrix predict_proba(const Matrix& features) const;
};

/// Full-batch gradient descent on mean cross-entropy + l2/2 |W|^2, starting
/// from zero weights. class_count 0 means max label + 1. Throws ContractError
/// when fewer than two classes are present.
ProbeModel probe_fit(const Matrix& features, std::span<const int> labels,
                     const ProbeConfig& cfg = {}, int class_count = 0);

struct ProbeMetrics {
  double accuracy = 0.0;
  double nll = 0.0;
  double brier = 0.0;
  double ece = 0.0;
};

inline constexpr std::size_t kDefaultEceBins = 15;

/// Calibration and accuracy metrics from predicted class probabilities.
/// Brier is the multiclass sum over classes; ECE bins the max probability
/// into equal-width bins ((0, 1/B], (1/B, 2/B], ...).
ProbeMetrics classification_metrics(const Matrix& probabilities, std::span<const int> labels,
                                    std::size_t ece_bins = kDefaultEceBins);

ProbeMetrics probe_metrics(const ProbeModel& model, const Matrix& features,
                           std::span<const int> labels, std::size_t ece_bins = kDefaultEceBins);

double expected_calibration_error(std::span<const double> confidence,
                                  std::span<const bool> correct, std::size_t bins);

struct KMeansResult {
  std::vector<int> labels;
  Matrix centers;
  double inertia = 0.0;
  std::size_t restart = 0;
  /// Inertia after each Lloyd iteration of the winning restart.
  std::vector<double> inertia_trace;
};

struct KMeansConfig {
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  double tolerance = 1e-6;  // relative inertia change
};

/// k-means++ seeding, Lloyd iterations, best restart by inertia (ties go to
/// the lowest restart index).
KMeansResult kmeans(const Matrix& points, std::size_t k, Rng& rng, const KMeansConfig& cfg = {});

/// Contingency counts of two labelings (rows: distinct a labels, cols:
/// distinct b labels, in order of first appearance).
struct ContingencyTable {
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::size_t> row_sums;
  std::vector<std::size_t> col_sums;
  std::size_t total = 0;
};

ContingencyTable contingency(std::span<const int> a, std::span<const int> b);

/// Mutual information normalized by the geometric mean of the entropies.
/// 1 when both labelings are single-cluster, 0 when exactly one is.
double nmi(std::span<const int> a, std::span<const int> b);

/// Adjusted Rand index by pair counting. 1 when the labelings agree exactly
/// (including the degenerate single-cluster case).
double ari(std::span<const int> a, std::span<const int> b);

}  // namespace mvae
