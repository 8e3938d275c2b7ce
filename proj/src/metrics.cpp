#include "mvae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include "mvae/error.hpp"

namespace mvae {

double mse_per_pixel(const Matrix& xhat, const Matrix& x) {
  if (xhat.rows() != x.rows() || xhat.cols() != x.cols()) {
    throw ContractError("mse_per_pixel: shape mismatch");
  }
  if (x.empty()) throw ContractError("mse_per_pixel: empty input");
  double s = 0.0;
  auto a = xhat.values();
  auto b = x.values();
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

namespace {

void softmax_rows(Matrix& logits) {
  for (std::size_t n = 0; n < logits.rows(); ++n) {
    auto r = logits.row(n);
    const double m = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double& v : r) {
      v = std::exp(v - m);
      z += v;
    }
    for (double& v : r) v /= z;
  }
}

Matrix standardize(const Matrix& x, const Matrix& mean, const Matrix& scale) {
  Matrix out = x;
  for (std::size_t n = 0; n < out.rows(); ++n) {
    auto r = out.row(n);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - mean(0, j)) / scale(0, j);
  }
  return out;
}

void require_labels(std::span<const int> labels, std::size_t rows, const char* what) {
  if (labels.size() != rows) {
    throw ContractError(std::string(what) + ": " + std::to_string(rows) + " rows but " +
                        std::to_string(labels.size()) + " labels");
  }
}

}  // namespace

Matrix ProbeModel::predict_proba(const Matrix& features) const {
  Matrix logits = matmul(standardize(features, feature_mean, feature_scale), weights);
  add_row_vector(logits, bias);
  softmax_rows(logits);
  return logits;
}

ProbeModel probe_fit(const Matrix& features, std::span<const int> labels, const ProbeConfig& cfg,
                     int class_count) {
  require_labels(labels, features.rows(), "probe_fit");
  if (labels.empty()) throw ContractError("probe_fit: no samples");
  int k = class_count;
  for (int l : labels) {
    if (l < 0) throw ContractError("probe_fit: negative label");
    if (class_count == 0) k = std::max(k, l + 1);
    else if (l >= class_count) throw ContractError("probe_fit: label >= class_count");
  }
  if (std::adjacent_find(labels.begin(), labels.end(), std::not_equal_to<>()) == labels.end()) {
    throw ContractError("probe_fit: degenerate labels, only one class present");
  }

  const std::size_t n = features.rows(), d = features.cols();
  const auto kk = static_cast<std::size_t>(k);
  ProbeModel model;
  model.feature_mean = column_sums(features) * (1.0 / static_cast<double>(n));
  model.feature_scale = Matrix(1, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = features(i, j) - model.feature_mean(0, j);
      model.feature_scale(0, j) += c * c;
    }
  }
  for (double& s : model.feature_scale.values()) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s < 1e-12) s = 1.0;  // constant column
  }
  const Matrix x = standardize(features, model.feature_mean, model.feature_scale);
  model.weights = Matrix(d, kk);
  model.bias = Matrix(1, kk);

  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    Matrix p = matmul(x, model.weights);
    add_row_vector(p, model.bias);
    softmax_rows(p);
    for (std::size_t i = 0; i < n; ++i) p(i, static_cast<std::size_t>(labels[i])) -= 1.0;
    p *= inv_n;
    Matrix gw = matmul_tn(x, p);
    gw += model.weights * cfg.l2;
    const Matrix gb = column_sums(p);
    model.weights -= gw * cfg.learning_rate;
    model.bias -= gb * cfg.learning_rate;
  }
  model.iterations = cfg.iterations;

  const Matrix p = model.predict_proba(features);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    loss -= std::log(std::max(p(i, static_cast<std::size_t>(labels[i])), 1e-300));
  double reg = 0.0;
  for (double w : model.weights.values()) reg += w * w;
  model.final_loss = loss * inv_n + 0.5 * cfg.l2 * reg;
  return model;
}

double expected_calibration_error(std::span<const double> confidence,
                                  std::span<const bool> correct, std::size_t bins) {
  if (confidence.size() != correct.size()) throw ContractError("ece: length mismatch");
  if (bins == 0) throw ContractError("ece: need at least one bin");
  if (confidence.empty()) return 0.0;
  std::vector<double> conf_sum(bins, 0.0), hits(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    const double c = confidence[i];
    // Bin b covers (b/B, (b+1)/B]; confidence 0 falls in bin 0.
    const double nb = static_cast<double>(bins);
    auto b = static_cast<std::size_t>(std::ceil(c * nb));
    b = b == 0 ? 0 : std::min(b - 1, bins - 1);
    // c * B can round across an edge; settle against the edges themselves.
    while (b > 0 && c <= static_cast<double>(b) / nb) --b;
    while (b + 1 < bins && c > static_cast<double>(b + 1) / nb) ++b;
    conf_sum[b] += c;
    hits[b] += correct[i] ? 1.0 : 0.0;
    ++count[b];
  }
  double ece = 0.0;
  const double n = static_cast<double>(confidence.size());
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double nb = static_cast<double>(count[b]);
    ece += (nb / n) * std::abs(hits[b] / nb - conf_sum[b] / nb);
  }
  return ece;
}

ProbeMetrics classification_metrics(const Matrix& probabilities, std::span<const int> labels,
                                    std::size_t ece_bins) {
  require_labels(labels, probabilities.rows(), "classification_metrics");
  if (labels.empty()) throw ContractError("classification_metrics: no samples");
  const std::size_t n = probabilities.rows(), k = probabilities.cols();
  ProbeMetrics m;
  std::vector<double> confidence(n);
  std::unique_ptr<bool[]> correct_buf(new bool[n]);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    if (labels[i] < 0 || y >= k) throw ContractError("classification_metrics: label out of range");
    auto p = probabilities.row(i);
    const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    const bool hit = best == y;
    m.accuracy += hit ? 1.0 : 0.0;
    m.nll -= std::log(std::max(p[y], std::numeric_limits<double>::min()));
    for (std::size_t c = 0; c < k; ++c) {
      const double t = c == y ? 1.0 : 0.0;
      m.brier += (p[c] - t) * (p[c] - t);
    }
    confidence[i] = p[best];
    correct_buf[i] = hit;
  }
  const double inv = 1.0 / static_cast<double>(n);
  m.accuracy *= inv;
  m.nll *= inv;
  m.brier *= inv;
  m.ece = expected_calibration_error(confidence, std::span<const bool>(correct_buf.get(), n),
                                     ece_bins);
  return m;
}

ProbeMetrics probe_metrics(const ProbeModel& model, const Matrix& features,
                           std::span<const int> labels, std::size_t ece_bins) {
  return classification_metrics(model.predict_proba(features), labels, ece_bins);
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

Matrix kmeanspp_seed(const Matrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows();
  Matrix centers(k, x.cols());
  const std::size_t first = rng.below(n);
  std::copy(x.row(first).begin(), x.row(first).end(), centers.row(0).begin());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), centers.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(n);
    }
    std::copy(x.row(pick).begin(), x.row(pick).end(), centers.row(c).begin());
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(x.row(i), centers.row(c)));
  }
  return centers;
}

double assign(const Matrix& x, const Matrix& centers, std::vector<int>& labels) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t c = 0; c < centers.rows(); ++c) {
      const double d = squared_distance(x.row(i), centers.row(c));
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    labels[i] = arg;
    inertia += best;
  }
  return inertia;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, Rng& rng, const KMeansConfig& cfg) {
  const std::size_t n = points.rows();
  if (k == 0 || n < k) {
    throw ContractError("kmeans: need 1 <= K <= N (K=" + std::to_string(k) +
                        ", N=" + std::to_string(n) + ")");
  }
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  const std::size_t restarts = std::max<std::size_t>(cfg.restarts, 1);
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng local = rng.derive("kmeans-restart", r);
    KMeansResult run;
    run.restart = r;
    run.centers = kmeanspp_seed(points, k, local);
    run.labels.assign(n, 0);
    double inertia = assign(points, run.centers, run.labels);
    run.inertia_trace.push_back(inertia);
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
      // Update step; an empty cluster keeps its previous center.
      Matrix sums(k, points.cols());
      std::vector<std::size_t> counts(k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(run.labels[i]);
        ++counts[c];
        auto s = sums.row(c);
        auto p = points.row(i);
        for (std::size_t j = 0; j < s.size(); ++j) s[j] += p[j];
      }
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        auto dst = run.centers.row(c);
        auto s = sums.row(c);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = s[j] / static_cast<double>(counts[c]);
      }
      const double next = assign(points, run.centers, run.labels);
      run.inertia_trace.push_back(next);
      const double change = inertia - next;
      inertia = next;
      if (change <= cfg.tolerance * std::max(inertia, std::numeric_limits<double>::min())) break;
    }
    run.inertia = inertia;
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

ContingencyTable contingency(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw ContractError("contingency: labelings have lengths " + std::to_string(a.size()) +
                        " and " + std::to_string(b.size()));
  }
  std::map<int, std::size_t> ia, ib;
  for (int v : a) ia.emplace(v, ia.size());
  for (int v : b) ib.emplace(v, ib.size());
  ContingencyTable t;
  t.counts.assign(ia.size(), std::vector<std::size_t>(ib.size(), 0));
  t.row_sums.assign(ia.size(), 0);
  t.col_sums.assign(ib.size(), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::size_t r = ia.at(a[i]), c = ib.at(b[i]);
    ++t.counts[r][c];
    ++t.row_sums[r];
    ++t.col_sums[c];
  }
  t.total = a.size();
  return t;
}

double nmi(std::span<const int> a, std::span<const int> b) {
  const ContingencyTable t = contingency(a, b);
  if (t.total == 0) throw ContractError("nmi: empty labelings");
  const double n = static_cast<double>(t.total);
  const auto entropy = [n](const std::vector<std::size_t>& sums) {
    double h = 0.0;
    for (std::size_t s : sums) {
      if (s == 0) continue;
      const double p = static_cast<double>(s) / n;
      h -= p * std::log(p);
    }
    return h;
  };
  const bool single_a = t.row_sums.size() == 1, single_b = t.col_sums.size() == 1;
  if (single_a && single_b) return 1.0;
  if (single_a || single_b) return 0.0;
  const double ha = entropy(t.row_sums), hb = entropy(t.col_sums);
  double mi = 0.0;
  for (std::size_t r = 0; r < t.counts.size(); ++r) {
    for (std::size_t c = 0; c < t.counts[r].size(); ++c) {
      const std::size_t nij = t.counts[r][c];
      if (nij == 0) continue;
      const double pij = static_cast<double>(nij) / n;
      mi += pij * std::log(static_cast<double>(nij) * n /
                           (static_cast<double>(t.row_sums[r]) * static_cast<double>(t.col_sums[c])));
    }
  }
  return std::max(0.0, mi) / std::sqrt(ha * hb);
}

double ari(std::span<const int> a, std::span<const int> b) {
  const ContingencyTable t = contingency(a, b);
  if (t.total == 0) throw ContractError("ari: empty labelings");
  const auto pairs = [](std::size_t m) {
    return static_cast<double>(m) * static_cast<double>(m > 0 ? m - 1 : 0) / 2.0;
  };
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& row : t.counts)
    for (std::size_t nij : row) index += pairs(nij);
  for (std::size_t s : t.row_sums) sum_a += pairs(s);
  for (std::size_t s : t.col_sums) sum_b += pairs(s);
  const double total = pairs(t.total);
  const double expected = total > 0.0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both single-cluster or both all-singletons
  return (index - expected) / (max_index - expected);
}

}  // namespace mvae
