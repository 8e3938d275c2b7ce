#include "mvae/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <json.hpp>

#include "mvae/error.hpp"
#include "mvae/objective.hpp"
#include "mvae/posterior.hpp"

namespace mvae {

const std::array<std::pair<std::string_view, Orientation>, MetricReport::kSize>&
MetricReport::schema() {
  static const std::array<std::pair<std::string_view, Orientation>, kSize> s{{
      {"mse_test", Orientation::lower},
      {"elbo_test", Orientation::higher},
      {"accuracy", Orientation::higher},
      {"nll", Orientation::lower},
      {"brier", Orientation::lower},
      {"ece", Orientation::lower},
      {"nmi", Orientation::higher},
      {"ari", Orientation::higher},
  }};
  return s;
}

MetricReport::MetricReport() {
  for (const auto& [name, o] : schema())
    metrics_.push_back({std::string(name), std::numeric_limits<double>::quiet_NaN(), o});
}

double& MetricReport::operator[](std::string_view name) {
  for (auto& m : metrics_)
    if (m.name == name) return m.value;
  throw ContractError("MetricReport: unknown metric '" + std::string(name) + "'");
}

double MetricReport::operator[](std::string_view name) const {
  return const_cast<MetricReport&>(*this)[name];
}

bool MetricReport::all_finite() const {
  for (const auto& m : metrics_)
    if (!std::isfinite(m.value)) return false;
  return true;
}

std::string MetricReport::csv_header() {
  std::string h;
  for (const auto& [name, o] : schema()) {
    if (!h.empty()) h += ',';
    h += name;
  }
  return h;
}

std::string MetricReport::csv_row() const {
  std::string row;
  char buf[64];
  for (const auto& m : metrics_) {
    if (!row.empty()) row += ',';
    if (std::isnan(m.value)) {
      row += "nan";
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", m.value);
      row += buf;
    }
  }
  return row;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& m : metrics_) {
    nlohmann::ordered_json entry;
    entry["value"] = std::isfinite(m.value) ? nlohmann::ordered_json(m.value) : nullptr;
    entry["orientation"] = m.orientation == Orientation::higher ? "higher" : "lower";
    j[m.name] = entry;
  }
  return j.dump(2);
}

bool MetricReport::wins(double a, double b, Orientation o) {
  if (std::isnan(a)) return false;
  if (std::isnan(b)) return true;
  return o == Orientation::higher ? a >= b : a <= b;
}

Matrix latent_codes(const ModelSpec& spec, const MlpParams& params, const Matrix& x) {
  const EncoderOutput enc = encode(params, x);
  return effective_mean(make_posterior(spec, params, enc));
}

Matrix reconstruct_mean(const ModelSpec& spec, const MlpParams& params, const Matrix& x) {
  return decode(params, latent_codes(spec, params, x), spec.likelihood).output;
}

Matrix reconstruct_sample(const ModelSpec& spec, const MlpParams& params, const Matrix& x,
                          Rng& rng) {
  const EncoderOutput enc = encode(params, x);
  const Matrix eps = randn(rng, x.rows(), params.latent());
  const Matrix z = reparameterize(make_posterior(spec, params, enc), eps);
  return decode(params, z, spec.likelihood).output;
}

double eval_elbo(const ModelSpec& spec, const MlpParams& params, const Matrix& x,
                 std::size_t n_samples, Rng& rng, std::size_t batch_size) {
  if (x.rows() == 0) throw ContractError("eval_elbo: empty data");
  if (batch_size == 0) throw ContractError("eval_elbo: batch_size must be positive");
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
  return -total / static_cast<double>(x.rows());
}

namespace {

Matrix batched(const Matrix& x, std::size_t batch_size,
               const std::function<Matrix(const Matrix&)>& fn) {
  Matrix out;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < x.rows(); start += batch_size) {
    const std::size_t end = std::min(x.rows(), start + batch_size);
    idx.resize(end - start);
    for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
    const Matrix part = fn(gather_rows(x, idx));
    if (out.empty()) out = Matrix(x.rows(), part.cols());
    for (std::size_t i = 0; i < part.rows(); ++i)
      std::copy(part.row(i).begin(), part.row(i).end(), out.row(start + i).begin());
  }
  return out;
}

}  // namespace

MetricReport evaluate_model(const ModelSpec& spec, const MlpParams& params,
                            const DatasetSplit& data, const EvalConfig& cfg) {
  params.check_shapes(spec);
  if (data.features.cols() != spec.input_dim) {
    throw ContractError("evaluate_model: dataset width " + std::to_string(data.features.cols()) +
                        " does not match model input " + std::to_string(spec.input_dim));
  }
  const Matrix train_x = data.features_of(Partition::train);
  const Matrix test_x = data.features_of(Partition::test);
  const std::vector<int> train_y = data.labels_of(Partition::train);
  const std::vector<int> test_y = data.labels_of(Partition::test);
  if (train_x.rows() == 0 || test_x.rows() == 0) {
    throw ContractError("evaluate_model: need nonempty train and test partitions");
  }
  const Rng root(cfg.seed);
  const std::size_t bs = std::max<std::size_t>(cfg.batch_size, 1);

  MetricReport report;
  const Matrix recon =
      batched(test_x, bs, [&](const Matrix& b) { return reconstruct_mean(spec, params, b); });
  report["mse_test"] = mse_per_pixel(recon, test_x);
  Rng elbo_rng = root.derive("eval-elbo");
  report["elbo_test"] = eval_elbo(spec, params, test_x, cfg.elbo_samples, elbo_rng, bs);

  const auto codes = [&](const Matrix& x) {
    return batched(x, bs, [&](const Matrix& b) { return latent_codes(spec, params, b); });
  };
  const Matrix train_codes = codes(train_x);
  const Matrix test_codes = codes(test_x);
  const ProbeModel probe = probe_fit(train_codes, train_y, cfg.probe, data.class_count);
  const ProbeMetrics pm = probe_metrics(probe, test_codes, test_y, cfg.ece_bins);
  report["accuracy"] = pm.accuracy;
  report["nll"] = pm.nll;
  report["brier"] = pm.brier;
  report["ece"] = pm.ece;

  Rng km_rng = root.derive("eval-kmeans");
  const std::size_t k =
      std::min<std::size_t>(static_cast<std::size_t>(data.class_count), test_codes.rows());
  KMeansConfig kc;
  kc.restarts = cfg.kmeans_restarts;
  const KMeansResult km = kmeans(test_codes, k, km_rng, kc);
  report["nmi"] = nmi(km.labels, test_y);
  report["ari"] = ari(km.labels, test_y);
  return report;
}

}  // namespace mvae
