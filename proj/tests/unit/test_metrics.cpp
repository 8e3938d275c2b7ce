#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "mvae/error.hpp"
#include "mvae/metrics.hpp"

using namespace mvae;
using mvae::testing::ari_oracle;
using mvae::testing::ece_oracle;
using mvae::testing::nmi_oracle;
using mvae::testing::uniform_matrix;

namespace {

std::vector<int> random_labels(Rng& rng, std::size_t n, int k) {
  std::vector<int> v(n);
  for (int& l : v) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
  return v;
}

double ece_of(const std::vector<double>& conf, const std::vector<bool>& correct, std::size_t bins) {
  auto buf = std::make_unique<bool[]>(correct.size());
  std::copy(correct.begin(), correct.end(), buf.get());
  return expected_calibration_error(conf, std::span<const bool>(buf.get(), correct.size()), bins);
}

std::vector<int> relabel(const std::vector<int>& v, Rng& rng) {
  const auto perm = rng.permutation(64);
  std::vector<int> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<int>(perm[static_cast<std::size_t>(v[i])]);
  return out;
}

}  // namespace

TEST_CASE("mse_per_pixel") {
  Rng rng(1);
  const Matrix x = uniform_matrix(rng, 4, 6, 0.0, 1.0);
  CHECK(mse_per_pixel(x, x) == 0.0);
  CHECK(mse_per_pixel(x + Matrix(4, 6, 0.1), x) == doctest::Approx(0.01).epsilon(1e-12));
  const Matrix y = uniform_matrix(rng, 4, 6, 0.0, 1.0);
  double s = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) s += (x(i, j) - y(i, j)) * (x(i, j) - y(i, j));
  CHECK(std::abs(mse_per_pixel(x, y) - s / 24.0) < 1e-12);
  CHECK_THROWS_AS(mse_per_pixel(x, Matrix(4, 5)), ContractError);
}

TEST_CASE("nmi and ari against brute-force oracles") {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(49);
    const auto a = random_labels(rng, n, 1 + static_cast<int>(rng.below(6)));
    const auto b = random_labels(rng, n, 1 + static_cast<int>(rng.below(6)));
    CHECK(std::abs(nmi(a, b) - nmi_oracle(a, b)) < 1e-12);
    CHECK(std::abs(ari(a, b) - ari_oracle(a, b)) < 1e-12);
    // symmetry and relabeling invariance
    CHECK(std::abs(nmi(a, b) - nmi(b, a)) < 1e-12);
    CHECK(std::abs(ari(a, b) - ari(b, a)) < 1e-12);
    CHECK(std::abs(nmi(relabel(a, rng), relabel(b, rng)) - nmi(a, b)) < 1e-12);
    CHECK(std::abs(ari(relabel(a, rng), relabel(b, rng)) - ari(a, b)) < 1e-12);
  }
}

TEST_CASE("nmi and ari fixed cases") {
  const std::vector<int> a{0, 0, 1, 1, 2, 2};
  const std::vector<int> perm{2, 2, 0, 0, 1, 1};
  const std::vector<int> single(6, 0);
  CHECK(nmi(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ari(a, a) == 1.0);
  CHECK(ari(a, perm) == 1.0);
  CHECK(nmi(single, a) == 0.0);
  CHECK(nmi(single, single) == 1.0);
  CHECK(ari(single, single) == 1.0);
  Rng rng(3);
  const auto x = random_labels(rng, 40, 4);
  const auto y = random_labels(rng, 40, 3);
  CHECK(std::abs(nmi(x, y) - nmi_oracle(x, y)) < 1e-12);
  const auto u = random_labels(rng, 30, 3);
  const auto v = random_labels(rng, 30, 5);
  CHECK(std::abs(ari(u, v) - ari_oracle(u, v)) < 1e-12);
  CHECK_THROWS_AS(nmi(a, std::vector<int>{0, 1}), ContractError);
  CHECK_THROWS_AS(ari(a, std::vector<int>{0, 1}), ContractError);
}

TEST_CASE("contingency table marginals") {
  const std::vector<int> a{0, 1, 1, 2, 0};
  const std::vector<int> b{5, 5, 6, 6, 6};
  const auto t = contingency(a, b);
  std::size_t sum = 0;
  for (std::size_t r = 0; r < t.counts.size(); ++r) {
    std::size_t row = 0;
    for (std::size_t c : t.counts[r]) row += c;
    CHECK(row == t.row_sums[r]);
    sum += row;
  }
  CHECK(sum == 5);
  CHECK(t.total == 5);
}

TEST_CASE("ece against a re-binning oracle") {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(1000);
    std::vector<double> conf(n);
    std::vector<bool> correct(n);
    for (std::size_t i = 0; i < n; ++i) {
      // a quarter of the values sit exactly on bin edges
      conf[i] = rng.below(4) == 0 ? static_cast<double>(rng.below(16)) / 15.0 : rng.uniform();
      correct[i] = rng.below(2) == 1;
    }
    CHECK(std::abs(ece_of(conf, correct, 15) - ece_oracle(conf, correct, 15)) < 1e-12);
    CHECK(std::abs(ece_of(conf, correct, 7) - ece_oracle(conf, correct, 7)) < 1e-12);
  }
  CHECK(ece_of({0.8}, {false}, 15) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("classification metrics trivial cases") {
  SUBCASE("perfect one-hot predictions") {
    const Matrix p{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    const std::vector<int> y{0, 1, 2};
    const auto m = classification_metrics(p, y);
    CHECK(m.accuracy == 1.0);
    CHECK(m.nll == 0.0);
    CHECK(m.brier == 0.0);
    CHECK(m.ece == 0.0);
  }
  SUBCASE("uniform binary predictor") {
    const Matrix p{{0.5, 0.5}, {0.5, 0.5}};
    const std::vector<int> y{1, 1};
    const auto m = classification_metrics(p, y);
    CHECK(m.brier == 0.5);
    CHECK(m.nll == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  }
  SUBCASE("perturbing the truth makes Brier and NLL strictly worse") {
    Rng rng(5);
    const std::vector<int> y{0, 2, 1, 1};
    Matrix truth(4, 3);
    for (std::size_t i = 0; i < 4; ++i) truth(i, static_cast<std::size_t>(y[i])) = 1.0;
    const auto best = classification_metrics(truth, y);
    for (int t = 0; t < 50; ++t) {
      Matrix p = truth;
      const std::size_t i = rng.below(4);
      const double e = rng.uniform(1e-6, 0.3);
      const std::size_t other = (static_cast<std::size_t>(y[i]) + 1 + rng.below(2)) % 3;
      p(i, static_cast<std::size_t>(y[i])) -= e;
      p(i, other) += e;
      const auto m = classification_metrics(p, y);
      CHECK(m.brier > best.brier);
      CHECK(m.nll > best.nll);
    }
  }
}

TEST_CASE("probe") {
  SUBCASE("separable blobs") {
    Rng rng(6);
    Matrix x(400, 2);
    std::vector<int> y(400);
    for (std::size_t i = 0; i < 400; ++i) {
      y[i] = static_cast<int>(i % 4);
      x(i, 0) = (y[i] % 2 ? 5.0 : -5.0) + 0.5 * rng.normal();
      x(i, 1) = (y[i] / 2 ? 5.0 : -5.0) + 0.5 * rng.normal();
    }
    const auto model = probe_fit(x, y);
    CHECK(probe_metrics(model, x, y).accuracy >= 0.99);
    const Matrix p = model.predict_proba(x);
    for (std::size_t i = 0; i < p.rows(); ++i) {
      double s = 0.0;
      for (double v : p.row(i)) s += v;
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
    const auto again = probe_fit(x, y);
    CHECK(again.weights == model.weights);
    CHECK(again.bias == model.bias);
  }
  SUBCASE("random labels sit at chance") {
    Rng rng(7);
    const Matrix train_x = randn(rng, 2000, 3), test_x = randn(rng, 2000, 3);
    const auto train_y = random_labels(rng, 2000, 4), test_y = random_labels(rng, 2000, 4);
    const double acc = probe_metrics(probe_fit(train_x, train_y), test_x, test_y).accuracy;
    CHECK(std::abs(acc - 0.25) <= 0.05);
  }
  SUBCASE("one class") {
    CHECK_THROWS_AS(probe_fit(Matrix(5, 2), std::vector<int>(5, 1)), ContractError);
  }
}

TEST_CASE("kmeans") {
  SUBCASE("two far blobs") {
    Rng rng(8);
    Matrix x(60, 2);
    std::vector<int> truth(60);
    for (std::size_t i = 0; i < 60; ++i) {
      truth[i] = i < 30 ? 0 : 1;
      x(i, 0) = (i < 30 ? -20.0 : 20.0) + rng.normal();
      x(i, 1) = rng.normal();
    }
    Rng km(1);
    const auto r = kmeans(x, 2, km);
    CHECK(ari(r.labels, truth) == 1.0);
    for (std::size_t i = 1; i < r.inertia_trace.size(); ++i)
      CHECK(r.inertia_trace[i] <= r.inertia_trace[i - 1] * (1 + 1e-12));
    Rng km2(1);
    CHECK(kmeans(x, 2, km2).labels == r.labels);
  }
  SUBCASE("one cluster") {
    Rng rng(9);
    const auto r = kmeans(randn(rng, 20, 3), 1, rng);
    for (int l : r.labels) CHECK(l == 0);
  }
  SUBCASE("inertia never increases in any restart") {
    Rng rng(10);
    const Matrix x = randn(rng, 300, 4);
    for (std::uint64_t s = 0; s < 10; ++s) {
      Rng km(s);
      const auto r = kmeans(x, 6, km, KMeansConfig{1, 300, 1e-6});
      for (std::size_t i = 1; i < r.inertia_trace.size(); ++i)
        CHECK(r.inertia_trace[i] <= r.inertia_trace[i - 1] * (1 + 1e-12));
    }
  }
  SUBCASE("more clusters than points") {
    Rng rng(11);
    CHECK_THROWS_AS(kmeans(Matrix(3, 2), 4, rng), ContractError);
  }
}
