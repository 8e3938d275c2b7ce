#pragma once

#include <filesystem>
#include <string>

#include "mvae/matrix.hpp"
#include "mvae/network.hpp"
#include "mvae/rng.hpp"

namespace mvae::testing {

/// Fresh, empty scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::path(MVAE_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Matrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0,
                             double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

/// Random parameters with nonzero biases and a perturbed coupling matrix
/// C = I + scale * noise, so no gradient block is trivially zero.
inline MlpParams random_params(const ModelSpec& spec, std::uint64_t seed,
                               double coupling_noise = 0.3) {
  Rng rng(seed);
  MlpParams p = MlpParams::initialize(spec, rng);
  for (auto b : p.blocks()) {
    if (b.role == BlockRole::bias) {
      for (double& v : b.matrix->values()) v = rng.uniform(-0.2, 0.2);
    }
  }
  for (double& v : p.coupling.values()) v += coupling_noise * rng.normal();
  return p;
}

/// Values of a 1 x n or n x 1 matrix.
inline std::vector<double> flat(const Matrix& m) { return {m.values().begin(), m.values().end()}; }

}  // namespace mvae::testing
