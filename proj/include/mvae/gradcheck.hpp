#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mvae/network.hpp"

namespace mvae {

/// Scalar objective of the parameters. When grads is non-null the callee
/// also writes the analytic gradient into it.
using Objective = std::function<double(const MlpParams& params, GradBuffer* grads)>;

struct BlockCheck {
  std::string name;
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t entries = 0;
};

struct GradCheckReport {
  std::vector<BlockCheck> blocks;
  double tolerance = 0.0;
  bool passed = false;

  double worst() const;
  const BlockCheck& block(const std::string& name) const;
};

/// Compares the analytic gradient against central differences
/// (f(θ+h) - f(θ-h)) / 2h entry by entry, scoring
/// |analytic - numeric| / (|numeric| + 1e-8). Blocks with no entries are
/// skipped.
GradCheckReport grad_check(const MlpParams& params, const Objective& objective, double tolerance,
                           double step = 1e-4);

/// grad_check of the negative ELBO of a model on one batch with fixed noise.
/// Intended for toy problems (batch <= 16, d_z <= 8).
GradCheckReport grad_check_model(const ModelSpec& spec, const MlpParams& params, const Matrix& x,
                                 const Matrix& eps, double tolerance, double step = 1e-4);

}  // namespace mvae
