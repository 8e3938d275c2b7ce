#include "mvae/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "mvae/error.hpp"
#include "mvae/objective.hpp"

namespace mvae {

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& b : blocks) w = std::max(w, b.max_relative_error);
  return w;
}

const BlockCheck& GradCheckReport::block(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw ContractError("GradCheckReport: no block named " + name);
}

GradCheckReport grad_check(const MlpParams& params, const Objective& objective, double tolerance,
                           double step) {
  GradBuffer analytic(params);
  objective(params, &analytic);

  GradCheckReport report;
  report.tolerance = tolerance;
  MlpParams probe = params;
  auto probe_blocks = probe.blocks();
  const auto grad_blocks = std::as_const(analytic).blocks();
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    auto values = probe_blocks[b].matrix->values();
    if (values.empty()) continue;
    BlockCheck check{std::string(probe_blocks[b].name), 0.0, 0.0, values.size()};
    const auto g = grad_blocks[b].matrix->values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = objective(probe, nullptr);
      values[i] = saved - step;
      const double down = objective(probe, nullptr);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = std::abs(g[i] - numeric);
      check.max_abs_error = std::max(check.max_abs_error, err);
      check.max_relative_error = std::max(check.max_relative_error, err / (std::abs(numeric) + 1e-8));
    }
    report.blocks.push_back(check);
  }
  report.passed = std::all_of(report.blocks.begin(), report.blocks.end(),
                              [&](const BlockCheck& c) { return c.max_relative_error < tolerance; });
  return report;
}

GradCheckReport grad_check_model(const ModelSpec& spec, const MlpParams& params, const Matrix& x,
                                 const Matrix& eps, double tolerance, double step) {
  params.check_shapes(spec);
  const Objective f = [&](const MlpParams& p, GradBuffer* grads) {
    ObjectiveResult r = negative_elbo(spec, p, x, eps, grads != nullptr);
    if (grads != nullptr) *grads = std::move(r.grads);
    return r.terms.objective;
  };
  return grad_check(params, f, tolerance, step);
}

}  // namespace mvae
