#include "adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "errors.hpp"

namespace lumpfit::adjoint {

ode::Rhs DifferentiableRhs::as_rhs() const {
  return [this](double t, std::span<const double> x, std::span<double> dxdt) { eval(t, x, dxdt); };
}

void reverse_sweep(const DifferentiableRhs& rhs, const ode::Trajectory& traj,
                   std::span<const double> node_cotangents, std::span<double> p_bar,
                   std::span<double> x0_bar) {
  const ode::StageRecord& rec = traj.stage_record;
  const std::size_t dim = traj.dim;
  const int sub = traj.substeps_per_interval;
  if (sub < 1 || rec.steps() != (traj.size() - 1) * static_cast<std::size_t>(sub)) {
    fail(ErrorCode::invalid_argument, "trajectory has no replayable fixed-step record");
  }
  if (node_cotangents.size() != traj.size() * dim) {
    fail(ErrorCode::dimension_mismatch, "one cotangent per trajectory node is required");
  }
  if (p_bar.size() != rhs.parameter_count()) {
    fail(ErrorCode::dimension_mismatch, "parameter gradient buffer has wrong size");
  }

  std::vector<double> lambda(node_cotangents.end() - static_cast<std::ptrdiff_t>(dim),
                             node_cotangents.end());
  std::vector<double> kb1(dim), kb2(dim), kb3(dim), kb4(dim), xb(dim), stage_bar(dim);

  for (std::size_t n = rec.steps(); n-- > 0;) {
    const double t = rec.t[n];
    const double h = rec.h[n];
    for (std::size_t i = 0; i < dim; ++i) {
      kb1[i] = h / 6.0 * lambda[i];
      kb2[i] = h / 3.0 * lambda[i];
      kb3[i] = h / 3.0 * lambda[i];
      kb4[i] = h / 6.0 * lambda[i];
      xb[i] = lambda[i];
    }
    // X4 = x + h k3
    rhs.vjp(t + h, rec.stage_state(n, 3), kb4, stage_bar, p_bar);
    for (std::size_t i = 0; i < dim; ++i) {
      xb[i] += stage_bar[i];
      kb3[i] += h * stage_bar[i];
    }
    // X3 = x + h/2 k2
    rhs.vjp(t + 0.5 * h, rec.stage_state(n, 2), kb3, stage_bar, p_bar);
    for (std::size_t i = 0; i < dim; ++i) {
      xb[i] += stage_bar[i];
      kb2[i] += 0.5 * h * stage_bar[i];
    }
    // X2 = x + h/2 k1
    rhs.vjp(t + 0.5 * h, rec.stage_state(n, 1), kb2, stage_bar, p_bar);
    for (std::size_t i = 0; i < dim; ++i) {
      xb[i] += stage_bar[i];
      kb1[i] += 0.5 * h * stage_bar[i];
    }
    // X1 = x
    rhs.vjp(t, rec.stage_state(n, 0), kb1, stage_bar, p_bar);
    for (std::size_t i = 0; i < dim; ++i) lambda[i] = xb[i] + stage_bar[i];

    if (n % static_cast<std::size_t>(sub) == 0) {
      const std::size_t node = n / static_cast<std::size_t>(sub);
      for (std::size_t i = 0; i < dim; ++i) lambda[i] += node_cotangents[node * dim + i];
    }
  }
  if (!x0_bar.empty()) {
    if (x0_bar.size() != dim) fail(ErrorCode::dimension_mismatch, "x0 gradient buffer size");
    std::copy(lambda.begin(), lambda.end(), x0_bar.begin());
  }
}

GradientVector finite_difference_gradient(const std::function<double(std::span<const double>)>& loss,
                                          std::span<const double> params, double eps) {
  if (!(eps > 0.0)) fail(ErrorCode::invalid_argument, "finite-difference step must be > 0");
  std::vector<double> p(params.begin(), params.end());
  GradientVector g(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double saved = p[k];
    p[k] = saved + eps;
    const double up = loss(p);
    p[k] = saved - eps;
    const double down = loss(p);
    p[k] = saved;
    g[k] = (up - down) / (2.0 * eps);
  }
  require_finite(g);
  return g;
}

void require_finite(std::span<const double> gradient) {
  for (std::size_t k = 0; k < gradient.size(); ++k) {
    if (!std::isfinite(gradient[k])) {
      fail(ErrorCode::non_finite_gradient, "gradient entry " + std::to_string(k) + " is not finite");
    }
  }
}

}  // namespace lumpfit::adjoint
