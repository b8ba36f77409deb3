#include "loss.hpp"

#include <cmath>
#include <string>

#include "errors.hpp"

namespace lumpfit::training {

namespace {

void require_runs(std::span<const ExperimentRun> runs) {
  if (runs.empty()) fail(ErrorCode::invalid_argument, "loss needs at least one run");
}

/// Simulates one run; `residuals[j] = predicted_j - measured_j`.
ode::Trajectory run_residuals(const model::LumpedModelParams& params, const ExperimentRun& run,
                              const model::PowerSignal& power, const LossSpec& spec,
                              std::vector<double>& residuals) {
  auto traj = model::simulate(params, power, run.temperatures.front(), run.grid, spec.solver);
  residuals.resize(run.size());
  for (std::size_t j = 0; j < run.size(); ++j) residuals[j] = traj.states[j] - run.temperatures[j];
  return traj;
}

void require_stable_steps(const model::HeatBalanceRhs& rhs, const ode::Trajectory& traj,
                          double limit, const std::string& id) {
  if (!(limit > 0.0)) return;
  const auto& rec = traj.stage_record;
  for (std::size_t n = 0; n < rec.steps(); ++n) {
    const double z = rec.h[n] * rhs.rate_slope(rec.t[n], rec.stage_state(n, 0)[0]);
    if (!(std::abs(z) <= limit)) {
      fail(ErrorCode::non_finite_state,
           "run '" + id + "': step at t=" + std::to_string(rec.t[n]) +
               " is outside the RK4 stability region (h*df/dT = " + std::to_string(z) + ")");
    }
  }
}

double sum_squares(const std::vector<double>& r) {
  double acc = 0.0;
  for (double v : r) acc += v * v;
  return acc;
}

}  // namespace

LossBreakdown loss_breakdown(const model::LumpedModelParams& params,
                             std::span<const ExperimentRun> runs, const LossSpec& spec) {
  require_runs(runs);
  LossBreakdown out;
  std::vector<double> residuals;
  double total = 0.0;
  for (const auto& run : runs) {
    run.validate();
    const auto power = run.power_signal();
    run_residuals(params, run, power, spec, residuals);
    const double ss = sum_squares(residuals);
    out.per_run.push_back(ss);
    total += ss;
    out.points += run.size();
  }
  out.loss = total / static_cast<double>(runs.size());
  out.rmse = std::sqrt(total / static_cast<double>(out.points));
  return out;
}

double mse_loss(const model::LumpedModelParams& params, std::span<const ExperimentRun> runs,
                const LossSpec& spec) {
  return loss_breakdown(params, runs, spec).loss;
}

std::pair<double, adjoint::GradientVector> loss_and_gradient(
    const model::LumpedModelParams& params, std::span<const ExperimentRun> runs,
    const LossSpec& spec) {
  require_runs(runs);
  if (spec.solver.method != ode::Method::fixed_rk4) {
    fail(ErrorCode::invalid_argument, "gradients need the fixed-step solver");
  }
  const double inv_runs = 1.0 / static_cast<double>(runs.size());
  adjoint::GradientVector grad(params.parameter_count(), 0.0);
  std::vector<double> residuals;
  double total = 0.0;
  for (const auto& run : runs) {
    run.validate();
    const auto power = run.power_signal();
    const auto traj = run_residuals(params, run, power, spec, residuals);
    total += sum_squares(residuals);
    for (double& r : residuals) r *= 2.0 * inv_runs;
    const model::HeatBalanceRhs rhs(params, power);
    require_stable_steps(rhs, traj, spec.step_stability_limit, run.id);
    adjoint::reverse_sweep(rhs, traj, residuals, grad);
  }
  adjoint::require_finite(grad);
  return {total * inv_runs, std::move(grad)};
}

adjoint::GradientVector finite_difference_gradient(const model::LumpedModelParams& params,
                                                   std::span<const ExperimentRun> runs,
                                                   const LossSpec& spec, double eps) {
  model::LumpedModelParams probe = params;
  return adjoint::finite_difference_gradient(
      [&](std::span<const double> flat) {
        probe.assign(flat);
        return mse_loss(probe, runs, spec);
      },
      params.flatten(), eps);
}

}  // namespace lumpfit::training
