#pragma once

#include <span>
#include <utility>
#include <vector>

#include "adjoint.hpp"
#include "lumped_model.hpp"
#include "run.hpp"

namespace lumpfit::training {

/// Solver settings for evaluating the identification loss. The gradient
/// path requires the fixed-step method.
struct LossSpec {
  ode::SolverConfig solver{};
  /// loss_and_gradient rejects parameters for which some fixed step has
  /// |h * d(dT/dt)/dT| above this bound, checked at the start of every step.
  /// Classical RK4 is stable on the real axis up to about 2.785. 0 disables.
  double step_stability_limit = 2.785;
};

struct LossBreakdown {
  double loss = 0.0;           // (1/N_runs) sum_runs sum_points residual^2
  double rmse = 0.0;           // sqrt(sum residual^2 / total points)
  std::size_t points = 0;
  std::vector<double> per_run; // sum of squared residuals per run
};

/// Each run is simulated from its first temperature sample under its own
/// recorded power, and compared at every grid node.
LossBreakdown loss_breakdown(const model::LumpedModelParams& params,
                             std::span<const ExperimentRun> runs, const LossSpec& spec = {});

double mse_loss(const model::LumpedModelParams& params, std::span<const ExperimentRun> runs,
                const LossSpec& spec = {});

/// Loss plus its exact derivative through the discretized solve, with
/// respect to (heat network weights, log C). Throws NonFiniteGradient, and
/// NonFiniteState when a step leaves the stability limit.
std::pair<double, adjoint::GradientVector> loss_and_gradient(
    const model::LumpedModelParams& params, std::span<const ExperimentRun> runs,
    const LossSpec& spec = {});

/// Central-difference counterpart of loss_and_gradient.
adjoint::GradientVector finite_difference_gradient(const model::LumpedModelParams& params,
                                                   std::span<const ExperimentRun> runs,
                                                   const LossSpec& spec = {}, double eps = 1e-4);

}  // namespace lumpfit::training
