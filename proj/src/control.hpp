#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adjoint.hpp"
#include "lumped_model.hpp"
#include "mlp.hpp"
#include "optim.hpp"

namespace lumpfit::control {

struct ControlProblem {
  double t_set = 700.0;
  double p_max = 4000.0;
  double horizon = 300.0;
  double t_init = 23.0;
  double dt = 1.0;

  /// Throws InvalidArgument. `t_sink` is the model's sink temperature.
  void validate(double t_sink) const;
  ode::TimeGrid grid() const { return ode::TimeGrid::make(0.0, horizon, dt); }
};

/// Time-to-power network: dims [1,5,5,1], output scaled to (0, p_max).
nn::MLPParams make_control_net(double p_max, std::uint64_t seed);

/// p_max * NN(t / horizon), strictly inside (0, p_max).
double power_profile(const nn::MLPParams& phi, double horizon, double t);

/// dT/dt of the frozen model with the power supplied by the control net.
/// Differentiable in the control net parameters only.
class ControlledRhs final : public adjoint::DifferentiableRhs {
 public:
  ControlledRhs(const model::LumpedModelParams& model, const nn::MLPParams& phi, double horizon)
      : model_(model), phi_(phi), horizon_(horizon) {}

  std::size_t state_dim() const override { return 1; }
  std::size_t parameter_count() const override { return phi_.parameter_count(); }
  void eval(double t, std::span<const double> x, std::span<double> dxdt) const override;
  void vjp(double t, std::span<const double> x, std::span<const double> cot,
           std::span<double> x_bar, std::span<double> p_bar) const override;

 private:
  const model::LumpedModelParams& model_;
  const nn::MLPParams& phi_;
  double horizon_;
  mutable nn::Workspace heat_ws_;
  mutable nn::Workspace ctrl_ws_;
  mutable std::vector<double> scratch_;
};

/// sum_j (t_set - T_j)^2 over the given samples.
double tracking_loss(std::span<const double> temperatures, double t_set);

ode::Trajectory simulate_controlled(const model::LumpedModelParams& model, const nn::MLPParams& phi,
                                    const ControlProblem& problem, int substeps = 5);

double control_loss(const nn::MLPParams& phi, const model::LumpedModelParams& model,
                    const ControlProblem& problem, int substeps = 5);

std::pair<double, adjoint::GradientVector> control_loss_and_gradient(
    const nn::MLPParams& phi, const model::LumpedModelParams& model, const ControlProblem& problem,
    int substeps = 5);

struct ControlConfig {
  int adam_epochs = 200;
  double adam_lr = 1e-3;
  int lbfgs_memory = 10;
  double rel_loss_tol = 1e-8;
  int max_iters = 500;
  int substeps = 5;
  std::uint64_t seed = 0;
};

struct ControlResult {
  nn::MLPParams phi;
  double loss = 0.0;
  std::vector<double> times;
  std::vector<double> power;        // profile on the collocation grid
  std::vector<double> temperature;  // predicted trajectory on the same grid
  std::vector<optim::HistoryEntry> history;
};

/// Adam then L-BFGS on the tracking loss. The model is read-only.
ControlResult synthesize_control(const model::LumpedModelParams& model, const ControlProblem& problem,
                                 const ControlConfig& config = {});

}  // namespace lumpfit::control
