#include "control.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace lumpfit::control {

void ControlProblem::validate(double t_sink) const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(t_set) || !(t_set > t_sink)) {
    fail(ErrorCode::invalid_argument, "set temperature must exceed the sink temperature");
  }
  if (!finite(p_max) || !(p_max > 0.0)) fail(ErrorCode::invalid_argument, "p_max must be > 0");
  if (!finite(horizon) || !(horizon > 0.0)) fail(ErrorCode::invalid_argument, "horizon must be > 0");
  if (!finite(dt) || !(dt > 0.0) || dt > horizon) {
    fail(ErrorCode::invalid_argument, "collocation dt must be in (0, horizon]");
  }
  if (!finite(t_init)) fail(ErrorCode::invalid_argument, "t_init must be finite");
}

nn::MLPParams make_control_net(double p_max, std::uint64_t seed) {
  return nn::init_glorot({1, 5, 5, 1}, p_max, seed);
}

double power_profile(const nn::MLPParams& phi, double horizon, double t) {
  const double in[1] = {t / horizon};
  return nn::forward(phi, in);
}

void ControlledRhs::eval(double t, std::span<const double> x, std::span<double> dxdt) const {
  const double in_c[1] = {t / horizon_};
  const double p = nn::forward(phi_, in_c, ctrl_ws_);
  const double in_h[2] = {x[0] / model_.t0, p / model_.p0};
  const double q = nn::forward(model_.heat_net, in_h, heat_ws_);
  dxdt[0] = (q - model_.h * (x[0] - model_.t_sink)) / model_.capacitance();
}

void ControlledRhs::vjp(double t, std::span<const double> x, std::span<const double> cot,
                        std::span<double> x_bar, std::span<double> p_bar) const {
  const double inv_c = 1.0 / model_.capacitance();
  const double in_c[1] = {t / horizon_};
  const double p = nn::forward(phi_, in_c, ctrl_ws_);
  const double in_h[2] = {x[0] / model_.t0, p / model_.p0};
  double in_bar[2];
  nn::backward(model_.heat_net, in_h, cot[0] * inv_c, {}, in_bar, heat_ws_);
  x_bar[0] = in_bar[0] / model_.t0 - cot[0] * model_.h * inv_c;
  nn::backward(phi_, in_c, in_bar[1] / model_.p0, p_bar, {}, ctrl_ws_);
}

double tracking_loss(std::span<const double> temperatures, double t_set) {
  double acc = 0.0;
  for (double v : temperatures) acc += (t_set - v) * (t_set - v);
  return acc;
}

ode::Trajectory simulate_controlled(const model::LumpedModelParams& model, const nn::MLPParams& phi,
                                    const ControlProblem& problem, int substeps) {
  problem.validate(model.t_sink);
  const ControlledRhs f(model, phi, problem.horizon);
  ode::SolverConfig cfg;
  cfg.substeps_per_interval = substeps;
  const double x0[1] = {problem.t_init};
  return ode::solve_on_grid(f.as_rhs(), x0, problem.grid(), cfg);
}

double control_loss(const nn::MLPParams& phi, const model::LumpedModelParams& model,
                    const ControlProblem& problem, int substeps) {
  const auto traj = simulate_controlled(model, phi, problem, substeps);
  return tracking_loss(traj.states, problem.t_set);
}

std::pair<double, adjoint::GradientVector> control_loss_and_gradient(
    const nn::MLPParams& phi, const model::LumpedModelParams& model, const ControlProblem& problem,
    int substeps) {
  const auto traj = simulate_controlled(model, phi, problem, substeps);
  std::vector<double> cot(traj.states.size());
  for (std::size_t j = 0; j < cot.size(); ++j) cot[j] = 2.0 * (traj.states[j] - problem.t_set);
  adjoint::GradientVector grad(phi.parameter_count(), 0.0);
  const ControlledRhs f(model, phi, problem.horizon);
  adjoint::reverse_sweep(f, traj, cot, grad);
  adjoint::require_finite(grad);
  return {tracking_loss(traj.states, problem.t_set), std::move(grad)};
}

ControlResult synthesize_control(const model::LumpedModelParams& model, const ControlProblem& problem,
                                 const ControlConfig& config) {
  model.validate();
  problem.validate(model.t_sink);
  nn::MLPParams phi = make_control_net(problem.p_max, config.seed);
  nn::MLPParams probe = phi;

  optim::Objective objective = [&](std::span<const double> x, std::span<double> g) {
    std::copy(x.begin(), x.end(), probe.values.begin());
    auto [loss, grad] = control_loss_and_gradient(probe, model, problem, config.substeps);
    std::copy(grad.begin(), grad.end(), g.begin());
    return loss;
  };

  ControlResult result;
  optim::AdamOptions adam_opt;
  adam_opt.iterations = config.adam_epochs;
  adam_opt.learning_rate = config.adam_lr;
  const auto a = optim::adam(objective, phi.values, adam_opt, &result.history);
  optim::LbfgsOptions lb_opt;
  lb_opt.memory = config.lbfgs_memory;
  lb_opt.max_iterations = config.max_iters;
  lb_opt.rel_loss_tol = config.rel_loss_tol;
  const auto b = optim::lbfgs(objective, a.x, lb_opt, &result.history);

  phi.values = b.loss <= a.loss ? b.x : a.x;
  const auto traj = simulate_controlled(model, phi, problem, config.substeps);
  result.loss = tracking_loss(traj.states, problem.t_set);
  result.times = traj.times;
  result.temperature = traj.states;
  result.power.reserve(traj.times.size());
  for (double t : traj.times) result.power.push_back(power_profile(phi, problem.horizon, t));
  result.phi = std::move(phi);
  return result;
}

}  // namespace lumpfit::control
