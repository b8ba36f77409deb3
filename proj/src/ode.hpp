#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace lumpfit::ode {

/// Uniform collocation grid: t_j = t_start + j*dt, j = 0 .. n_points-1.
struct TimeGrid {
  double t_start = 0.0;
  double t_end = 0.0;
  double dt = 1.0;
  std::size_t n_points = 0;

  /// Validates and derives n_points = floor((t_end - t_start)/dt) + 1.
  static TimeGrid make(double t_start, double t_end, double dt);
  /// Grid with exactly `n_points` nodes spaced by dt.
  static TimeGrid with_points(double t_start, double dt, std::size_t n_points);

  double at(std::size_t j) const { return t_start + static_cast<double>(j) * dt; }
  double last() const { return at(n_points - 1); }
  std::vector<double> times() const;
};

enum class Method { fixed_rk4, adaptive_rk45 };

struct SolverConfig {
  Method method = Method::fixed_rk4;
  int substeps_per_interval = 5;
  double abs_tol = 1e-8;
  double rel_tol = 1e-6;
  std::size_t max_steps = 1'000'000;

  void validate() const;
};

/// dx/dt = f(t, x). Writes the rate into `dxdt` (same length as x).
using Rhs = std::function<void(double t, std::span<const double> x, std::span<double> dxdt)>;

/// Every classical RK4 substep taken by integrate_fixed, kept so the step
/// sequence can be replayed in reverse. Stage s of step n is evaluated at
/// (t[n] + c_s*h[n], stage_state(n, s)) and produced slope(n, s).
struct StageRecord {
  std::size_t dim = 0;
  std::vector<double> t;
  std::vector<double> h;
  std::vector<double> stage_states;  // steps x 4 x dim
  std::vector<double> slopes;        // steps x 4 x dim

  std::size_t steps() const { return t.size(); }
  std::span<const double> stage_state(std::size_t step, int stage) const {
    return {stage_states.data() + (step * 4 + stage) * dim, dim};
  }
  std::span<const double> slope(std::size_t step, int stage) const {
    return {slopes.data() + (step * 4 + stage) * dim, dim};
  }
};

struct Trajectory {
  std::size_t dim = 0;
  std::vector<double> times;   // node times
  std::vector<double> states;  // nodes x dim
  std::vector<double> rates;   // f at each node, used by Hermite dense output
  std::optional<TimeGrid> grid;
  int substeps_per_interval = 0;
  StageRecord stage_record;  // empty for adaptive solves

  std::size_t size() const { return times.size(); }
  std::span<const double> state(std::size_t j) const { return {states.data() + j * dim, dim}; }
  std::span<const double> rate(std::size_t j) const { return {rates.data() + j * dim, dim}; }
  /// First state component at every node.
  std::vector<double> component(std::size_t i = 0) const;
};

Trajectory integrate_fixed(const Rhs& rhs, std::span<const double> x0, const TimeGrid& grid,
                           const SolverConfig& config);

/// Dormand-Prince 5(4) with PI step control. Nodes are the accepted steps.
Trajectory integrate_adaptive(const Rhs& rhs, std::span<const double> x0, double t_start,
                              double t_end, const SolverConfig& config);

/// Values at arbitrary times; node times return stored states exactly,
/// anything in between uses cubic Hermite interpolation.
std::vector<std::vector<double>> sample_at(const Trajectory& traj, std::span<const double> times);

/// Convenience for scalar trajectories.
std::vector<double> sample_scalar(const Trajectory& traj, std::span<const double> times);

/// Integrate with whichever method the config selects and return the
/// solution at the nodes of `grid`.
Trajectory solve_on_grid(const Rhs& rhs, std::span<const double> x0, const TimeGrid& grid,
                         const SolverConfig& config);

}  // namespace lumpfit::ode
