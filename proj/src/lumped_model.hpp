#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "adjoint.hpp"
#include "mlp.hpp"
#include "ode.hpp"
#include "power_signal.hpp"

namespace lumpfit::model {

/// Learnable heat balance
///   C dT/dt = Q0 * NN(T/T0, P/P0) - h (T - T_sink),  C = exp(log_capacitance).
/// Learnable parameters are the heat network weights followed by
/// log_capacitance; h, T_sink and the scales stay fixed.
struct LumpedModelParams {
  nn::MLPParams heat_net;  // dims [2,10,1], output_scale = Q0
  double log_capacitance = 0.0;
  double h = 1.0;
  double t_sink = 23.0;
  double t0 = 1000.0;
  double p0 = 4000.0;

  double q0() const { return heat_net.output_scale; }
  double capacitance() const;
  std::size_t parameter_count() const { return heat_net.parameter_count() + 1; }

  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  void validate() const;
};

struct ModelDefaults {
  double h = 1.0;
  double t_sink = 23.0;
  double t0 = 1000.0;
  double p0 = 4000.0;
  double q0 = 4000.0;
  double initial_capacitance = 1.0;
  std::vector<std::size_t> heat_net_dims{2, 10, 1};
};

LumpedModelParams make_model(const ModelDefaults& defaults, std::uint64_t seed);

double heat_input(const LumpedModelParams& params, double temperature, double power);
double heat_loss(const LumpedModelParams& params, double temperature);
double rhs(const LumpedModelParams& params, double temperature, double t, const PowerSignal& power);

/// dT/dt under a recorded power signal, differentiable in (theta, log C).
class HeatBalanceRhs final : public adjoint::DifferentiableRhs {
 public:
  HeatBalanceRhs(const LumpedModelParams& params, const PowerSignal& power)
      : params_(params), power_(power) {}

  std::size_t state_dim() const override { return 1; }
  std::size_t parameter_count() const override { return params_.parameter_count(); }
  void eval(double t, std::span<const double> x, std::span<double> dxdt) const override;
  void vjp(double t, std::span<const double> x, std::span<const double> cot,
           std::span<double> x_bar, std::span<double> p_bar) const override;
  /// d(dT/dt)/dT at (t, temperature).
  double rate_slope(double t, double temperature) const;

 private:
  const LumpedModelParams& params_;
  const PowerSignal& power_;
  mutable nn::Workspace ws_;
};

ode::Trajectory simulate(const LumpedModelParams& params, const PowerSignal& power,
                         double t_init, const ode::TimeGrid& grid, const ode::SolverConfig& config);

struct SurfacePoint {
  double temperature;
  double power;
  double heat;
};

/// heat_input on a temperature x power lattice, temperature as the outer loop.
/// A resolution of 1 samples the lower end of that range.
std::vector<SurfacePoint> heat_surface(const LumpedModelParams& params, double t_min, double t_max,
                                       double p_min, double p_max, std::size_t t_resolution,
                                       std::size_t p_resolution);

void write_surface_csv(std::ostream& os, std::span<const SurfacePoint> surface);

/// Network block followed by `key=value` lines for the physical constants.
void write_model(std::ostream& os, const LumpedModelParams& params);
LumpedModelParams read_model(std::istream& is);

}  // namespace lumpfit::model
