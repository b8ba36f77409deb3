#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "run.hpp"

namespace lumpfit::synth {

/// Known lumped model used as ground truth:
///   C dT/dt = Q_true(T, P) - h (T - T_sink),
///   Q_true(T, P) = efficiency * P * (1 - beta * T / t_ref).
/// Power rises linearly from zero over the ramp time and then holds. An
/// optional tail switches the power off with a half-cosine fall and lets
/// the run cool for the rest of the record.
struct GroundTruthSpec {
  double c_true = 4.0;
  double h = 1.0;
  double t_sink = 23.0;
  double efficiency = 0.8;
  double beta = 0.3;
  double t_ref = 1000.0;
  double noise_sigma = 2.0;
  double ramp_min = 30.0;
  double ramp_max = 90.0;
  double hold_min = 900.0;
  double hold_max = 1500.0;
  /// Hold levels are capped where the steady temperature would exceed this.
  double steady_cap = 900.0;
  double duration_min = 200.0;
  double duration_max = 400.0;
  /// Length of the power-off tail, fall included; 0 disables it.
  double cooldown_min = 60.0;
  double cooldown_max = 90.0;
  double fall_s = 10.0;
  double dt = 0.1;

  void validate() const;
};

double q_true(const GroundTruthSpec& spec, double temperature, double power);

/// Steady temperature under constant power: solves Q_true(T, P) = h (T - T_sink).
double steady_temperature(const GroundTruthSpec& spec, double power);

/// Largest power whose steady temperature does not exceed `spec.steady_cap`.
double hold_power_cap(const GroundTruthSpec& spec);

/// T_ss + (T_init - T_ss) exp(-(h/C) t), T_ss = T_sink + Q/h.
double closed_form_linear(double t_init, double q_const, double capacitance, double h,
                          double t_sink, double t);

struct RunShape {
  double ramp_s;
  double hold_w;
  double duration_s;
  double cooldown_s = 0.0;
  double fall_s = 10.0;

  double off_time() const { return duration_s - cooldown_s; }
};

/// Profile parameters for run `index` of the ensemble with `seed`.
RunShape draw_shape(const GroundTruthSpec& spec, std::uint64_t seed, std::size_t index);

double shape_power(const RunShape& shape, double t);

/// Noise-free temperature trace of one run at the spec's sampling interval.
ExperimentRun simulate_run(const GroundTruthSpec& spec, const RunShape& shape, std::string id);

/// `n_runs` runs started at T_sink, sampled every spec.dt, Gaussian noise on
/// temperature only. Run i draws from a stream derived from (seed, i).
std::vector<ExperimentRun> generate_ensemble(const GroundTruthSpec& spec, std::size_t n_runs,
                                             std::uint64_t seed);

/// Plain `key = value` lines.
void write_spec(std::ostream& os, const GroundTruthSpec& spec, std::uint64_t seed);
GroundTruthSpec read_spec(std::istream& is);

}  // namespace lumpfit::synth
