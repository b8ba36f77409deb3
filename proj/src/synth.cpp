#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include "errors.hpp"
#include "ode.hpp"
#include "text_format.hpp"

namespace lumpfit::synth {

namespace {

std::mt19937_64 derived_stream(std::uint64_t seed, std::size_t index, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), tag};
  return std::mt19937_64(seq);
}

constexpr std::uint32_t kShapeTag = 0x5348;
constexpr std::uint32_t kNoiseTag = 0x4e4f;

}  // namespace

void GroundTruthSpec::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorCode::invalid_argument, std::string(name) + " must be > 0");
  };
  positive(c_true, "c_true");
  positive(h, "h");
  positive(efficiency, "efficiency");
  positive(t_ref, "t_ref");
  positive(dt, "dt");
  positive(ramp_min, "ramp_min");
  positive(duration_min, "duration_min");
  if (beta < 0.0) fail(ErrorCode::invalid_argument, "beta must be >= 0");
  if (noise_sigma < 0.0) fail(ErrorCode::invalid_argument, "noise_sigma must be >= 0");
  if (ramp_max < ramp_min || hold_max < hold_min || duration_max < duration_min) {
    fail(ErrorCode::invalid_argument, "synthetic ranges must have max >= min");
  }
  if (!(hold_min > 0.0)) fail(ErrorCode::invalid_argument, "hold_min must be > 0");
  if (!(steady_cap > t_sink)) fail(ErrorCode::invalid_argument, "steady_cap must exceed t_sink");
  if (beta > 0.0 && steady_cap >= t_ref / beta) {
    fail(ErrorCode::invalid_argument, "steady_cap must stay below t_ref/beta");
  }
  if (cooldown_min < 0.0 || cooldown_max < cooldown_min) {
    fail(ErrorCode::invalid_argument, "cooldown range must satisfy 0 <= min <= max");
  }
  if (cooldown_max > 0.0 && !(fall_s > 0.0 && cooldown_min >= fall_s)) {
    fail(ErrorCode::invalid_argument, "a cooldown must be at least as long as the fall");
  }
  if (ramp_max + cooldown_max >= duration_min) {
    fail(ErrorCode::invalid_argument, "ramp and cooldown must fit inside the run");
  }
}

double q_true(const GroundTruthSpec& spec, double temperature, double power) {
  return spec.efficiency * power * (1.0 - spec.beta * temperature / spec.t_ref);
}

double steady_temperature(const GroundTruthSpec& spec, double power) {
  const double gain = spec.efficiency * power;
  return (gain + spec.h * spec.t_sink) / (spec.h + gain * spec.beta / spec.t_ref);
}

double hold_power_cap(const GroundTruthSpec& spec) {
  return spec.h * (spec.steady_cap - spec.t_sink) /
         (spec.efficiency * (1.0 - spec.steady_cap * spec.beta / spec.t_ref));
}

double closed_form_linear(double t_init, double q_const, double capacitance, double h,
                          double t_sink, double t) {
  if (!(capacitance > 0.0) || !(h > 0.0)) {
    fail(ErrorCode::invalid_argument, "closed form needs C > 0 and h > 0");
  }
  const double t_ss = t_sink + q_const / h;
  return t_ss + (t_init - t_ss) * std::exp(-(h / capacitance) * t);
}

RunShape draw_shape(const GroundTruthSpec& spec, std::uint64_t seed, std::size_t index) {
  auto rng = derived_stream(seed, index, kShapeTag);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RunShape s;
  s.ramp_s = spec.ramp_min + (spec.ramp_max - spec.ramp_min) * u(rng);
  s.hold_w = spec.hold_min + (spec.hold_max - spec.hold_min) * u(rng);
  s.hold_w = std::min(s.hold_w, hold_power_cap(spec));
  // Whole number of samples so every run ends exactly on its grid.
  const double raw = spec.duration_min + (spec.duration_max - spec.duration_min) * u(rng);
  s.duration_s = std::round(raw / spec.dt) * spec.dt;
  if (spec.cooldown_max > 0.0) {
    const double tail = spec.cooldown_min + (spec.cooldown_max - spec.cooldown_min) * u(rng);
    s.cooldown_s = std::round(tail / spec.dt) * spec.dt;
    s.fall_s = spec.fall_s;
  }
  return s;
}

double shape_power(const RunShape& shape, double t) {
  if (t <= 0.0) return 0.0;
  if (shape.cooldown_s > 0.0 && t >= shape.off_time()) {
    const double into = t - shape.off_time();
    if (into >= shape.fall_s) return 0.0;
    return shape.hold_w * 0.5 * (1.0 + std::cos(std::numbers::pi * into / shape.fall_s));
  }
  if (t >= shape.ramp_s) return shape.hold_w;
  return shape.hold_w * t / shape.ramp_s;
}

ExperimentRun simulate_run(const GroundTruthSpec& spec, const RunShape& shape, std::string id) {
  spec.validate();
  const auto grid = ode::TimeGrid::make(0.0, shape.duration_s, spec.dt);
  ode::Rhs f = [&](double t, std::span<const double> x, std::span<double> dxdt) {
    const double p = shape_power(shape, t);
    dxdt[0] = (q_true(spec, x[0], p) - spec.h * (x[0] - spec.t_sink)) / spec.c_true;
  };
  ode::SolverConfig cfg;
  cfg.method = ode::Method::adaptive_rk45;
  cfg.rel_tol = 1e-10;
  cfg.abs_tol = 1e-10;
  // Integrate piece by piece so the solver never steps across a corner.
  std::vector<double> breaks{0.0, shape.ramp_s};
  if (shape.cooldown_s > 0.0) {
    breaks.push_back(shape.off_time());
    breaks.push_back(shape.off_time() + shape.fall_s);
  }
  breaks.push_back(shape.duration_s);
  std::vector<ode::Trajectory> pieces;
  double x[1] = {spec.t_sink};
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    if (!(breaks[k + 1] > breaks[k])) continue;
    pieces.push_back(ode::integrate_adaptive(f, x, breaks[k], breaks[k + 1], cfg));
    x[0] = pieces.back().states.back();
  }

  ExperimentRun run;
  run.id = std::move(id);
  run.grid = grid;
  run.temperatures.resize(grid.n_points);
  run.powers.resize(grid.n_points);
  std::size_t piece = 0;
  for (std::size_t j = 0; j < grid.n_points; ++j) {
    const double t = std::min(grid.at(j), pieces.back().times.back());
    while (piece + 1 < pieces.size() && t > pieces[piece].times.back()) ++piece;
    const double ts[1] = {t};
    run.temperatures[j] = ode::sample_scalar(pieces[piece], ts)[0];
    run.powers[j] = shape_power(shape, grid.at(j));
  }
  return run;
}

std::vector<ExperimentRun> generate_ensemble(const GroundTruthSpec& spec, std::size_t n_runs,
                                             std::uint64_t seed) {
  spec.validate();
  std::vector<ExperimentRun> runs;
  runs.reserve(n_runs);
  for (std::size_t i = 0; i < n_runs; ++i) {
    const RunShape shape = draw_shape(spec, seed, i);
    ExperimentRun run = simulate_run(spec, shape, "run" + std::to_string(i + 1));
    if (spec.noise_sigma > 0.0) {
      auto rng = derived_stream(seed, i, kNoiseTag);
      std::normal_distribution<double> noise(0.0, spec.noise_sigma);
      for (double& v : run.temperatures) v += noise(rng);
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

void write_spec(std::ostream& os, const GroundTruthSpec& s, std::uint64_t seed) {
  auto kv = [&](const char* k, double v) { os << k << " = " << format_double(v) << '\n'; };
  kv("c_true", s.c_true);
  kv("h", s.h);
  kv("t_sink", s.t_sink);
  kv("efficiency", s.efficiency);
  kv("beta", s.beta);
  kv("t_ref", s.t_ref);
  kv("noise_sigma", s.noise_sigma);
  kv("ramp_min", s.ramp_min);
  kv("ramp_max", s.ramp_max);
  kv("hold_min", s.hold_min);
  kv("hold_max", s.hold_max);
  kv("steady_cap", s.steady_cap);
  kv("duration_min", s.duration_min);
  kv("duration_max", s.duration_max);
  kv("cooldown_min", s.cooldown_min);
  kv("cooldown_max", s.cooldown_max);
  kv("fall_s", s.fall_s);
  kv("dt", s.dt);
  os << "seed = " << seed << '\n';
}

GroundTruthSpec read_spec(std::istream& is) {
  GroundTruthSpec s;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::malformed_row, "spec line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(body.substr(0, eq)));
    const auto value = body.substr(eq + 1);
    if (key == "seed") continue;  // provenance only
    double* slot = key == "c_true"         ? &s.c_true
                   : key == "h"            ? &s.h
                   : key == "t_sink"       ? &s.t_sink
                   : key == "efficiency"   ? &s.efficiency
                   : key == "beta"         ? &s.beta
                   : key == "t_ref"        ? &s.t_ref
                   : key == "noise_sigma"  ? &s.noise_sigma
                   : key == "ramp_min"     ? &s.ramp_min
                   : key == "ramp_max"     ? &s.ramp_max
                   : key == "hold_min"     ? &s.hold_min
                   : key == "hold_max"     ? &s.hold_max
                   : key == "steady_cap"   ? &s.steady_cap
                   : key == "duration_min" ? &s.duration_min
                   : key == "duration_max" ? &s.duration_max
                   : key == "cooldown_min" ? &s.cooldown_min
                   : key == "cooldown_max" ? &s.cooldown_max
                   : key == "fall_s"       ? &s.fall_s
                   : key == "dt"           ? &s.dt
                                           : nullptr;
    if (!slot) {
      fail(ErrorCode::malformed_row, "spec line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    *slot = parse_double(value, key);
  }
  s.validate();
  return s;
}

}  // namespace lumpfit::synth
