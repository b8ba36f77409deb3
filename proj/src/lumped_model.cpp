#include "lumped_model.hpp"

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "errors.hpp"
#include "text_format.hpp"

namespace lumpfit::model {

double LumpedModelParams::capacitance() const { return std::exp(log_capacitance); }

std::vector<double> LumpedModelParams::flatten() const {
  std::vector<double> flat(heat_net.values);
  flat.push_back(log_capacitance);
  return flat;
}

void LumpedModelParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    fail(ErrorCode::dimension_mismatch, "model expects " + std::to_string(parameter_count()) +
                                            " parameters, got " + std::to_string(flat.size()));
  }
  std::copy(flat.begin(), flat.end() - 1, heat_net.values.begin());
  log_capacitance = flat.back();
}

void LumpedModelParams::validate() const {
  heat_net.validate();
  if (heat_net.inputs() != 2) fail(ErrorCode::dimension_mismatch, "heat network needs 2 inputs");
  if (!std::isfinite(log_capacitance)) fail(ErrorCode::invalid_argument, "log_capacitance not finite");
  if (!(h > 0.0)) fail(ErrorCode::invalid_argument, "h must be > 0");
  if (!(t0 > 0.0)) fail(ErrorCode::invalid_argument, "T0 must be > 0");
  if (!(p0 > 0.0)) fail(ErrorCode::invalid_argument, "P0 must be > 0");
  if (!std::isfinite(t_sink)) fail(ErrorCode::invalid_argument, "T_sink not finite");
}

LumpedModelParams make_model(const ModelDefaults& d, std::uint64_t seed) {
  LumpedModelParams p;
  p.heat_net = nn::init_glorot(d.heat_net_dims, d.q0, seed);
  p.log_capacitance = std::log(d.initial_capacitance);
  p.h = d.h;
  p.t_sink = d.t_sink;
  p.t0 = d.t0;
  p.p0 = d.p0;
  p.validate();
  return p;
}

double heat_input(const LumpedModelParams& params, double temperature, double power) {
  const double in[2] = {temperature / params.t0, power / params.p0};
  return nn::forward(params.heat_net, in);
}

double heat_loss(const LumpedModelParams& params, double temperature) {
  return params.h * (temperature - params.t_sink);
}

double rhs(const LumpedModelParams& params, double temperature, double t, const PowerSignal& power) {
  return (heat_input(params, temperature, power(t)) - heat_loss(params, temperature)) /
         params.capacitance();
}

void HeatBalanceRhs::eval(double t, std::span<const double> x, std::span<double> dxdt) const {
  const double temperature = x[0];
  const double in[2] = {temperature / params_.t0, power_(t) / params_.p0};
  const double q_in = nn::forward(params_.heat_net, in, ws_);
  dxdt[0] = (q_in - params_.h * (temperature - params_.t_sink)) / params_.capacitance();
}

void HeatBalanceRhs::vjp(double t, std::span<const double> x, std::span<const double> cot,
                         std::span<double> x_bar, std::span<double> p_bar) const {
  const double temperature = x[0];
  const double inv_c = 1.0 / params_.capacitance();
  const double in[2] = {temperature / params_.t0, power_(t) / params_.p0};
  double in_bar[2];
  const std::size_t n_net = params_.heat_net.parameter_count();
  const double q_in =
      nn::backward(params_.heat_net, in, cot[0] * inv_c, p_bar.first(n_net), in_bar, ws_);
  const double rate = (q_in - params_.h * (temperature - params_.t_sink)) * inv_c;
  x_bar[0] = in_bar[0] / params_.t0 - cot[0] * params_.h * inv_c;
  p_bar[n_net] += -cot[0] * rate;
}

double HeatBalanceRhs::rate_slope(double t, double temperature) const {
  const double in[2] = {temperature / params_.t0, power_(t) / params_.p0};
  double in_bar[2];
  nn::backward(params_.heat_net, in, 1.0, {}, in_bar, ws_);
  return (in_bar[0] / params_.t0 - params_.h) / params_.capacitance();
}

ode::Trajectory simulate(const LumpedModelParams& params, const PowerSignal& power,
                         double t_init, const ode::TimeGrid& grid, const ode::SolverConfig& config) {
  const HeatBalanceRhs f(params, power);
  const double x0[1] = {t_init};
  return ode::solve_on_grid(f.as_rhs(), x0, grid, config);
}

std::vector<SurfacePoint> heat_surface(const LumpedModelParams& params, double t_min, double t_max,
                                       double p_min, double p_max, std::size_t t_resolution,
                                       std::size_t p_resolution) {
  if (!(t_max >= t_min) || !(p_max >= p_min)) {
    fail(ErrorCode::invalid_argument, "surface ranges must be nonempty");
  }
  if (t_resolution == 0 || p_resolution == 0) {
    fail(ErrorCode::invalid_argument, "surface resolution must be >= 1");
  }
  auto node = [](double lo, double hi, std::size_t k, std::size_t n) {
    return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  };
  std::vector<SurfacePoint> out;
  out.reserve(t_resolution * p_resolution);
  nn::Workspace ws;
  for (std::size_t i = 0; i < t_resolution; ++i) {
    const double temperature = node(t_min, t_max, i, t_resolution);
    for (std::size_t k = 0; k < p_resolution; ++k) {
      const double power = node(p_min, p_max, k, p_resolution);
      const double in[2] = {temperature / params.t0, power / params.p0};
      out.push_back({temperature, power, nn::forward(params.heat_net, in, ws)});
    }
  }
  return out;
}

void write_surface_csv(std::ostream& os, std::span<const SurfacePoint> surface) {
  os << "temperature_C,power_W,heat_W\n";
  for (const auto& p : surface) {
    os << format_double(p.temperature) << ',' << format_double(p.power) << ','
       << format_double(p.heat) << '\n';
  }
}

void write_model(std::ostream& os, const LumpedModelParams& params) {
  os << "# lumpfit model\n";
  nn::write(os, params.heat_net);
  os << "log_capacitance=" << format_double(params.log_capacitance) << '\n'
     << "h=" << format_double(params.h) << '\n'
     << "T_sink=" << format_double(params.t_sink) << '\n'
     << "T0=" << format_double(params.t0) << '\n'
     << "P0=" << format_double(params.p0) << '\n'
     << "Q0=" << format_double(params.q0()) << '\n';
}

LumpedModelParams read_model(std::istream& is) {
  LumpedModelParams p;
  p.heat_net = nn::read(is);
  std::map<std::string, double> fields;
  std::string line;
  while (std::getline(is, line)) {
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) fail(ErrorCode::malformed_row, "expected key=value: " + line);
    const std::string key(trim(body.substr(0, eq)));
    fields[key] = parse_double(body.substr(eq + 1), key);
  }
  auto take = [&](const char* key) {
    const auto it = fields.find(key);
    if (it == fields.end()) fail(ErrorCode::malformed_row, std::string("model file lacks ") + key);
    return it->second;
  };
  p.log_capacitance = take("log_capacitance");
  p.h = take("h");
  p.t_sink = take("T_sink");
  p.t0 = take("T0");
  p.p0 = take("P0");
  if (take("Q0") != p.heat_net.output_scale) {
    fail(ErrorCode::malformed_row, "Q0 disagrees with the network output_scale");
  }
  p.validate();
  return p;
}

}  // namespace lumpfit::model
