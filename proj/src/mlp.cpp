#include "mlp.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "errors.hpp"
#include "text_format.hpp"

namespace lumpfit::nn {

namespace {

// Keeps the scaled sigmoid strictly inside (0, scale) even where the logistic
// saturates to exactly 0 or 1 in double precision. Power of two so that a
// zero logit still maps to exactly half the scale.
constexpr double kOutputMargin = 0x1p-40;

double bounded_output(double logistic) {
  return kOutputMargin + (1.0 - 2.0 * kOutputMargin) * logistic;
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double swish(double x) { return x * sigmoid(x); }

double swish_derivative(double x) {
  const double s = sigmoid(x);
  return s + x * s * (1.0 - s);
}

std::size_t parameter_count(std::span<const std::size_t> dims) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) n += dims[l] * dims[l + 1] + dims[l + 1];
  return n;
}

MLPParams MLPParams::zeros(std::vector<std::size_t> dims, double scale) {
  if (dims.size() < 2) fail(ErrorCode::dimension_mismatch, "network needs at least 2 layers");
  MLPParams p;
  p.values.assign(nn::parameter_count(dims), 0.0);
  p.layer_dims = std::move(dims);
  p.output_scale = scale;
  p.validate();
  return p;
}

std::size_t MLPParams::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += layer_dims[l] * layer_dims[l + 1];
  return off;
}

std::size_t MLPParams::bias_offset(std::size_t layer) const {
  std::size_t off = weight_offset(layers());
  for (std::size_t l = 0; l < layer; ++l) off += layer_dims[l + 1];
  return off;
}

void MLPParams::validate() const {
  if (layer_dims.size() < 2) fail(ErrorCode::dimension_mismatch, "network needs at least 2 layers");
  for (std::size_t d : layer_dims) {
    if (d == 0) fail(ErrorCode::dimension_mismatch, "zero-width layer");
  }
  if (layer_dims.back() != 1) fail(ErrorCode::dimension_mismatch, "network output must be scalar");
  if (values.size() != nn::parameter_count(layer_dims)) {
    fail(ErrorCode::dimension_mismatch,
         "expected " + std::to_string(nn::parameter_count(layer_dims)) + " parameters, got " +
             std::to_string(values.size()));
  }
  if (!(output_scale > 0.0) || !std::isfinite(output_scale)) {
    fail(ErrorCode::invalid_argument, "output_scale must be positive");
  }
}

MLPParams init_glorot(std::vector<std::size_t> dims, double output_scale, std::uint64_t seed) {
  MLPParams p = MLPParams::zeros(std::move(dims), output_scale);
  p.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < p.layers(); ++l) {
    const double fan_in = static_cast<double>(p.layer_dims[l]);
    const double fan_out = static_cast<double>(p.layer_dims[l + 1]);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t off = p.weight_offset(l);
    const std::size_t n = p.layer_dims[l] * p.layer_dims[l + 1];
    for (std::size_t k = 0; k < n; ++k) p.values[off + k] = dist(rng);
  }
  return p;
}

void Workspace::prepare(const MLPParams& params) {
  const std::size_t n_layers = params.layer_dims.size();
  if (offsets_.size() == n_layers + 1 &&
      offsets_.back() == std::accumulate(params.layer_dims.begin(), params.layer_dims.end(),
                                         std::size_t{0})) {
    return;
  }
  offsets_.assign(n_layers + 1, 0);
  std::size_t widest = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    offsets_[l + 1] = offsets_[l] + params.layer_dims[l];
    widest = std::max(widest, params.layer_dims[l]);
  }
  pre_.assign(offsets_.back(), 0.0);
  act_.assign(offsets_.back(), 0.0);
  delta_.assign(widest, 0.0);
  delta_prev_.assign(widest, 0.0);
}

double forward(const MLPParams& params, std::span<const double> input, Workspace& ws) {
  if (input.size() != params.inputs()) {
    fail(ErrorCode::dimension_mismatch, "network expects " + std::to_string(params.inputs()) +
                                            " inputs, got " + std::to_string(input.size()));
  }
  ws.prepare(params);
  const auto& dims = params.layer_dims;
  const std::size_t n_layers = params.layers();
  std::copy(input.begin(), input.end(), ws.act_.begin());

  for (std::size_t l = 0; l < n_layers; ++l) {
    const double* w = params.values.data() + params.weight_offset(l);
    const double* b = params.values.data() + params.bias_offset(l);
    const double* a_in = ws.act_.data() + ws.offsets_[l];
    double* z = ws.pre_.data() + ws.offsets_[l + 1];
    double* a_out = ws.act_.data() + ws.offsets_[l + 1];
    const std::size_t n_in = dims[l];
    const std::size_t n_out = dims[l + 1];
    const bool hidden = l + 1 < n_layers;
    for (std::size_t i = 0; i < n_out; ++i) {
      double acc = b[i];
      for (std::size_t j = 0; j < n_in; ++j) acc += w[i * n_in + j] * a_in[j];
      z[i] = acc;
      a_out[i] = hidden ? swish(acc) : sigmoid(acc);
    }
  }
  return params.output_scale * bounded_output(ws.act_[ws.offsets_[n_layers]]);
}

double forward(const MLPParams& params, std::span<const double> input) {
  Workspace ws;
  return forward(params, input, ws);
}

double backward(const MLPParams& params, std::span<const double> input, double upstream,
                std::span<double> param_grad, std::span<double> input_grad, Workspace& ws) {
  if (!param_grad.empty() && param_grad.size() != params.parameter_count()) {
    fail(ErrorCode::dimension_mismatch, "parameter gradient buffer has wrong size");
  }
  if (!input_grad.empty() && input_grad.size() != params.inputs()) {
    fail(ErrorCode::dimension_mismatch, "input gradient buffer has wrong size");
  }
  const double output = forward(params, input, ws);
  const auto& dims = params.layer_dims;
  const std::size_t n_layers = params.layers();

  const double s = ws.act_[ws.offsets_[n_layers]];
  ws.delta_[0] = upstream * params.output_scale * (1.0 - 2.0 * kOutputMargin) * s * (1.0 - s);

  for (std::size_t l = n_layers; l-- > 0;) {
    const std::size_t n_in = dims[l];
    const std::size_t n_out = dims[l + 1];
    const double* w = params.values.data() + params.weight_offset(l);
    const double* a_in = ws.act_.data() + ws.offsets_[l];
    if (!param_grad.empty()) {
      double* gw = param_grad.data() + params.weight_offset(l);
      double* gb = param_grad.data() + params.bias_offset(l);
      for (std::size_t i = 0; i < n_out; ++i) {
        const double d = ws.delta_[i];
        gb[i] += d;
        for (std::size_t j = 0; j < n_in; ++j) gw[i * n_in + j] += d * a_in[j];
      }
    }
    if (l == 0 && input_grad.empty()) break;
    for (std::size_t j = 0; j < n_in; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n_out; ++i) acc += w[i * n_in + j] * ws.delta_[i];
      ws.delta_prev_[j] = l > 0 ? acc * swish_derivative(ws.pre_[ws.offsets_[l] + j]) : acc;
    }
    std::swap(ws.delta_, ws.delta_prev_);
  }
  if (!input_grad.empty()) {
    std::copy(ws.delta_.begin(), ws.delta_.begin() + static_cast<std::ptrdiff_t>(dims[0]),
              input_grad.begin());
  }
  return output;
}

BackwardResult backward(const MLPParams& params, std::span<const double> input, double upstream) {
  BackwardResult out;
  out.param_grad.assign(params.parameter_count(), 0.0);
  out.input_grad.assign(params.inputs(), 0.0);
  Workspace ws;
  backward(params, input, upstream, out.param_grad, out.input_grad, ws);
  return out;
}

void write(std::ostream& os, const MLPParams& params) {
  os << "mlp layer_dims=";
  for (std::size_t l = 0; l < params.layer_dims.size(); ++l) {
    os << (l ? "," : "") << params.layer_dims[l];
  }
  os << " output_scale=" << format_double(params.output_scale) << " seed=" << params.seed << '\n';
  for (double v : params.values) os << format_double(v) << '\n';
}

MLPParams read(std::istream& is) {
  std::string line;
  do {
    if (!std::getline(is, line)) fail(ErrorCode::malformed_row, "missing network header");
  } while (line.empty() || line[0] == '#');

  std::istringstream header(line);
  std::string tag;
  header >> tag;
  if (tag != "mlp") fail(ErrorCode::malformed_row, "expected 'mlp' header, got: " + line);

  MLPParams p;
  bool have_dims = false;
  bool have_scale = false;
  std::string field;
  while (header >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) fail(ErrorCode::malformed_row, "bad header field: " + field);
    const std::string key = field.substr(0, eq);
    const std::string val = field.substr(eq + 1);
    if (key == "layer_dims") {
      std::istringstream dims(val);
      std::string d;
      while (std::getline(dims, d, ',')) {
        p.layer_dims.push_back(static_cast<std::size_t>(parse_double(d, "layer_dims")));
      }
      have_dims = true;
    } else if (key == "output_scale") {
      p.output_scale = parse_double(val, "output_scale");
      have_scale = true;
    } else if (key == "seed") {
      p.seed = static_cast<std::uint64_t>(std::stoull(val));
    } else {
      fail(ErrorCode::malformed_row, "unknown header field: " + key);
    }
  }
  if (!have_dims || !have_scale) fail(ErrorCode::malformed_row, "network header incomplete");

  const std::size_t n = parameter_count(p.layer_dims);
  p.values.reserve(n);
  while (p.values.size() < n && std::getline(is, line)) {
    if (line.empty()) continue;
    p.values.push_back(parse_double(line, "network parameter"));
  }
  p.validate();
  return p;
}

}  // namespace lumpfit::nn
