#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace lumpfit::nn {

double sigmoid(double x);
double swish(double x);
double swish_derivative(double x);

/// Feed-forward network with swish hidden layers and a sigmoid output
/// scaled to the open interval (0, output_scale).
///
/// Parameters live in one flat vector in the canonical order: every weight
/// matrix layer by layer (row-major, rows = outputs), then every bias
/// vector layer by layer.
struct MLPParams {
  std::vector<std::size_t> layer_dims;
  std::vector<double> values;
  double output_scale = 1.0;
  std::uint64_t seed = 0;

  static MLPParams zeros(std::vector<std::size_t> layer_dims, double output_scale);

  std::size_t layers() const { return layer_dims.size() - 1; }
  std::size_t inputs() const { return layer_dims.front(); }
  std::size_t parameter_count() const { return values.size(); }

  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;
  double weight(std::size_t layer, std::size_t row, std::size_t col) const {
    return values[weight_offset(layer) + row * layer_dims[layer] + col];
  }
  double bias(std::size_t layer, std::size_t row) const {
    return values[bias_offset(layer) + row];
  }

  /// Throws DimensionMismatch when values/dims disagree or the scale is not positive.
  void validate() const;
};

std::size_t parameter_count(std::span<const std::size_t> layer_dims);

/// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
MLPParams init_glorot(std::vector<std::size_t> layer_dims, double output_scale, std::uint64_t seed);

/// Scratch buffers for one forward/backward pair. Reusable across calls.
class Workspace {
 public:
  void prepare(const MLPParams& params);

 private:
  friend double forward(const MLPParams&, std::span<const double>, Workspace&);
  friend double backward(const MLPParams&, std::span<const double>, double, std::span<double>,
                         std::span<double>, Workspace&);
  std::vector<std::size_t> offsets_;
  std::vector<double> pre_;
  std::vector<double> act_;
  std::vector<double> delta_;
  std::vector<double> delta_prev_;
};

double forward(const MLPParams& params, std::span<const double> input, Workspace& ws);
double forward(const MLPParams& params, std::span<const double> input);

/// Reverse pass for `upstream * d(forward)/d(.)`. Parameter partials are
/// accumulated into `param_grad` (canonical order); `input_grad` is
/// overwritten. Either span may be empty to skip it. Returns the forward
/// output at `input`.
double backward(const MLPParams& params, std::span<const double> input, double upstream,
              std::span<double> param_grad, std::span<double> input_grad, Workspace& ws);

struct BackwardResult {
  std::vector<double> param_grad;
  std::vector<double> input_grad;
};
BackwardResult backward(const MLPParams& params, std::span<const double> input, double upstream);

/// Header line `mlp layer_dims=a,b,c output_scale=S seed=N` then one value per line.
void write(std::ostream& os, const MLPParams& params);
MLPParams read(std::istream& is);

}  // namespace lumpfit::nn
