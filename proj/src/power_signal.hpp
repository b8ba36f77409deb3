#pragma once

#include <vector>

namespace lumpfit::model {

/// Recorded or commanded power (W): piecewise-linear between samples,
/// boundary values held outside the sampled span.
class PowerSignal {
 public:
  PowerSignal(std::vector<double> times, std::vector<double> values);
  static PowerSignal constant(double watts);

  double operator()(double t) const;

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  bool uniform_ = false;
  double dt_ = 0.0;
};

}  // namespace lumpfit::model
