#pragma once

#include <string>
#include <vector>

#include "ode.hpp"
#include "power_signal.hpp"

namespace lumpfit {

/// One plunge/dwell record on a uniform grid: temperature (C) and power (W)
/// at every grid node.
struct ExperimentRun {
  std::string id;
  ode::TimeGrid grid;
  std::vector<double> temperatures;
  std::vector<double> powers;

  std::size_t size() const { return temperatures.size(); }
  void validate() const;
  model::PowerSignal power_signal() const;
};

}  // namespace lumpfit
