#include "run.hpp"

#include <cmath>

#include "errors.hpp"

namespace lumpfit {

void ExperimentRun::validate() const {
  if (temperatures.size() != grid.n_points || powers.size() != grid.n_points) {
    fail(ErrorCode::dimension_mismatch, "run '" + id + "': trace lengths do not match its grid");
  }
  if (grid.n_points < 2) fail(ErrorCode::empty_run, "run '" + id + "' has fewer than 2 samples");
  for (std::size_t k = 0; k < grid.n_points; ++k) {
    if (!std::isfinite(temperatures[k]) || !std::isfinite(powers[k])) {
      fail(ErrorCode::invalid_argument, "run '" + id + "' has non-finite samples");
    }
  }
}

model::PowerSignal ExperimentRun::power_signal() const { return {grid.times(), powers}; }

}  // namespace lumpfit
