#include "power_signal.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"

namespace lumpfit::model {

PowerSignal::PowerSignal(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
  if (times_.empty()) fail(ErrorCode::empty_run, "power signal has no samples");
  if (times_.size() != values_.size()) {
    fail(ErrorCode::dimension_mismatch, "power signal times/values length mismatch");
  }
  for (std::size_t k = 0; k < times_.size(); ++k) {
    if (!std::isfinite(times_[k]) || !std::isfinite(values_[k])) {
      fail(ErrorCode::invalid_argument, "power signal contains non-finite samples");
    }
    if (k > 0 && !(times_[k] > times_[k - 1])) {
      fail(ErrorCode::non_monotone_time, "power signal times must be strictly increasing");
    }
  }
  if (times_.size() >= 2) {
    dt_ = (times_.back() - times_.front()) / static_cast<double>(times_.size() - 1);
    uniform_ = true;
    for (std::size_t k = 1; k < times_.size() && uniform_; ++k) {
      const double expected = times_.front() + static_cast<double>(k) * dt_;
      uniform_ = std::abs(times_[k] - expected) <= 1e-9 * std::max(1.0, std::abs(expected));
    }
  }
}

PowerSignal PowerSignal::constant(double watts) { return PowerSignal({0.0}, {watts}); }

double PowerSignal::operator()(double t) const {
  if (times_.size() == 1 || t <= times_.front()) return values_.front();
  if (t >= times_.back()) return values_.back();
  std::size_t k;
  if (uniform_) {
    k = static_cast<std::size_t>((t - times_.front()) / dt_);
    k = std::min(k, times_.size() - 2);
    // Guard against rounding placing t just outside [times_[k], times_[k+1]].
    if (t < times_[k] && k > 0) --k;
    if (t > times_[k + 1] && k + 2 < times_.size()) ++k;
  } else {
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    k = static_cast<std::size_t>(it - times_.begin()) - 1;
  }
  const double w = (t - times_[k]) / (times_[k + 1] - times_[k]);
  return values_[k] + w * (values_[k + 1] - values_[k]);
}

}  // namespace lumpfit::model
