#include "ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "errors.hpp"

namespace lumpfit::ode {

namespace {

void check_finite(std::span<const double> v, double t) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      fail(ErrorCode::non_finite_state, "non-finite state or rate at t=" + std::to_string(t));
    }
  }
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
// 5th minus embedded 4th order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

double hermite(double x0, double f0, double x1, double f1, double h, double s) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * x0 + (s3 - 2 * s2 + s) * h * f0 + (-2 * s3 + 3 * s2) * x1 +
         (s3 - s2) * h * f1;
}

}  // namespace

TimeGrid TimeGrid::make(double t_start, double t_end, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) fail(ErrorCode::invalid_argument, "grid dt must be > 0");
  if (!(t_end > t_start)) fail(ErrorCode::invalid_argument, "grid needs t_end > t_start");
  const double span = (t_end - t_start) / dt;
  // Tolerate representation error so that [0, 1] with dt 0.1 has 11 nodes.
  const auto intervals = static_cast<std::size_t>(std::floor(span + 1e-9));
  return TimeGrid{t_start, t_end, dt, intervals + 1};
}

TimeGrid TimeGrid::with_points(double t_start, double dt, std::size_t n_points) {
  if (n_points < 2) fail(ErrorCode::invalid_argument, "grid needs at least 2 points");
  if (!(dt > 0.0)) fail(ErrorCode::invalid_argument, "grid dt must be > 0");
  return TimeGrid{t_start, t_start + static_cast<double>(n_points - 1) * dt, dt, n_points};
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> out(n_points);
  for (std::size_t j = 0; j < n_points; ++j) out[j] = at(j);
  return out;
}

void SolverConfig::validate() const {
  if (substeps_per_interval < 1) fail(ErrorCode::invalid_argument, "substeps must be >= 1");
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) {
    fail(ErrorCode::invalid_argument, "solver tolerances must be > 0");
  }
  if (max_steps == 0) fail(ErrorCode::invalid_argument, "max_steps must be > 0");
}

std::vector<double> Trajectory::component(std::size_t i) const {
  std::vector<double> out(size());
  for (std::size_t j = 0; j < size(); ++j) out[j] = states[j * dim + i];
  return out;
}

Trajectory integrate_fixed(const Rhs& rhs, std::span<const double> x0, const TimeGrid& grid,
                           const SolverConfig& config) {
  config.validate();
  if (grid.n_points < 1) fail(ErrorCode::invalid_argument, "empty grid");
  const std::size_t dim = x0.size();
  const int sub = config.substeps_per_interval;
  const std::size_t n_steps = (grid.n_points - 1) * static_cast<std::size_t>(sub);

  Trajectory traj;
  traj.dim = dim;
  traj.grid = grid;
  traj.substeps_per_interval = sub;
  traj.times = grid.times();
  traj.states.resize(grid.n_points * dim);
  traj.rates.resize(grid.n_points * dim);

  StageRecord& rec = traj.stage_record;
  rec.dim = dim;
  rec.t.resize(n_steps);
  rec.h.resize(n_steps);
  rec.stage_states.resize(n_steps * 4 * dim);
  rec.slopes.resize(n_steps * 4 * dim);

  std::vector<double> x(x0.begin(), x0.end());
  check_finite(x, grid.t_start);
  std::copy(x.begin(), x.end(), traj.states.begin());

  const double h = grid.dt / sub;
  std::size_t step = 0;
  for (std::size_t j = 0; j + 1 < grid.n_points; ++j) {
    const double t_node = grid.at(j);
    for (int s = 0; s < sub; ++s, ++step) {
      const double t = t_node + s * h;
      rec.t[step] = t;
      rec.h[step] = h;
      double* X = rec.stage_states.data() + step * 4 * dim;
      double* K = rec.slopes.data() + step * 4 * dim;
      double* X1 = X;
      double* X2 = X + dim;
      double* X3 = X + 2 * dim;
      double* X4 = X + 3 * dim;
      double* k1 = K;
      double* k2 = K + dim;
      double* k3 = K + 2 * dim;
      double* k4 = K + 3 * dim;

      std::copy(x.begin(), x.end(), X1);
      rhs(t, {X1, dim}, {k1, dim});
      check_finite({k1, dim}, t);
      for (std::size_t i = 0; i < dim; ++i) X2[i] = x[i] + 0.5 * h * k1[i];
      rhs(t + 0.5 * h, {X2, dim}, {k2, dim});
      check_finite({k2, dim}, t);
      for (std::size_t i = 0; i < dim; ++i) X3[i] = x[i] + 0.5 * h * k2[i];
      rhs(t + 0.5 * h, {X3, dim}, {k3, dim});
      check_finite({k3, dim}, t);
      for (std::size_t i = 0; i < dim; ++i) X4[i] = x[i] + h * k3[i];
      rhs(t + h, {X4, dim}, {k4, dim});
      check_finite({k4, dim}, t);

      if (s == 0) std::copy(k1, k1 + dim, traj.rates.begin() + j * dim);
      for (std::size_t i = 0; i < dim; ++i) {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      }
      check_finite(x, t + h);
    }
    std::copy(x.begin(), x.end(), traj.states.begin() + (j + 1) * dim);
  }
  // Rate at the final node for dense output.
  const std::size_t last = grid.n_points - 1;
  rhs(grid.at(last), traj.state(last), {traj.rates.data() + last * dim, dim});
  check_finite(traj.rate(last), grid.at(last));
  return traj;
}

Trajectory integrate_adaptive(const Rhs& rhs, std::span<const double> x0, double t_start,
                              double t_end, const SolverConfig& config) {
  config.validate();
  if (!(t_end > t_start)) fail(ErrorCode::invalid_argument, "adaptive solve needs t_end > t_start");
  const std::size_t dim = x0.size();
  const double atol = config.abs_tol;
  const double rtol = config.rel_tol;
  const double span = t_end - t_start;

  Trajectory traj;
  traj.dim = dim;

  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim);
  std::vector<double> tmp(dim), x_new(dim), err(dim);

  double t = t_start;
  check_finite(x, t);
  rhs(t, x, k1);
  check_finite(k1, t);

  auto push_node = [&](double tn, std::span<const double> xn, std::span<const double> fn) {
    traj.times.push_back(tn);
    traj.states.insert(traj.states.end(), xn.begin(), xn.end());
    traj.rates.insert(traj.rates.end(), fn.begin(), fn.end());
  };
  push_node(t, x, k1);

  auto scaled_norm = [&](std::span<const double> v, std::span<const double> ref) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double sc = atol + rtol * std::abs(ref[i]);
      acc += (v[i] / sc) * (v[i] / sc);
    }
    return dim ? std::sqrt(acc / static_cast<double>(dim)) : 0.0;
  };

  // Initial step (Hairer-Norsett-Wanner), except a vanishing rate takes the whole span.
  double h;
  {
    const double d0 = scaled_norm(x, x);
    const double d1 = scaled_norm(k1, x);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    for (std::size_t i = 0; i < dim; ++i) tmp[i] = x[i] + h0 * k1[i];
    rhs(t + h0, tmp, k2);
    check_finite(k2, t + h0);
    for (std::size_t i = 0; i < dim; ++i) err[i] = k2[i] - k1[i];
    const double d2 = scaled_norm(err, x) / h0;
    const double dmax = std::max(d1, d2);
    if (dmax <= 1e-15) {
      h = span;
    } else {
      const double h1 = std::pow(0.01 / dmax, 1.0 / 5.0);
      h = std::min(100.0 * h0, h1);
    }
    h = std::min(h, span);
  }

  constexpr double safety = 0.9;
  constexpr double fac_min = 0.2;
  constexpr double fac_max = 10.0;
  constexpr double beta = 0.04;
  constexpr double expo = 0.2 - 0.75 * beta;
  double err_old = 1e-4;
  bool last_rejected = false;
  std::size_t steps = 0;

  while (t < t_end) {
    if (++steps > config.max_steps) {
      fail(ErrorCode::step_limit_exceeded,
           "adaptive solver exceeded " + std::to_string(config.max_steps) + " steps");
    }
    if (t + h > t_end || t_end - (t + h) < 1e-12 * span) h = t_end - t;
    if (h <= 1e-14 * std::max(1.0, std::abs(t))) {
      fail(ErrorCode::non_finite_state, "adaptive step size underflow at t=" + std::to_string(t));
    }

    for (std::size_t i = 0; i < dim; ++i) tmp[i] = x[i] + h * a21 * k1[i];
    rhs(t + c2 * h, tmp, k2);
    for (std::size_t i = 0; i < dim; ++i) tmp[i] = x[i] + h * (a31 * k1[i] + a32 * k2[i]);
    rhs(t + c3 * h, tmp, k3);
    for (std::size_t i = 0; i < dim; ++i)
      tmp[i] = x[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs(t + c4 * h, tmp, k4);
    for (std::size_t i = 0; i < dim; ++i)
      tmp[i] = x[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs(t + c5 * h, tmp, k5);
    for (std::size_t i = 0; i < dim; ++i)
      tmp[i] = x[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    rhs(t + h, tmp, k6);
    for (std::size_t i = 0; i < dim; ++i)
      x_new[i] = x[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    rhs(t + h, x_new, k7);

    bool finite = true;
    for (std::size_t i = 0; i < dim; ++i) {
      err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      finite = finite && std::isfinite(x_new[i]) && std::isfinite(k7[i]) && std::isfinite(err[i]);
    }

    double err_norm;
    if (!finite) {
      err_norm = std::numeric_limits<double>::infinity();
    } else {
      double acc = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double sc = atol + rtol * std::max(std::abs(x[i]), std::abs(x_new[i]));
        acc += (err[i] / sc) * (err[i] / sc);
      }
      err_norm = dim ? std::sqrt(acc / static_cast<double>(dim)) : 0.0;
    }

    if (err_norm <= 1.0) {
      double fac = err_norm > 0.0
                       ? safety * std::pow(err_norm, -expo) * std::pow(err_old, beta)
                       : fac_max;
      fac = std::clamp(fac, fac_min, fac_max);
      if (last_rejected) fac = std::min(fac, 1.0);
      err_old = std::max(err_norm, 1e-4);
      t = (t_end - (t + h) <= 1e-12 * span) ? t_end : t + h;
      x.swap(x_new);
      k1.swap(k7);
      push_node(t, x, k1);
      h *= fac;
      last_rejected = false;
    } else {
      const double fac = std::isfinite(err_norm)
                             ? std::max(fac_min, safety * std::pow(err_norm, -expo))
                             : fac_min;
      h *= std::min(fac, 1.0);
      last_rejected = true;
    }
  }
  return traj;
}

std::vector<std::vector<double>> sample_at(const Trajectory& traj, std::span<const double> times) {
  if (traj.size() == 0) fail(ErrorCode::invalid_argument, "empty trajectory");
  const double t0 = traj.times.front();
  const double t1 = traj.times.back();
  const double slack = 1e-9 * std::max(1.0, t1 - t0);
  const std::size_t dim = traj.dim;
  std::vector<std::vector<double>> out;
  out.reserve(times.size());
  for (double t : times) {
    if (!(t >= t0 - slack && t <= t1 + slack)) {
      fail(ErrorCode::out_of_range, "sample time " + std::to_string(t) + " outside [" +
                                        std::to_string(t0) + ", " + std::to_string(t1) + "]");
    }
    auto it = std::lower_bound(traj.times.begin(), traj.times.end(), t);
    std::size_t k;
    if (it == traj.times.end()) {
      k = traj.size() - 1;
    } else {
      k = static_cast<std::size_t>(it - traj.times.begin());
    }
    std::vector<double> v(dim);
    if (traj.times[k] == t || (k == 0 && t <= t0) || (k == traj.size() - 1 && t >= t1)) {
      auto s = traj.state(k);
      std::copy(s.begin(), s.end(), v.begin());
    } else {
      const std::size_t a = k - 1;
      const double h = traj.times[k] - traj.times[a];
      const double s = (t - traj.times[a]) / h;
      for (std::size_t i = 0; i < dim; ++i) {
        v[i] = hermite(traj.states[a * dim + i], traj.rates[a * dim + i], traj.states[k * dim + i],
                       traj.rates[k * dim + i], h, s);
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<double> sample_scalar(const Trajectory& traj, std::span<const double> times) {
  auto all = sample_at(traj, times);
  std::vector<double> out(all.size());
  for (std::size_t j = 0; j < all.size(); ++j) out[j] = all[j].at(0);
  return out;
}

Trajectory solve_on_grid(const Rhs& rhs, std::span<const double> x0, const TimeGrid& grid,
                         const SolverConfig& config) {
  if (config.method == Method::fixed_rk4) return integrate_fixed(rhs, x0, grid, config);

  const Trajectory dense = integrate_adaptive(rhs, x0, grid.t_start, grid.last(), config);
  const std::vector<double> times = grid.times();
  const auto values = sample_at(dense, times);
  Trajectory out;
  out.dim = x0.size();
  out.grid = grid;
  out.times = times;
  out.states.reserve(times.size() * out.dim);
  out.rates.resize(times.size() * out.dim);
  for (std::size_t j = 0; j < times.size(); ++j) {
    out.states.insert(out.states.end(), values[j].begin(), values[j].end());
    rhs(times[j], values[j], {out.rates.data() + j * out.dim, out.dim});
  }
  return out;
}

}  // namespace lumpfit::ode
