#include <cmath>
#include <vector>

#include "doctest.h"
#include "ode.hpp"
#include "test_util.hpp"

using namespace lumpfit;
using namespace lumpfit::ode;

namespace {

Rhs decay() {
  return [](double, std::span<const double> x, std::span<double> d) { d[0] = -x[0]; };
}

SolverConfig rk4(int substeps) {
  SolverConfig c;
  c.substeps_per_interval = substeps;
  return c;
}

SolverConfig dopri(double tol) {
  SolverConfig c;
  c.method = Method::adaptive_rk45;
  c.abs_tol = tol;
  c.rel_tol = tol;
  return c;
}

// C dT/dt = 677 - (T - 23) with C = 4.
Rhs linear_lumped() {
  return [](double, std::span<const double> x, std::span<double> d) {
    d[0] = (677.0 - (x[0] - 23.0)) / 4.0;
  };
}

double linear_exact(double t) { return 700.0 - 677.0 * std::exp(-t / 4.0); }

double rk4_decay_error(double dt) {
  const double x0[1] = {1.0};
  const auto traj = integrate_fixed(decay(), x0, TimeGrid::make(0.0, 1.0, dt), rk4(1));
  return std::abs(traj.states.back() - std::exp(-1.0));
}

}  // namespace

TEST_CASE("grid point count") {
  CHECK(TimeGrid::make(0.0, 1.0, 0.1).n_points == 11);
  CHECK(TimeGrid::make(0.0, 300.0, 1.0).n_points == 301);
  CHECK(TimeGrid::with_points(5.0, 0.5, 4).last() == doctest::Approx(6.5));
  CHECK_ERROR_CODE(TimeGrid::make(0.0, 1.0, 0.0), ErrorCode::invalid_argument);
  CHECK_ERROR_CODE(TimeGrid::make(1.0, 1.0, 0.1), ErrorCode::invalid_argument);
}

TEST_CASE("zero rate keeps the state") {
  const Rhs zero = [](double, std::span<const double>, std::span<double> d) { d[0] = 0.0; };
  const double x0[1] = {23.0};
  const auto fixed = integrate_fixed(zero, x0, TimeGrid::make(0.0, 10.0, 1.0), rk4(5));
  for (double v : fixed.states) CHECK(v == 23.0);

  const auto adaptive = integrate_adaptive(zero, x0, 0.0, 10.0, dopri(1e-8));
  for (double v : adaptive.states) CHECK(v == 23.0);
  CHECK(adaptive.size() == 2);
}

TEST_CASE("unit rate lands on node times") {
  const Rhs one = [](double, std::span<const double>, std::span<double> d) { d[0] = 1.0; };
  const double x0[1] = {0.0};
  const auto traj = integrate_fixed(one, x0, TimeGrid::make(0.0, 10.0, 1.0), rk4(3));
  for (std::size_t j = 0; j < traj.size(); ++j) {
    CHECK(traj.states[j] == doctest::Approx(static_cast<double>(j)).epsilon(1e-14));
  }
}

TEST_CASE("rk4 exponential decay accuracy and order") {
  const double x0[1] = {1.0};
  const auto traj = integrate_fixed(decay(), x0, TimeGrid::make(0.0, 1.0, 0.1), SolverConfig{});
  CHECK(std::abs(traj.states.back() - std::exp(-1.0)) < 1e-7);
  const double e1 = rk4_decay_error(0.2);
  const double e2 = rk4_decay_error(0.1);
  const double e3 = rk4_decay_error(0.05);
  CHECK(e1 / e2 >= 12.0);
  CHECK(e2 / e3 >= 12.0);
}

TEST_CASE("substeps refine the fixed-step solution") {
  const double x0[1] = {1.0};
  const auto grid = TimeGrid::make(0.0, 1.0, 0.2);
  const auto coarse = integrate_fixed(decay(), x0, grid, rk4(1));
  const auto fine = integrate_fixed(decay(), x0, grid, rk4(4));
  CHECK(fine.size() == grid.n_points);
  CHECK(std::abs(fine.states.back() - std::exp(-1.0)) <
        std::abs(coarse.states.back() - std::exp(-1.0)));
  CHECK(fine.stage_record.steps() == 4 * (grid.n_points - 1));
}

TEST_CASE("adaptive decay and lumped closed form") {
  const double x0[1] = {1.0};
  const auto traj = integrate_adaptive(decay(), x0, 0.0, 1.0, dopri(1e-8));
  CHECK(std::abs(traj.states.back() - std::exp(-1.0)) < 1e-7);
  CHECK(traj.times.back() == 1.0);

  const double t0[1] = {23.0};
  const auto lumped = integrate_adaptive(linear_lumped(), t0, 0.0, 4.0, dopri(1e-10));
  CHECK(std::abs(lumped.states.back() - (700.0 - 677.0 * std::exp(-1.0))) < 1e-5);
  CHECK(lumped.states.back() == doctest::Approx(450.95).epsilon(1e-4));
}

TEST_CASE("adaptive and fixed agree on the linear model") {
  const double t0[1] = {23.0};
  const auto grid = TimeGrid::make(0.0, 20.0, 0.01);
  const auto fixed = integrate_fixed(linear_lumped(), t0, grid, rk4(1));
  const auto adaptive = integrate_adaptive(linear_lumped(), t0, 0.0, 20.0, dopri(1e-10));
  const auto times = grid.times();
  const auto sampled = sample_scalar(adaptive, times);
  for (std::size_t j = 0; j < times.size(); j += 50) {
    CHECK(std::abs(sampled[j] - fixed.states[j]) < 1e-5);
    CHECK(std::abs(fixed.states[j] - linear_exact(times[j])) < 1e-5);
  }
}

TEST_CASE("solve_on_grid returns grid nodes for both methods") {
  const double t0[1] = {23.0};
  const auto grid = TimeGrid::make(0.0, 8.0, 1.0);
  const auto a = solve_on_grid(linear_lumped(), t0, grid, rk4(5));
  const auto b = solve_on_grid(linear_lumped(), t0, grid, dopri(1e-10));
  REQUIRE(a.size() == grid.n_points);
  REQUIRE(b.size() == grid.n_points);
  for (std::size_t j = 0; j < grid.n_points; ++j) {
    CHECK(a.times[j] == doctest::Approx(grid.at(j)));
    CHECK(std::abs(a.states[j] - b.states[j]) < 1e-4);
  }
}

TEST_CASE("dense output") {
  const double x0[1] = {1.0};
  const auto traj = integrate_fixed(decay(), x0, TimeGrid::make(0.0, 1.0, 0.1), rk4(5));

  SUBCASE("node times return stored states exactly") {
    const auto back = sample_scalar(traj, traj.times);
    for (std::size_t j = 0; j < traj.size(); ++j) CHECK(back[j] == traj.states[j]);
  }
  SUBCASE("between nodes") {
    const double t[1] = {0.55};
    CHECK(std::abs(sample_scalar(traj, t)[0] - std::exp(-0.55)) < 1e-6);
  }
  SUBCASE("outside the span") {
    const double before[1] = {-0.01};
    const double after[1] = {1.01};
    CHECK_ERROR_CODE(sample_scalar(traj, before), ErrorCode::out_of_range);
    CHECK_ERROR_CODE(sample_scalar(traj, after), ErrorCode::out_of_range);
  }
  SUBCASE("constant trajectory is constant everywhere") {
    const Rhs zero = [](double, std::span<const double>, std::span<double> d) { d[0] = 0.0; };
    const double c[1] = {5.0};
    const auto flat = integrate_adaptive(zero, c, 0.0, 3.0, dopri(1e-8));
    const std::vector<double> t{0.0, 0.3, 1.7, 2.99, 3.0};
    for (double v : sample_scalar(flat, t)) CHECK(v == doctest::Approx(5.0).epsilon(1e-15));
  }
}

TEST_CASE("identical solves replay bit for bit") {
  const double t0[1] = {23.0};
  const auto grid = TimeGrid::make(0.0, 30.0, 1.0);
  const auto a = integrate_fixed(linear_lumped(), t0, grid, rk4(5));
  const auto b = integrate_fixed(linear_lumped(), t0, grid, rk4(5));
  CHECK(a.states == b.states);
  CHECK(a.stage_record.stage_states == b.stage_record.stage_states);
  const auto c = integrate_adaptive(linear_lumped(), t0, 0.0, 30.0, dopri(1e-8));
  const auto d = integrate_adaptive(linear_lumped(), t0, 0.0, 30.0, dopri(1e-8));
  CHECK(c.times == d.times);
  CHECK(c.states == d.states);
}

TEST_CASE("solver failures") {
  const double x0[1] = {1.0};
  const Rhs bad = [](double t, std::span<const double>, std::span<double> d) {
    d[0] = t > 0.5 ? std::nan("") : 1.0;
  };
  CHECK_ERROR_CODE(integrate_fixed(bad, x0, TimeGrid::make(0.0, 1.0, 0.1), rk4(1)),
                   ErrorCode::non_finite_state);
  CHECK_ERROR_CODE(integrate_adaptive(bad, x0, 0.0, 1.0, dopri(1e-8)),
                   ErrorCode::non_finite_state);

  auto limited = dopri(1e-10);
  limited.max_steps = 3;
  CHECK_ERROR_CODE(integrate_adaptive(decay(), x0, 0.0, 50.0, limited),
                   ErrorCode::step_limit_exceeded);

  CHECK_ERROR_CODE(integrate_fixed(decay(), x0, TimeGrid::make(0.0, 1.0, 0.1), rk4(0)),
                   ErrorCode::invalid_argument);
}
