#include <cmath>
#include <sstream>

#include "doctest.h"
#include "ode.hpp"
#include "synth.hpp"
#include "test_util.hpp"

using namespace lumpfit;
using namespace lumpfit::synth;

namespace {

GroundTruthSpec with_cooldown() {
  GroundTruthSpec s;
  s.cooldown_min = 60.0;
  s.cooldown_max = 90.0;
  return s;
}

}  // namespace

TEST_CASE("steady temperatures of the ground truth") {
  const GroundTruthSpec spec;
  CHECK(steady_temperature(spec, 3000.0) == doctest::Approx(1408.7).epsilon(1e-4));
  CHECK(steady_temperature(spec, 1400.0) == doctest::Approx(855.5).epsilon(1e-4));
  CHECK(steady_temperature(spec, 0.0) == spec.t_sink);
  const double cap = hold_power_cap(spec);
  CHECK(cap == doctest::Approx(1501.7).epsilon(1e-4));
  CHECK(steady_temperature(spec, cap) == doctest::Approx(spec.steady_cap).epsilon(1e-12));
  for (double p : {500.0, 1500.0, 3800.0}) {
    const double t = steady_temperature(spec, p);
    CHECK(q_true(spec, t, p) == doctest::Approx(spec.h * (t - spec.t_sink)).epsilon(1e-12));
  }
}

TEST_CASE("closed form for constant heat input") {
  CHECK(closed_form_linear(23.0, 677.0, 4.0, 1.0, 23.0, 0.0) == 23.0);
  CHECK(closed_form_linear(23.0, 677.0, 4.0, 1.0, 23.0, 1e4) == doctest::Approx(700.0));
  CHECK(closed_form_linear(23.0, 677.0, 4.0, 1.0, 23.0, 4.0) ==
        doctest::Approx(700.0 - 677.0 * std::exp(-1.0)));
  CHECK_ERROR_CODE(closed_form_linear(23.0, 1.0, 0.0, 1.0, 23.0, 1.0), ErrorCode::invalid_argument);
}

TEST_CASE("heat input stays within the network band over the envelope") {
  const GroundTruthSpec spec;
  for (double t = 0.0; t <= 1000.0; t += 50.0) {
    for (double p = 50.0; p <= 4000.0; p += 50.0) {
      const double q = q_true(spec, t, p);
      CHECK((q > 0.0 && q < 4000.0));
    }
  }
}

TEST_CASE("drawn shapes respect the spec ranges") {
  const auto spec = with_cooldown();
  for (std::size_t i = 0; i < 200; ++i) {
    const auto s = draw_shape(spec, 3, i);
    CHECK(s.ramp_s >= spec.ramp_min);
    CHECK(s.ramp_s <= spec.ramp_max);
    CHECK(s.hold_w >= spec.hold_min);
    CHECK(s.hold_w <= std::min(spec.hold_max, hold_power_cap(spec)));
    CHECK(s.duration_s >= spec.duration_min - spec.dt);
    CHECK(s.duration_s <= spec.duration_max + spec.dt);
    CHECK(s.cooldown_s >= spec.cooldown_min - spec.dt);
    CHECK(s.cooldown_s <= spec.cooldown_max + spec.dt);
    CHECK(s.off_time() > s.ramp_s);
  }
}

TEST_CASE("power profile") {
  const RunShape plain{30.0, 1200.0, 200.0};
  CHECK(shape_power(plain, 0.0) == 0.0);
  CHECK(shape_power(plain, 15.0) == doctest::Approx(600.0));
  CHECK(shape_power(plain, 30.0) == 1200.0);
  CHECK(shape_power(plain, 199.0) == 1200.0);

  const RunShape cool{30.0, 1200.0, 200.0, 70.0, 10.0};
  CHECK(shape_power(cool, 129.9) == 1200.0);
  CHECK(shape_power(cool, 135.0) == doctest::Approx(600.0));
  CHECK(shape_power(cool, 140.0) == 0.0);
  CHECK(shape_power(cool, 180.0) == 0.0);
}

TEST_CASE("noise-free runs satisfy the ground-truth balance") {
  const GroundTruthSpec spec;
  const RunShape shape{45.0, 1300.0, 200.0, 70.0, 10.0};
  auto cool_spec = with_cooldown();
  const auto run = simulate_run(cool_spec, shape, "x");
  CHECK(run.temperatures.front() == spec.t_sink);
  const double dt = run.grid.dt;
  for (std::size_t j = 1; j + 1 < run.size(); ++j) {
    const double fd = (run.temperatures[j + 1] - run.temperatures[j - 1]) / (2 * dt);
    const double t = run.temperatures[j];
    const double model = (q_true(spec, t, run.powers[j]) - spec.h * (t - spec.t_sink)) / spec.c_true;
    CHECK(std::abs(fd - model) < 0.5);
  }
}

TEST_CASE("runs stay below the heating ceiling") {
  const auto spec = with_cooldown();
  const auto runs = generate_ensemble(spec, 7, 1);
  REQUIRE(runs.size() == 7);
  for (const auto& r : runs) {
    CHECK(r.grid.dt == spec.dt);
    double top = 0.0;
    for (double p : r.powers) top = std::max(top, q_true(spec, spec.t_sink, p));
    const double ceiling = spec.t_sink + top / spec.h + 6.0 * spec.noise_sigma;
    for (double v : r.temperatures) CHECK(v < ceiling);
    CHECK(r.powers.back() == 0.0);
  }
}

TEST_CASE("ensembles are seeded") {
  const auto spec = with_cooldown();
  const auto a = generate_ensemble(spec, 3, 11);
  const auto b = generate_ensemble(spec, 3, 11);
  const auto c = generate_ensemble(spec, 3, 12);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a[i].temperatures == b[i].temperatures);
    CHECK(a[i].powers == b[i].powers);
    CHECK(a[i].temperatures != c[i].temperatures);
  }
  CHECK(a[0].id == "run1");
  CHECK(a[2].id == "run3");
  // Run i depends only on (seed, i).
  const auto longer = generate_ensemble(spec, 5, 11);
  CHECK(longer[1].temperatures == a[1].temperatures);
}

TEST_CASE("spec validation") {
  GroundTruthSpec s;
  s.hold_min = 2000.0;
  s.hold_max = 1000.0;
  CHECK_ERROR_CODE(s.validate(), ErrorCode::invalid_argument);
  s = with_cooldown();
  s.fall_s = 70.0;
  CHECK_ERROR_CODE(s.validate(), ErrorCode::invalid_argument);
  s = with_cooldown();
  s.cooldown_max = 150.0;
  CHECK_ERROR_CODE(s.validate(), ErrorCode::invalid_argument);
  s = GroundTruthSpec{};
  s.c_true = 0.0;
  CHECK_ERROR_CODE(s.validate(), ErrorCode::invalid_argument);
}

TEST_CASE("spec file round trip") {
  auto s = with_cooldown();
  s.noise_sigma = 0.5;
  s.c_true = 3.25;
  std::stringstream ss;
  write_spec(ss, s, 9);
  const auto back = read_spec(ss);
  CHECK(back.c_true == 3.25);
  CHECK(back.noise_sigma == 0.5);
  CHECK(back.cooldown_min == 60.0);
  CHECK(back.cooldown_max == 90.0);
  CHECK(back.fall_s == s.fall_s);
  std::istringstream bad("c_true = 4\nbogus = 1\n");
  CHECK_ERROR_CODE(read_spec(bad), ErrorCode::malformed_row);
}

// With h fixed, scaling C by k and replacing Q by h(T - Ts) + k (Q - h(T - Ts))
// leaves every trajectory unchanged. A power-off segment pins the scale,
// since the rescaled heat input then goes negative whenever k > 1.
TEST_CASE("capacitance trades off against the heat-input closure") {
  const GroundTruthSpec spec;
  const RunShape shape{30.0, 1200.0, 200.0, 70.0, 10.0};
  const double k = 3.0;
  auto make = [&](double scale) -> ode::Rhs {
    return [&, scale](double t, std::span<const double> x, std::span<double> d) {
      const double loss = spec.h * (x[0] - spec.t_sink);
      const double q = loss + scale * (q_true(spec, x[0], shape_power(shape, t)) - loss);
      d[0] = (q - loss) / (scale * spec.c_true);
    };
  };
  ode::SolverConfig cfg;
  cfg.substeps_per_interval = 10;
  const double x0[1] = {spec.t_sink};
  const auto grid = ode::TimeGrid::make(0.0, 200.0, 1.0);
  const auto base = ode::integrate_fixed(make(1.0), x0, grid, cfg);
  const auto scaled = ode::integrate_fixed(make(k), x0, grid, cfg);
  for (std::size_t j = 0; j < base.size(); ++j) {
    CHECK(scaled.states[j] == doctest::Approx(base.states[j]).epsilon(1e-12));
  }
  double min_q = 1e300;
  for (std::size_t j = 0; j < grid.n_points; ++j) {
    const double t = grid.at(j);
    const double temp = base.states[j];
    const double loss = spec.h * (temp - spec.t_sink);
    min_q = std::min(min_q, loss + k * (q_true(spec, temp, shape_power(shape, t)) - loss));
  }
  CHECK(min_q < 0.0);
}
