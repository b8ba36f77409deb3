#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "mlp.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace lumpfit;
using namespace lumpfit::nn;

namespace {

MLPParams random_net(std::vector<std::size_t> dims, double scale, double spread, std::mt19937_64& rng) {
  auto p = MLPParams::zeros(std::move(dims), scale);
  std::normal_distribution<double> n(0.0, spread);
  for (double& v : p.values) v = n(rng);
  return p;
}

void check_backward_against_fd(const MLPParams& net, std::span<const double> input) {
  const auto g = backward(net, input, 1.0);
  auto probe = net;
  const double eps = 1e-6;
  for (std::size_t k = 0; k < net.parameter_count(); ++k) {
    probe.values[k] = net.values[k] + eps;
    const double up = forward(probe, input);
    probe.values[k] = net.values[k] - eps;
    const double down = forward(probe, input);
    probe.values[k] = net.values[k];
    const double fd = (up - down) / (2 * eps);
    CHECK(testutil::close(g.param_grad[k], fd, 1e-5, 1e-8 * net.output_scale));
  }
  std::vector<double> x(input.begin(), input.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = input[i] + eps;
    const double up = forward(net, x);
    x[i] = input[i] - eps;
    const double down = forward(net, x);
    x[i] = input[i];
    CHECK(testutil::close(g.input_grad[i], (up - down) / (2 * eps), 1e-5, 1e-8 * net.output_scale));
  }
}

}  // namespace

TEST_CASE("activation values") {
  CHECK(swish(0.0) == 0.0);
  CHECK(swish(10.0) == doctest::Approx(9.999546).epsilon(1e-6));
  CHECK(swish(-10.0) == doctest::Approx(-4.5398e-4).epsilon(1e-3));
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) >= 0.0);
  for (double x : {-3.0, -0.5, 0.0, 0.7, 4.0}) {
    const double h = 1e-6;
    CHECK(swish_derivative(x) == doctest::Approx((swish(x + h) - swish(x - h)) / (2 * h)).epsilon(1e-7));
    CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0));
  }
}

TEST_CASE("parameter counts and layout") {
  const std::vector<std::size_t> heat{2, 10, 1};
  const std::vector<std::size_t> ctrl{1, 5, 5, 1};
  CHECK(parameter_count(heat) == 41);
  CHECK(parameter_count(ctrl) == 46);
  const auto p = MLPParams::zeros(heat, 4000.0);
  CHECK(p.weight_offset(0) == 0);
  CHECK(p.weight_offset(1) == 20);
  CHECK(p.bias_offset(0) == 30);
  CHECK(p.bias_offset(1) == 40);
}

TEST_CASE("zero network outputs half the scale") {
  const double in[2] = {0.3, -1.2};
  CHECK(forward(MLPParams::zeros({2, 10, 1}, 4000.0), in) == 2000.0);
  const double t[1] = {0.7};
  CHECK(forward(MLPParams::zeros({1, 5, 5, 1}, 4000.0), t) == 2000.0);
}

TEST_CASE("output stays strictly inside the scale") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> in(0.0, 5.0);
  for (int draw = 0; draw < 10000; ++draw) {
    const auto net = random_net({2, 10, 1}, 4000.0, 20.0, rng);
    const double x[2] = {in(rng), in(rng)};
    const double y = forward(net, x);
    CHECK_MESSAGE((y > 0.0 && y < 4000.0), "draw ", draw, " gave ", y);
    if (!(y > 0.0 && y < 4000.0)) break;
  }
}

TEST_CASE("forward matches the oracle") {
  std::mt19937_64 rng(11);
  for (int draw = 0; draw < 50; ++draw) {
    const auto heat = random_net({2, 10, 1}, 4000.0, 1.0, rng);
    const double x[2] = {0.4, 0.6};
    CHECK(forward(heat, x) == doctest::Approx(oracle::mlp(heat, x)).epsilon(1e-13));
    const auto ctrl = random_net({1, 5, 5, 1}, 4000.0, 1.0, rng);
    const double t[1] = {0.25};
    CHECK(forward(ctrl, t) == doctest::Approx(oracle::mlp(ctrl, t)).epsilon(1e-13));
  }
}

TEST_CASE("glorot init") {
  const auto a = init_glorot({2, 10, 1}, 4000.0, 42);
  const auto b = init_glorot({2, 10, 1}, 4000.0, 42);
  const auto c = init_glorot({2, 10, 1}, 4000.0, 43);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  const double bound0 = std::sqrt(6.0 / 12.0);
  CHECK(bound0 == doctest::Approx(0.7071).epsilon(1e-4));
  for (std::size_t k = 0; k < 20; ++k) CHECK(std::abs(a.values[k]) <= bound0);
  const double bound1 = std::sqrt(6.0 / 11.0);
  for (std::size_t k = 20; k < 30; ++k) CHECK(std::abs(a.values[k]) <= bound1);
  for (std::size_t k = 30; k < 41; ++k) CHECK(a.values[k] == 0.0);
}

TEST_CASE("golden forward value for seed 42") {
  const auto net = init_glorot({2, 10, 1}, 4000.0, 42);
  const double x[2] = {0.5, 0.5};
  CHECK(forward(net, x) == doctest::Approx(2353.1393916574243).epsilon(1e-12));
}

TEST_CASE("backward") {
  std::mt19937_64 rng(3);
  SUBCASE("zero upstream gives zero gradients") {
    const auto net = random_net({2, 10, 1}, 4000.0, 1.0, rng);
    const double x[2] = {0.2, 0.9};
    const auto g = backward(net, x, 0.0);
    CHECK(testutil::max_abs(g.param_grad) == 0.0);
    CHECK(testutil::max_abs(g.input_grad) == 0.0);
  }
  SUBCASE("zero network has no input sensitivity") {
    const double x[2] = {0.2, 0.9};
    const auto g = backward(MLPParams::zeros({2, 10, 1}, 4000.0), x, 1.0);
    CHECK(testutil::max_abs(g.input_grad) == 0.0);
  }
  SUBCASE("agrees with finite differences") {
    for (int draw = 0; draw < 5; ++draw) {
      const auto heat = random_net({2, 10, 1}, 4000.0, 1.0, rng);
      const double x[2] = {0.35, 0.8};
      check_backward_against_fd(heat, x);
      const auto ctrl = random_net({1, 5, 5, 1}, 4000.0, 1.0, rng);
      const double t[1] = {0.6};
      check_backward_against_fd(ctrl, t);
    }
  }
  SUBCASE("accumulates into the parameter buffer") {
    const auto net = random_net({2, 10, 1}, 4000.0, 1.0, rng);
    const double x[2] = {0.1, 0.2};
    Workspace ws;
    std::vector<double> acc(net.parameter_count(), 0.0);
    backward(net, x, 1.0, acc, {}, ws);
    backward(net, x, 2.0, acc, {}, ws);
    const auto once = backward(net, x, 3.0);
    for (std::size_t k = 0; k < acc.size(); ++k) {
      CHECK(acc[k] == doctest::Approx(once.param_grad[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("input dimension is checked") {
  const auto net = MLPParams::zeros({2, 10, 1}, 4000.0);
  const double x[3] = {0.0, 0.0, 0.0};
  CHECK_ERROR_CODE(forward(net, std::span<const double>(x, 3)), ErrorCode::dimension_mismatch);
  CHECK_ERROR_CODE(MLPParams::zeros({2, 10, 2}, 1.0), ErrorCode::dimension_mismatch);
}

TEST_CASE("serialization round trip is exact") {
  const auto net = init_glorot({1, 5, 5, 1}, 3500.0, 9);
  std::stringstream ss;
  write(ss, net);
  const auto back = read(ss);
  CHECK(back.layer_dims == net.layer_dims);
  CHECK(back.values == net.values);
  CHECK(back.output_scale == net.output_scale);
  CHECK(back.seed == net.seed);
}
