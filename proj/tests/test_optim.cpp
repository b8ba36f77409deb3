#include <cmath>
#include <vector>

#include "doctest.h"
#include "optim.hpp"
#include "test_util.hpp"

using namespace lumpfit;
using namespace lumpfit::optim;

namespace {

double rosenbrock(std::span<const double> x, std::span<double> g) {
  const double a = 1.0 - x[0];
  const double b = x[1] - x[0] * x[0];
  g[0] = -2.0 * a - 400.0 * x[0] * b;
  g[1] = 200.0 * b;
  return a * a + 100.0 * b * b;
}

double quadratic(std::span<const double> x, std::span<double> g) {
  double f = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = static_cast<double>(i + 1);
    f += w * (x[i] - 1.0) * (x[i] - 1.0);
    g[i] = 2.0 * w * (x[i] - 1.0);
  }
  return f;
}

}  // namespace

TEST_CASE("lbfgs minimizes the Rosenbrock function") {
  LbfgsOptions opt;
  opt.rel_loss_tol = 1e-14;
  opt.max_iterations = 500;
  std::vector<HistoryEntry> hist;
  const auto r = lbfgs(rosenbrock, std::vector<double>{-1.2, 1.0}, opt, &hist);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-5));
  for (std::size_t i = 1; i < hist.size(); ++i) CHECK(hist[i].loss <= hist[i - 1].loss);
  CHECK(hist.front().phase == "lbfgs");
}

TEST_CASE("lbfgs stops on a stalled relative loss") {
  LbfgsOptions opt;
  opt.rel_loss_tol = 1e-3;
  const auto r = lbfgs(quadratic, std::vector<double>(5, 0.0), opt);
  CHECK(r.stop_reason != "max_iterations");
  CHECK(r.iterations < 100);
}

TEST_CASE("adam descends a quadratic and returns the best iterate") {
  AdamOptions opt;
  opt.iterations = 2000;
  opt.learning_rate = 1e-2;
  std::vector<HistoryEntry> hist;
  const auto r = adam(quadratic, std::vector<double>(3, 0.0), opt, &hist);
  CHECK(hist.size() == 2000);
  CHECK(r.loss < 1e-6);
  double best = hist.front().loss;
  for (const auto& h : hist) best = std::min(best, h.loss);
  CHECK(r.loss <= best);
}

TEST_CASE("non-finite losses") {
  const Objective nan_after = [](std::span<const double> x, std::span<double> g) {
    g[0] = 1.0;
    return x[0] < 0.9995 ? std::nan("") : x[0];
  };
  AdamOptions opt;
  opt.iterations = 5;
  CHECK_ERROR_CODE(adam(nan_after, std::vector<double>{1.0}, opt), ErrorCode::diverged_fit);
  CHECK_ERROR_CODE(lbfgs(nan_after, std::vector<double>{0.0}, LbfgsOptions{}),
                   ErrorCode::diverged_fit);
}

TEST_CASE("line search backs off from regions that cannot be evaluated") {
  // Minimum at x = 2, but anything beyond 1.5 throws.
  const Objective walled = [](std::span<const double> x, std::span<double> g) {
    if (x[0] > 1.5) fail(ErrorCode::non_finite_state, "wall");
    g[0] = 2.0 * (x[0] - 2.0);
    return (x[0] - 2.0) * (x[0] - 2.0);
  };
  LbfgsOptions opt;
  opt.max_iterations = 50;
  const auto r = lbfgs(walled, std::vector<double>{0.0}, opt);
  CHECK(r.x[0] <= 1.5);
  CHECK(r.x[0] > 1.0);
  CHECK(std::isfinite(r.loss));
}
