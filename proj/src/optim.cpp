#include "optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>

#include "errors.hpp"

namespace lumpfit::optim {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// f and grad at x; non-finite results and model failures come back as +inf.
double safe_eval(const Objective& f, std::span<const double> x, std::span<double> g) {
  try {
    const double v = f(x, g);
    if (!std::isfinite(v) || !all_finite(g)) return std::numeric_limits<double>::infinity();
    return v;
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

struct LinePoint {
  double step = 0.0;
  double value = 0.0;
  double slope = 0.0;
  std::vector<double> x;
  std::vector<double> g;
};

/// Minimizer of the cubic through (a, fa, da) and (b, fb, db), or NaN.
double cubic_min(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (!(disc >= 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  return b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
}

class StrongWolfe {
 public:
  StrongWolfe(const Objective& f, const LbfgsOptions& opt, std::span<const double> x0,
              std::span<const double> dir, double f0, double slope0)
      : f_(f), opt_(opt), x0_(x0), dir_(dir), f0_(f0), slope0_(slope0) {}

  /// Returns true and fills `out` on success. On failure `out` still holds
  /// the best sufficient-decrease point if one was found (step > 0).
  bool search(double step, LinePoint& out) {
    LinePoint prev{0.0, f0_, slope0_, {}, {}};
    for (int i = 0; i < opt_.max_line_search; ++i) {
      LinePoint cur = probe(step);
      if (!std::isfinite(cur.value) || cur.value > f0_ + opt_.c1 * step * slope0_ ||
          (i > 0 && cur.value >= prev.value)) {
        return zoom(prev, cur, out);
      }
      if (std::abs(cur.slope) <= -opt_.c2 * slope0_) {
        out = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(cur, prev, out);
      note_candidate(cur);
      prev = std::move(cur);
      step *= 2.0;
    }
    return fallback(out);
  }

 private:
  LinePoint probe(double step) {
    LinePoint p;
    p.step = step;
    p.x.resize(x0_.size());
    p.g.resize(x0_.size());
    for (std::size_t i = 0; i < x0_.size(); ++i) p.x[i] = x0_[i] + step * dir_[i];
    p.value = safe_eval(f_, p.x, p.g);
    p.slope = std::isfinite(p.value) ? dot(p.g, dir_) : std::numeric_limits<double>::quiet_NaN();
    ++evals_;
    return p;
  }

  void note_candidate(const LinePoint& p) {
    if (p.step > 0.0 && std::isfinite(p.value) && p.value <= f0_ + opt_.c1 * p.step * slope0_ &&
        (!best_ || p.value < best_->value)) {
      best_ = p;
    }
  }

  bool fallback(LinePoint& out) {
    if (best_ && best_->value < f0_) {
      out = *best_;
      return false;
    }
    out = LinePoint{};
    return false;
  }

  bool zoom(LinePoint lo, LinePoint hi, LinePoint& out) {
    note_candidate(lo);
    while (evals_ < opt_.max_line_search) {
      const double a = lo.step;
      const double b = hi.step;
      const double width = std::abs(b - a);
      if (width <= 1e-14 * std::max(1.0, std::abs(a))) break;
      double trial = std::numeric_limits<double>::quiet_NaN();
      if (std::isfinite(hi.value)) trial = cubic_min(a, lo.value, lo.slope, b, hi.value, hi.slope);
      const double lo_edge = std::min(a, b) + 0.1 * width;
      const double hi_edge = std::max(a, b) - 0.1 * width;
      if (!std::isfinite(trial) || trial < lo_edge || trial > hi_edge) trial = 0.5 * (a + b);

      LinePoint cur = probe(trial);
      if (!std::isfinite(cur.value) || cur.value > f0_ + opt_.c1 * trial * slope0_ ||
          cur.value >= lo.value) {
        hi = std::move(cur);
      } else {
        note_candidate(cur);
        if (std::abs(cur.slope) <= -opt_.c2 * slope0_) {
          out = std::move(cur);
          return true;
        }
        if (cur.slope * (hi.step - lo.step) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
    }
    return fallback(out);
  }

  const Objective& f_;
  const LbfgsOptions& opt_;
  std::span<const double> x0_;
  std::span<const double> dir_;
  double f0_;
  double slope0_;
  int evals_ = 0;
  std::optional<LinePoint> best_;
};

}  // namespace

Result adam(const Objective& f, std::span<const double> x0, const AdamOptions& opt,
            std::vector<HistoryEntry>* history) {
  const std::size_t n = x0.size();
  std::vector<double> x(x0.begin(), x0.end()), g(n), m(n, 0.0), v(n, 0.0);
  Result best{x, std::numeric_limits<double>::infinity(), 0, "iterations"};

  for (int k = 0; k < opt.iterations; ++k) {
    const double loss = safe_eval(f, x, g);
    if (!std::isfinite(loss)) {
      fail(ErrorCode::diverged_fit, "loss became non-finite at Adam iteration " + std::to_string(k));
    }
    if (history) history->push_back({"adam", k, loss});
    if (loss < best.loss) {
      best.loss = loss;
      best.x = x;
    }
    const double bc1 = 1.0 - std::pow(opt.beta1, k + 1);
    const double bc2 = 1.0 - std::pow(opt.beta2, k + 1);
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
      x[i] -= opt.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opt.epsilon);
    }
    best.iterations = k + 1;
  }
  if (opt.iterations > 0) {
    const double loss = safe_eval(f, x, g);
    if (std::isfinite(loss) && loss < best.loss) {
      best.loss = loss;
      best.x = x;
    }
  } else {
    best.loss = safe_eval(f, x, g);
    if (!std::isfinite(best.loss)) fail(ErrorCode::diverged_fit, "initial loss is non-finite");
  }
  return best;
}

Result lbfgs(const Objective& f, std::span<const double> x0, const LbfgsOptions& opt,
             std::vector<HistoryEntry>* history) {
  const std::size_t n = x0.size();
  std::vector<double> x(x0.begin(), x0.end()), g(n), dir(n), q(n);
  double fx = safe_eval(f, x, g);
  if (!std::isfinite(fx)) fail(ErrorCode::diverged_fit, "loss is non-finite at the L-BFGS start");
  if (history) history->push_back({"lbfgs", 0, fx});

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> mem;
  Result res{x, fx, 0, "max_iterations"};
  int failures = 0;  // consecutive line-search failures

  for (int k = 1; k <= opt.max_iterations; ++k) {
    if (inf_norm(g) == 0.0) {
      res.stop_reason = "zero_gradient";
      break;
    }
    // Two-loop recursion.
    q = g;
    std::vector<double> alpha(mem.size());
    for (std::size_t i = mem.size(); i-- > 0;) {
      alpha[i] = mem[i].rho * dot(mem[i].s, q);
      for (std::size_t j = 0; j < n; ++j) q[j] -= alpha[i] * mem[i].y[j];
    }
    double gamma = 1.0;
    if (!mem.empty()) gamma = dot(mem.back().s, mem.back().y) / dot(mem.back().y, mem.back().y);
    for (std::size_t j = 0; j < n; ++j) q[j] *= gamma;
    for (std::size_t i = 0; i < mem.size(); ++i) {
      const double beta = mem[i].rho * dot(mem[i].y, q);
      for (std::size_t j = 0; j < n; ++j) q[j] += (alpha[i] - beta) * mem[i].s[j];
    }
    for (std::size_t j = 0; j < n; ++j) dir[j] = -q[j];

    double slope = dot(g, dir);
    if (!(slope < 0.0)) {
      mem.clear();
      for (std::size_t j = 0; j < n; ++j) dir[j] = -g[j];
      slope = dot(g, dir);
    }
    double step0 = mem.empty() ? std::min(1.0, 1e-2 / inf_norm(g)) : 1.0;
    for (int i = 0; i < failures; ++i) step0 *= 1e-3;

    StrongWolfe ls(f, opt, x, dir, fx, slope);
    LinePoint next;
    const bool ok = ls.search(step0, next);
    if (next.step <= 0.0) {
      // Nothing better along this direction: drop the curvature pairs and
      // retry steepest descent from ever shorter trial steps.
      if (++failures > opt.max_restarts) {
        res.stop_reason = ok ? "no_progress" : "line_search_failed";
        break;
      }
      mem.clear();
      --k;
      continue;
    }
    const bool recovering = failures > 0;
    failures = 0;

    Pair p;
    p.s.resize(n);
    p.y.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      p.s[j] = next.x[j] - x[j];
      p.y[j] = next.g[j] - g[j];
    }
    const double sy = dot(p.s, p.y);
    if (sy > 1e-12 * std::sqrt(dot(p.s, p.s) * dot(p.y, p.y))) {
      p.rho = 1.0 / sy;
      mem.push_back(std::move(p));
      if (mem.size() > static_cast<std::size_t>(opt.memory)) mem.pop_front();
    }

    const double rel = (fx - next.value) / std::max(std::abs(fx), 1e-300);
    x = std::move(next.x);
    g = std::move(next.g);
    fx = next.value;
    res.iterations = k;
    if (history) history->push_back({"lbfgs", k, fx});
    // A tiny gain from a shortened recovery step says nothing about convergence.
    if (rel < opt.rel_loss_tol && !recovering) {
      res.stop_reason = "converged";
      break;
    }
  }
  res.x = x;
  res.loss = fx;
  return res;
}

}  // namespace lumpfit::optim
