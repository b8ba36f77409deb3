#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace lumpfit::optim {

/// Returns f(x) and writes grad f(x). May throw lumpfit::Error for
/// parameters where the model cannot be evaluated; the line search treats
/// those points as infinitely bad.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct HistoryEntry {
  std::string phase;
  int iteration;
  double loss;
};

struct AdamOptions {
  int iterations = 200;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct LbfgsOptions {
  int memory = 10;
  int max_iterations = 500;
  double rel_loss_tol = 1e-8;
  double c1 = 1e-4;  // sufficient decrease
  double c2 = 0.9;   // curvature
  int max_line_search = 40;
  int max_restarts = 4;  // consecutive failed line searches before giving up
};

struct Result {
  std::vector<double> x;
  double loss = 0.0;
  int iterations = 0;
  std::string stop_reason;
};

/// Full-batch Adam. Records the loss at each iterate and returns the best
/// one seen. Throws DivergedFit on a non-finite loss.
Result adam(const Objective& f, std::span<const double> x0, const AdamOptions& options,
            std::vector<HistoryEntry>* history = nullptr);

/// Limited-memory BFGS with a strong-Wolfe line search. Accepted iterates
/// never increase the loss; stops once the relative loss change drops below
/// rel_loss_tol.
Result lbfgs(const Objective& f, std::span<const double> x0, const LbfgsOptions& options,
             std::vector<HistoryEntry>* history = nullptr);

}  // namespace lumpfit::optim
