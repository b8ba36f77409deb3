#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ode.hpp"

namespace lumpfit::adjoint {

/// Flat partials of a scalar loss in the differentiated object's canonical
/// parameter order.
using GradientVector = std::vector<double>;

/// Right-hand side f(t, x; p) with a vector-Jacobian product, which is all
/// the reverse sweep needs from a model.
class DifferentiableRhs {
 public:
  virtual ~DifferentiableRhs() = default;

  virtual std::size_t state_dim() const = 0;
  virtual std::size_t parameter_count() const = 0;
  virtual void eval(double t, std::span<const double> x, std::span<double> dxdt) const = 0;
  /// x_bar = cot^T df/dx (overwritten), p_bar += cot^T df/dp.
  virtual void vjp(double t, std::span<const double> x, std::span<const double> cot,
                   std::span<double> x_bar, std::span<double> p_bar) const = 0;

  ode::Rhs as_rhs() const;
};

/// Reverse accumulation through the RK4 steps recorded in `traj`.
///
/// `node_cotangents` holds dL/dx at every trajectory node (nodes x dim);
/// the parameter partials are accumulated into `p_bar` and, when given,
/// dL/dx0 is written to `x0_bar`. The stage record is consumed once, last
/// step first.
void reverse_sweep(const DifferentiableRhs& rhs, const ode::Trajectory& traj,
                   std::span<const double> node_cotangents, std::span<double> p_bar,
                   std::span<double> x0_bar = {});

/// Central differences (L(p + eps e_k) - L(p - eps e_k)) / (2 eps).
GradientVector finite_difference_gradient(const std::function<double(std::span<const double>)>& loss,
                                          std::span<const double> params, double eps = 1e-4);

/// Throws NonFiniteGradient if any entry is NaN or infinite.
void require_finite(std::span<const double> gradient);

}  // namespace lumpfit::adjoint
