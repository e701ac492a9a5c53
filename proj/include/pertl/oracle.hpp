#pragma once

// Reference integrator: Dormand-Prince 5(4) embedded Runge-Kutta pair with
// adaptive steps. Steps are clipped so the integrator lands exactly on every
// requested output time, so no interpolation error enters the comparison.

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pertl/duffing.hpp"

namespace pertl {

struct IntegratorConfig {
  double rel_tol = 1e-12;
  double abs_tol = 1e-12;
  long max_steps = 2'000'000;
  double blowup = 1e8;

  void validate() const;
};

using OdeRhs = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& u)>;

struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> u;
  long steps = 0;
  long rejected = 0;

  /// Component c of every state.
  std::vector<double> component(int c) const;
};

/// Integrates u' = rhs(t, u) from (t0, u0) through the non-decreasing grid.
/// Throws NumericalError on step exhaustion or when |u| exceeds the blow-up bound.
Trajectory integrate(const OdeRhs& rhs, double t0, const Eigen::VectorXd& u0,
                     std::span<const double> grid, const IntegratorConfig& config = {});

/// Full nonlinear Duffing equation with u = [x, x'] starting at t = 0.
Trajectory integrate_duffing(const DuffingParams& params, const Eigen::Vector2d& u0,
                             std::span<const double> grid, const IntegratorConfig& config = {});

struct CompareMetrics {
  double linf = 0.0;
  double rel_l2 = 0.0;
};

/// L-inf = max|a-b|, relative L2 = |a-b|_2 / max(|b|_2, 1e-12).
CompareMetrics compare(std::span<const double> a, std::span<const double> b);

}  // namespace pertl
