#pragma once

// Duffing oscillator x'' + delta x' + alpha x + beta x^3 = gamma cos(omega t),
// x(0) = x0, x'(0) = v0. In the polynomial class: g = [alpha, delta, 1],
// q = 3, eps = beta.

#include "pertl/perturbation.hpp"
#include "pertl/reduction.hpp"

namespace pertl {

struct DuffingParams {
  double delta = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double omega = 0.0;
  double x0 = 0.0;
  double v0 = 0.0;

  bool operator==(const DuffingParams&) const = default;
};

PolynomialNonlinearODE duffing_ode(const DuffingParams& p);

/// Linear (beta ignored) first-order system with u* = [x0, v0].
FirstOrderSystem duffing_system(const DuffingParams& p);

CosineForcing duffing_forcing(const DuffingParams& p);

}  // namespace pertl
