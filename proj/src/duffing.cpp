#include "pertl/duffing.hpp"

#include <array>

namespace pertl {

PolynomialNonlinearODE duffing_ode(const DuffingParams& p) {
  PolynomialNonlinearODE ode;
  ode.g = {p.alpha, p.delta, 1.0};
  ode.q = 3;
  ode.epsilon = p.beta;
  ode.forcing = duffing_forcing(p);
  ode.bc_value = p.x0;
  ode.bc_derivatives = {p.v0};
  return ode;
}

FirstOrderSystem duffing_system(const DuffingParams& p) {
  const std::array<double, 3> g{p.alpha, p.delta, 1.0};
  auto sys = build_system(g);
  sys.u_star = Eigen::Vector2d(p.x0, p.v0);
  return sys;
}

CosineForcing duffing_forcing(const DuffingParams& p) { return {p.gamma, p.omega}; }

}  // namespace pertl
