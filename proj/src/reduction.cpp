#include "pertl/reduction.hpp"

#include <stdexcept>
#include <utility>

namespace pertl {

Eigen::VectorXd FirstOrderSystem::lift(double f) const {
  Eigen::VectorXd F = Eigen::VectorXd::Zero(dim());
  F(dim() - 1) = f;
  return F;
}

FirstOrderSystem build_system(std::span<const double> g) {
  if (g.size() < 2) throw std::invalid_argument("build_system: need m >= 1");
  const int m = static_cast<int>(g.size()) - 1;
  if (g[m] == 0.0) throw std::invalid_argument("build_system: g_m must be nonzero");

  FirstOrderSystem sys;
  sys.B = Eigen::MatrixXd::Identity(m, m);
  sys.B(m - 1, m - 1) = g[m];
  sys.A = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i + 1 < m; ++i) sys.A(i, i + 1) = -1.0;
  for (int j = 0; j < m; ++j) sys.A(m - 1, j) = g[j];
  sys.u_star = Eigen::VectorXd::Zero(m);
  return sys;
}

std::function<Eigen::VectorXd(double)> lift_forcing(std::function<double(double)> f, int m) {
  if (m < 1) throw std::invalid_argument("lift_forcing: m must be >= 1");
  return [f = std::move(f), m](double t) {
    Eigen::VectorXd F = Eigen::VectorXd::Zero(m);
    F(m - 1) = f(t);
    return F;
  };
}

Eigen::VectorXd residual(const FirstOrderSystem& system, const Eigen::VectorXd& u,
                         const Eigen::VectorXd& u_dot, const Eigen::VectorXd& F) {
  const int m = system.dim();
  if (u.size() != m || u_dot.size() != m || F.size() != m) {
    throw std::invalid_argument("residual: dimension mismatch");
  }
  return system.B * u_dot + system.A * u - F;
}

}  // namespace pertl
