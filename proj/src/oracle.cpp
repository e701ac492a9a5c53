#include "pertl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pertl/errors.hpp"

namespace pertl {

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) {
    throw std::invalid_argument("integrator tolerances must be positive");
  }
  if (max_steps < 1) throw std::invalid_argument("integrator max_steps must be >= 1");
}

std::vector<double> Trajectory::component(int c) const {
  std::vector<double> out;
  out.reserve(u.size());
  for (const auto& v : u) out.push_back(v(c));
  return out;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// b - b_hat (fifth minus fourth order weights)
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

Trajectory integrate(const OdeRhs& rhs, double t0, const Eigen::VectorXd& u0,
                     std::span<const double> grid, const IntegratorConfig& config) {
  config.validate();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i]) || grid[i] < t0 || (i > 0 && grid[i] < grid[i - 1])) {
      throw std::invalid_argument("integrate: grid must be finite, >= t0 and non-decreasing");
    }
  }

  Trajectory traj;
  Eigen::VectorXd u = u0;
  double t = t0;
  Eigen::VectorXd k1 = rhs(t, u);
  const double span = grid.empty() ? 0.0 : grid.back() - t0;
  double h = span > 0.0 ? std::min(1e-3, span) : 0.0;

  for (double target : grid) {
    while (t < target) {
      if (traj.steps + traj.rejected >= config.max_steps) {
        throw NumericalError("integrate: step budget exhausted at t = " + std::to_string(t));
      }
      bool last = false;
      double step = h;
      if (t + step >= target) {
        step = target - t;
        last = true;
      }

      const Eigen::VectorXd k2 = rhs(t + c2 * step, u + step * (a21 * k1));
      const Eigen::VectorXd k3 = rhs(t + c3 * step, u + step * (a31 * k1 + a32 * k2));
      const Eigen::VectorXd k4 = rhs(t + c4 * step, u + step * (a41 * k1 + a42 * k2 + a43 * k3));
      const Eigen::VectorXd k5 =
          rhs(t + c5 * step, u + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const Eigen::VectorXd k6 =
          rhs(t + step, u + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      const Eigen::VectorXd u_new =
          u + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const Eigen::VectorXd k7 = rhs(t + step, u_new);
      const Eigen::VectorXd err =
          step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      const Eigen::ArrayXd scale =
          config.abs_tol + config.rel_tol * u.array().abs().max(u_new.array().abs());
      const double err_norm =
          std::sqrt((err.array() / scale).square().mean());

      if (!std::isfinite(err_norm)) {
        throw NumericalError("integrate: non-finite state at t = " + std::to_string(t));
      }
      const double factor =
          err_norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 5.0);
      if (err_norm <= 1.0) {
        t = last ? target : t + step;
        u = u_new;
        k1 = k7;
        ++traj.steps;
        if (u.cwiseAbs().maxCoeff() > config.blowup) {
          throw NumericalError("integrate: solution blew up at t = " + std::to_string(t));
        }
        // Keep the controller's step rather than the clipped one.
        if (!last) h = step * factor;
        else h = std::max(h, step * factor);
      } else {
        ++traj.rejected;
        h = step * std::max(factor, 0.2);
      }
      if (h < 1e-14 * std::max(1.0, std::abs(t))) {
        throw NumericalError("integrate: step size underflow at t = " + std::to_string(t));
      }
    }
    traj.t.push_back(target);
    traj.u.push_back(u);
  }
  return traj;
}

Trajectory integrate_duffing(const DuffingParams& p, const Eigen::Vector2d& u0,
                             std::span<const double> grid, const IntegratorConfig& config) {
  const OdeRhs rhs = [p](double t, const Eigen::VectorXd& u) {
    Eigen::VectorXd du(2);
    const double x = u(0);
    du(0) = u(1);
    du(1) = p.gamma * std::cos(p.omega * t) - p.delta * u(1) - p.alpha * x - p.beta * x * x * x;
    return du;
  };
  return integrate(rhs, 0.0, u0, grid, config);
}

CompareMetrics compare(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("compare: length mismatch");
  CompareMetrics m;
  double diff2 = 0.0;
  double ref2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    m.linf = std::max(m.linf, std::abs(d));
    diff2 += d * d;
    ref2 += b[i] * b[i];
  }
  m.rel_l2 = std::sqrt(diff2) / std::max(std::sqrt(ref2), 1e-12);
  return m;
}

}  // namespace pertl
