#pragma once

// First-order reduction of D x = f with D = sum_{j=0..m} g_j d^j/dt^j.
//
// With u = [x, x', ..., x^(m-1)] the scalar equation becomes B u' + A u = F:
//
//   B = diag(1, ..., 1, g_m)
//   A = superdiagonal of -1, last row [g_0, ..., g_{m-1}]
//   F = [0, ..., 0, f]

#include <functional>
#include <span>

#include <Eigen/Dense>

namespace pertl {

struct FirstOrderSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::VectorXd u_star;

  int dim() const { return static_cast<int>(A.rows()); }

  /// F = [0, ..., 0, f].
  Eigen::VectorXd lift(double f) const;
};

/// Throws std::invalid_argument when g has fewer than two entries or g_m == 0.
FirstOrderSystem build_system(std::span<const double> g);

std::function<Eigen::VectorXd(double)> lift_forcing(std::function<double(double)> f, int m);

/// B u' + A u - F.
Eigen::VectorXd residual(const FirstOrderSystem& system, const Eigen::VectorXd& u,
                         const Eigen::VectorXd& u_dot, const Eigen::VectorXd& F);

}  // namespace pertl
