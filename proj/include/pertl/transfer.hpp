#pragma once

// One-shot head fitting on a frozen trunk.
//
// For u(t) = H(t) W the loss
//   L(W) = 1/(mN) sum_t |B H'_t W + A H_t W - F(t)|^2 + 1/m |H_0 W - u*|^2
// is quadratic in W. Its stationarity condition is M W = r with
//   G_t = B H'_t + A H_t
//   M   = 1/N sum_t G_t^T G_t + H_0^T H_0
//   r   = 1/N sum_t G_t^T F(t) + H_0^T u*
// M depends only on the trunk and (A, B), so it is factorized once per
// equation and reused for every perturbation order.

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pertl/duffing.hpp"
#include "pertl/network.hpp"
#include "pertl/perturbation.hpp"
#include "pertl/reduction.hpp"

namespace pertl {

/// Trained trunk with cached H, H' on a fixed grid and H_0 at t = 0.
class FrozenTrunk {
 public:
  FrozenTrunk(TrunkParams params, std::vector<double> grid);

  /// Cache built from explicit matrices (no trunk parameters attached, so
  /// solutions over it cannot be evaluated off-grid). H and H_dot are stacked
  /// point-major ((m*N) x h), H0 is m x h.
  static FrozenTrunk from_matrices(std::vector<double> grid, Eigen::MatrixXd H,
                                   Eigen::MatrixXd H_dot, Eigen::MatrixXd H0);

  bool has_params() const { return has_params_; }

  /// n midpoints of a uniform partition of (lo, hi).
  static std::vector<double> uniform_grid(double lo, double hi, int n);

  const TrunkParams& params() const { return params_; }
  const std::vector<double>& grid() const { return grid_; }
  int m() const { return static_cast<int>(H0_.rows()); }
  int h() const { return static_cast<int>(H0_.cols()); }
  Eigen::Index size() const { return static_cast<Eigen::Index>(grid_.size()); }

  /// Row block i*m .. i*m+m-1 holds H (resp. H') at grid[i].
  const Eigen::MatrixXd& H() const { return H_; }
  const Eigen::MatrixXd& H_dot() const { return H_dot_; }
  const Eigen::MatrixXd& H0() const { return H0_; }

  TrunkEval eval(Eigen::Index i) const;

 private:
  FrozenTrunk() = default;

  TrunkParams params_;
  bool has_params_ = true;
  std::vector<double> grid_;
  Eigen::MatrixXd H_;
  Eigen::MatrixXd H_dot_;
  Eigen::MatrixXd H0_;
};

/// M with its symmetric eigendecomposition, used as the reusable solve.
/// When the condition estimate exceeds kMaxCondition a ridge term
/// lambda = 1e-10 * trace(M) / h is added to the spectrum.
class NormalMatrix {
 public:
  static constexpr double kMaxCondition = 1e12;

  explicit NormalMatrix(Eigen::MatrixXd M);

  const Eigen::MatrixXd& matrix() const { return M_; }
  double condition_estimate() const { return condition_; }
  double regularization() const { return lambda_; }

  /// Solves (M + lambda I) w = r.
  Eigen::VectorXd solve(const Eigen::VectorXd& r) const;

  /// Number of factorizations performed process-wide.
  static long factorization_count();
  static void reset_factorization_count();

 private:
  Eigen::MatrixXd M_;
  Eigen::MatrixXd eigenvectors_;
  Eigen::VectorXd inverse_eigenvalues_;
  double condition_ = 0.0;
  double lambda_ = 0.0;
};

/// Throws SingularMatrixError when M vanishes.
NormalMatrix assemble_M(const FrozenTrunk& trunk, const FirstOrderSystem& system);

/// r = 1/N sum_t G_t^T F(t) + H_0^T u*; F is m x N on the trunk grid.
Eigen::VectorXd head_rhs(const FrozenTrunk& trunk, const FirstOrderSystem& system,
                         const Eigen::MatrixXd& F, const Eigen::VectorXd& u_star);

HeadWeights solve_head(const NormalMatrix& M, const FrozenTrunk& trunk,
                       const FirstOrderSystem& system, const Eigen::MatrixXd& F,
                       const Eigen::VectorXd& u_star);

/// The quadratic transfer loss L(W) on the trunk grid.
double transfer_loss(const FrozenTrunk& trunk, const FirstOrderSystem& system,
                     const Eigen::MatrixXd& F, const Eigen::VectorXd& u_star,
                     const HeadWeights& W);

struct TransferSolution {
  std::vector<HeadWeights> W;  // orders 0..p
  double epsilon = 0.0;
  int p = 0;
  std::shared_ptr<const FrozenTrunk> trunk;

  double condition_estimate = 0.0;
  double regularization = 0.0;
  double assemble_seconds = 0.0;
  std::vector<double> order_seconds;
  double total_seconds = 0.0;

  /// Combined head sum_i eps^i W_i; the network output is linear in W.
  HeadWeights combined_weights() const;

  /// u (m x n) and u' (m x n) of the composed solution at arbitrary times.
  HeadOutputBatch evaluate(std::span<const double> t) const;
};

TransferSolution solve_cascade(const PolynomialNonlinearODE& ode, int p,
                               std::shared_ptr<const FrozenTrunk> trunk,
                               const CascadeSpec& cascade);

/// Convenience: builds the cascade for ode and solves it.
TransferSolution solve_cascade(const PolynomialNonlinearODE& ode, int p,
                               std::shared_ptr<const FrozenTrunk> trunk);

struct DuffingLoss {
  double residual_mse = 0.0;
  double boundary = 0.0;
  double loss = 0.0;
  double log10_loss = 0.0;
};

/// mean_t (x'' + delta x' + alpha x + beta x^3 - gamma cos(omega t))^2
///   + |[x(0), x'(0)] - [x0, v0]|^2
DuffingLoss duffing_residual(const DuffingParams& params, std::span<const double> t,
                             std::span<const double> x, std::span<const double> x_dot,
                             std::span<const double> x_ddot, double x_at_0, double xdot_at_0);

/// Uses x = u_1, x' = d/dt u_1, x'' = d/dt u_2 and the boundary u(0) of the
/// composed solution.
DuffingLoss duffing_residual_loss(const TransferSolution& solution, const DuffingParams& params,
                                  std::span<const double> grid);

}  // namespace pertl
