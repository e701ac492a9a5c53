#include "pertl/transfer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "pertl/errors.hpp"

namespace pertl {

namespace {

std::atomic<long> g_factorizations{0};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

FrozenTrunk::FrozenTrunk(TrunkParams params, std::vector<double> grid)
    : params_(std::move(params)), grid_(std::move(grid)) {
  if (grid_.empty()) throw std::invalid_argument("FrozenTrunk: empty grid");
  const int m = params_.spec.m;
  const int h = params_.spec.h;
  const auto n = size();

  std::vector<double> all(grid_);
  all.push_back(0.0);
  const TrunkBatch tb = trunk_batch(params_, all);

  H_.resize(n * m, h);
  H_dot_.resize(n * m, h);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int r = 0; r < m; ++r) {
      H_.row(i * m + r) = tb.value.col(i).segment(r * h, h).transpose();
      H_dot_.row(i * m + r) = tb.tangent.col(i).segment(r * h, h).transpose();
    }
  }
  H0_ = tb.at(n, m, h).H;
}

FrozenTrunk FrozenTrunk::from_matrices(std::vector<double> grid, Eigen::MatrixXd H,
                                       Eigen::MatrixXd H_dot, Eigen::MatrixXd H0) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  if (n == 0) throw std::invalid_argument("FrozenTrunk: empty grid");
  const Eigen::Index m = H0.rows();
  if (m < 1 || H0.cols() < 1 || H.rows() != n * m || H_dot.rows() != n * m ||
      H.cols() != H0.cols() || H_dot.cols() != H0.cols()) {
    throw std::invalid_argument("FrozenTrunk: inconsistent hidden-state shapes");
  }
  FrozenTrunk f;
  f.has_params_ = false;
  f.grid_ = std::move(grid);
  f.H_ = std::move(H);
  f.H_dot_ = std::move(H_dot);
  f.H0_ = std::move(H0);
  return f;
}

std::vector<double> FrozenTrunk::uniform_grid(double lo, double hi, int n) {
  if (n < 1 || !(lo < hi)) throw std::invalid_argument("uniform_grid: need n >= 1 and lo < hi");
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = lo + (hi - lo) * (i + 0.5) / n;
  return t;
}

TrunkEval FrozenTrunk::eval(Eigen::Index i) const {
  const int m = this->m();
  return {H_.middleRows(i * m, m), H_dot_.middleRows(i * m, m)};
}

NormalMatrix::NormalMatrix(Eigen::MatrixXd M) : M_(std::move(M)) {
  if (M_.rows() != M_.cols()) throw std::invalid_argument("NormalMatrix: M must be square");
  const double scale = M_.cwiseAbs().maxCoeff();
  if (!std::isfinite(scale)) throw NumericalError("NormalMatrix: non-finite entries");
  if (scale == 0.0) {
    throw SingularMatrixError("normal matrix is identically zero",
                              std::numeric_limits<double>::infinity());
  }

  ++g_factorizations;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M_);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("NormalMatrix: eigendecomposition failed");
  }
  eigenvectors_ = eig.eigenvectors();
  // M is a Gram sum, so negative eigenvalues are round-off.
  Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0);
  const double largest = ev.maxCoeff();
  const double smallest = ev.minCoeff();
  condition_ = smallest > 0.0 ? largest / smallest : std::numeric_limits<double>::infinity();
  if (condition_ > kMaxCondition) {
    lambda_ = 1e-10 * M_.trace() / static_cast<double>(M_.rows());
    if (!(lambda_ > 0.0)) {
      throw SingularMatrixError("normal matrix is singular and cannot be regularized", condition_);
    }
    ev.array() += lambda_;
  }
  inverse_eigenvalues_ = ev.cwiseInverse();
}

Eigen::VectorXd NormalMatrix::solve(const Eigen::VectorXd& r) const {
  if (r.size() != M_.rows()) throw std::invalid_argument("NormalMatrix::solve: size mismatch");
  return eigenvectors_ * inverse_eigenvalues_.cwiseProduct(eigenvectors_.transpose() * r);
}

long NormalMatrix::factorization_count() { return g_factorizations.load(); }
void NormalMatrix::reset_factorization_count() { g_factorizations = 0; }

namespace {

// Stacked G (mN x h): block i is B H'_i + A H_i.
Eigen::MatrixXd stacked_design(const FrozenTrunk& trunk, const FirstOrderSystem& system) {
  const int m = trunk.m();
  if (system.dim() != m) {
    throw std::invalid_argument("system dimension does not match the trunk's m");
  }
  const auto n = trunk.size();
  Eigen::MatrixXd G(n * m, trunk.h());
  for (Eigen::Index i = 0; i < n; ++i) {
    G.middleRows(i * m, m).noalias() = system.B * trunk.H_dot().middleRows(i * m, m);
    G.middleRows(i * m, m).noalias() += system.A * trunk.H().middleRows(i * m, m);
  }
  return G;
}

Eigen::VectorXd stack_forcing(const Eigen::MatrixXd& F, int m, Eigen::Index n) {
  if (F.rows() != m || F.cols() != n) throw std::invalid_argument("forcing must be m x N");
  return Eigen::Map<const Eigen::VectorXd>(F.data(), F.size());  // column-major = point-major
}

}  // namespace

NormalMatrix assemble_M(const FrozenTrunk& trunk, const FirstOrderSystem& system) {
  const Eigen::MatrixXd G = stacked_design(trunk, system);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(trunk.h(), trunk.h());
  M.selfadjointView<Eigen::Lower>().rankUpdate(G.transpose(), 1.0 / static_cast<double>(trunk.size()));
  M.selfadjointView<Eigen::Lower>().rankUpdate(trunk.H0().transpose(), 1.0);
  M.triangularView<Eigen::StrictlyUpper>() = M.transpose();
  return NormalMatrix(std::move(M));
}

Eigen::VectorXd head_rhs(const FrozenTrunk& trunk, const FirstOrderSystem& system,
                         const Eigen::MatrixXd& F, const Eigen::VectorXd& u_star) {
  if (u_star.size() != trunk.m()) throw std::invalid_argument("u* must have m entries");
  const Eigen::MatrixXd G = stacked_design(trunk, system);
  const Eigen::VectorXd f = stack_forcing(F, trunk.m(), trunk.size());
  return G.transpose() * f / static_cast<double>(trunk.size()) + trunk.H0().transpose() * u_star;
}

HeadWeights solve_head(const NormalMatrix& M, const FrozenTrunk& trunk,
                       const FirstOrderSystem& system, const Eigen::MatrixXd& F,
                       const Eigen::VectorXd& u_star) {
  HeadWeights W = M.solve(head_rhs(trunk, system, F, u_star));
  if (!W.allFinite()) throw NumericalError("solve_head: non-finite head weights");
  return W;
}

double transfer_loss(const FrozenTrunk& trunk, const FirstOrderSystem& system,
                     const Eigen::MatrixXd& F, const Eigen::VectorXd& u_star,
                     const HeadWeights& W) {
  const int m = trunk.m();
  const Eigen::MatrixXd G = stacked_design(trunk, system);
  const Eigen::VectorXd f = stack_forcing(F, m, trunk.size());
  const double res = (G * W - f).squaredNorm() / static_cast<double>(m * trunk.size());
  return res + (trunk.H0() * W - u_star).squaredNorm() / m;
}

HeadWeights TransferSolution::combined_weights() const {
  if (W.empty()) throw std::logic_error("TransferSolution: no orders solved");
  HeadWeights c = HeadWeights::Zero(W[0].size());
  double w = 1.0;
  for (const auto& Wi : W) {
    c += w * Wi;
    w *= epsilon;
  }
  return c;
}

HeadOutputBatch TransferSolution::evaluate(std::span<const double> t) const {
  if (!trunk || !trunk->has_params()) {
    throw std::logic_error("TransferSolution: evaluation needs a trunk with parameters");
  }
  const auto tb = trunk_batch(trunk->params(), t);
  if (!tb.value.allFinite()) throw NumericalError("TransferSolution: non-finite trunk output");
  return head_batch(tb, combined_weights(), trunk->m(), trunk->h());
}

TransferSolution solve_cascade(const PolynomialNonlinearODE& ode, int p,
                               std::shared_ptr<const FrozenTrunk> trunk,
                               const CascadeSpec& cascade) {
  ode.validate();
  if (!trunk) throw std::invalid_argument("solve_cascade: trunk required");
  if (cascade.p != p) throw std::invalid_argument("solve_cascade: cascade built for another p");
  if (trunk->m() != ode.order()) {
    throw std::invalid_argument("solve_cascade: trunk was trained for a different operator order");
  }
  const auto start = Clock::now();
  const int m = trunk->m();
  const auto n = trunk->size();
  const auto& grid = trunk->grid();

  TransferSolution sol;
  sol.epsilon = ode.epsilon;
  sol.p = p;
  sol.trunk = trunk;

  const FirstOrderSystem system = build_system(ode.g);
  const NormalMatrix M = assemble_M(*trunk, system);
  sol.condition_estimate = M.condition_estimate();
  sol.regularization = M.regularization();
  sol.assemble_seconds = seconds_since(start);

  const auto boundary = split_boundary(ode, cascade);
  std::vector<std::vector<double>> x_values;  // x_i on the grid
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(m, n);

  for (int j = 0; j <= p; ++j) {
    const auto order_start = Clock::now();
    if (j == 0) {
      for (Eigen::Index i = 0; i < n; ++i) F(m - 1, i) = ode.forcing(grid[i]);
    } else {
      const auto fj = evaluate_forcing_values(cascade, j, x_values);
      for (Eigen::Index i = 0; i < n; ++i) F(m - 1, i) = fj[i];
    }
    const Eigen::VectorXd u_star =
        Eigen::Map<const Eigen::VectorXd>(boundary[j].data(), m);
    HeadWeights W = solve_head(M, *trunk, system, F, u_star);

    // x_j = first component of H W_j.
    std::vector<double> xj(n);
    Eigen::Map<Eigen::VectorXd> xmap(xj.data(), n);
    xmap = Eigen::Map<const Eigen::MatrixXd, 0, Eigen::InnerStride<>>(
               trunk->H().data(), n, trunk->h(), Eigen::InnerStride<>(m)) *
           W;
    for (double v : xj) {
      if (!std::isfinite(v)) {
        throw NumericalError("solve_cascade: order " + std::to_string(j) + " is non-finite");
      }
    }
    x_values.push_back(std::move(xj));
    sol.W.push_back(std::move(W));
    sol.order_seconds.push_back(seconds_since(order_start));
  }
  sol.total_seconds = seconds_since(start);
  return sol;
}

TransferSolution solve_cascade(const PolynomialNonlinearODE& ode, int p,
                               std::shared_ptr<const FrozenTrunk> trunk) {
  return solve_cascade(ode, p, std::move(trunk), build_cascade(ode, p));
}

DuffingLoss duffing_residual(const DuffingParams& params, std::span<const double> t,
                             std::span<const double> x, std::span<const double> x_dot,
                             std::span<const double> x_ddot, double x_at_0, double xdot_at_0) {
  const std::size_t n = t.size();
  if (n == 0 || x.size() != n || x_dot.size() != n || x_ddot.size() != n) {
    throw std::invalid_argument("duffing_residual: trajectories must match the grid");
  }
  DuffingLoss out;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = x_ddot[i] + params.delta * x_dot[i] + params.alpha * x[i] +
                     params.beta * x[i] * x[i] * x[i] - params.gamma * std::cos(params.omega * t[i]);
    out.residual_mse += r * r;
  }
  out.residual_mse /= static_cast<double>(n);
  const double e0 = x_at_0 - params.x0;
  const double e1 = xdot_at_0 - params.v0;
  out.boundary = e0 * e0 + e1 * e1;
  out.loss = out.residual_mse + out.boundary;
  out.log10_loss = std::log10(out.loss);
  return out;
}

DuffingLoss duffing_residual_loss(const TransferSolution& solution, const DuffingParams& params,
                                  std::span<const double> grid) {
  if (!solution.trunk || solution.trunk->m() != 2) {
    throw std::invalid_argument("duffing_residual_loss: needs a second-order (m = 2) solution");
  }
  std::vector<double> t(grid.begin(), grid.end());
  t.push_back(0.0);
  const auto out = solution.evaluate(t);
  const auto n = static_cast<Eigen::Index>(grid.size());
  std::vector<double> x(n), xd(n), xdd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = out.u(0, i);
    xd[i] = out.u_dot(0, i);
    xdd[i] = out.u_dot(1, i);
  }
  return duffing_residual(params, grid, x, xd, xdd, out.u(0, n), out.u(1, n));
}

}  // namespace pertl
