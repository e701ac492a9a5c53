#include "pertl/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "pertl/errors.hpp"

namespace pertl {

void TrunkSpec::validate() const {
  if (m < 1 || h < 1) throw std::invalid_argument("trunk: m and h must be >= 1");
  if (hidden_widths.empty()) throw std::invalid_argument("trunk: need at least one hidden layer");
  for (int w : hidden_widths) {
    if (w < 1) throw std::invalid_argument("trunk: layer widths must be >= 1");
  }
  if (hidden_widths.back() != m * h) {
    throw std::invalid_argument("trunk: final width must equal m*h");
  }
}

TrunkParams TrunkParams::zeros(const TrunkSpec& spec) {
  spec.validate();
  TrunkParams p;
  p.spec = spec;
  int in = 1;
  for (int out : spec.hidden_widths) {
    p.weights.push_back(Eigen::MatrixXd::Zero(out, in));
    p.biases.push_back(Eigen::VectorXd::Zero(out));
    in = out;
  }
  return p;
}

TrunkParams TrunkParams::init(const TrunkSpec& spec, std::uint64_t seed) {
  TrunkParams p = zeros(spec);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.weights[l].cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    // Row-major fill order so the draw sequence does not depend on storage.
    for (Eigen::Index r = 0; r < p.weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c) p.weights[l](r, c) = dist(rng);
    for (Eigen::Index r = 0; r < p.biases[l].size(); ++r) p.biases[l](r) = dist(rng);
  }
  return p;
}

std::size_t TrunkParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

std::vector<HeadWeights> init_heads(const TrunkSpec& spec, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const double bound = 1.0 / std::sqrt(static_cast<double>(spec.h));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<HeadWeights> heads(count, HeadWeights(spec.h));
  for (auto& w : heads)
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = dist(rng);
  return heads;
}

TrunkEval TrunkBatch::at(Eigen::Index column, int m, int h) const {
  TrunkEval e{Eigen::MatrixXd(m, h), Eigen::MatrixXd(m, h)};
  for (int r = 0; r < m; ++r) {
    e.H.row(r) = value.col(column).segment(r * h, h).transpose();
    e.H_dot.row(r) = tangent.col(column).segment(r * h, h).transpose();
  }
  return e;
}

namespace {

// Per-layer quantities kept for the backward pass.
struct LayerCache {
  Eigen::MatrixXd act;    // tanh(z)                 out x n
  Eigen::MatrixXd slope;  // 1 - tanh(z)^2           out x n
  Eigen::MatrixXd dz;     // W * (input tangent)     out x n
};

// Runs the trunk on the batch. Columns [0, n) of each stacked matrix hold
// values and [n, 2n) the time tangents, so each layer is one product.
TrunkBatch run_trunk(const TrunkParams& params, std::span<const double> t_batch,
                     std::vector<LayerCache>* caches) {
  const Eigen::Index n = static_cast<Eigen::Index>(t_batch.size());
  Eigen::MatrixXd x(1, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(0, i) = t_batch[i];
    x(0, n + i) = 1.0;
  }
  if (caches) caches->clear();

  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    Eigen::MatrixXd y = params.weights[l] * x;
    y.leftCols(n).colwise() += params.biases[l];
    if (!y.allFinite()) {
      throw NumericalError("trunk: non-finite pre-activation at layer " + std::to_string(l));
    }
    LayerCache c;
    c.act = y.leftCols(n).array().tanh();
    c.slope = 1.0 - c.act.array().square();
    c.dz = y.rightCols(n);
    x.resize(c.act.rows(), 2 * n);
    x.leftCols(n) = c.act;
    x.rightCols(n) = c.slope.cwiseProduct(c.dz);
    if (caches) caches->push_back(std::move(c));
  }
  return {x.leftCols(n), x.rightCols(n)};
}

struct HeadLossParts {
  Eigen::MatrixXd residual;  // m x N
  Eigen::VectorXd boundary;  // m
  double loss = 0.0;
};

// u rows: u_r = W^T V_r with V_r the h rows of block r.
Eigen::MatrixXd head_rows(const Eigen::MatrixXd& act, const HeadWeights& W, int m, int h,
                          Eigen::Index cols) {
  Eigen::MatrixXd u(m, cols);
  for (int r = 0; r < m; ++r) {
    u.row(r) = W.transpose() * act.block(r * h, 0, h, cols);
  }
  return u;
}

HeadLossParts head_loss_parts(const TrunkBatch& tb, Eigen::Index n_colloc,
                              const FirstOrderSystem& sys, const Eigen::MatrixXd& F,
                              const HeadWeights& W, int m, int h) {
  if (F.rows() != m || F.cols() != n_colloc) {
    throw std::invalid_argument("loss: forcing must be m x N");
  }
  HeadLossParts parts;
  const Eigen::MatrixXd u = head_rows(tb.value, W, m, h, n_colloc);
  const Eigen::MatrixXd u_dot = head_rows(tb.tangent, W, m, h, n_colloc);
  parts.residual = sys.B * u_dot + sys.A * u - F;
  Eigen::VectorXd u0(m);
  for (int r = 0; r < m; ++r) {
    u0(r) = W.dot(tb.value.col(n_colloc).segment(r * h, h));
  }
  parts.boundary = u0 - sys.u_star;
  parts.loss = parts.residual.squaredNorm() / static_cast<double>(m * n_colloc) +
               parts.boundary.squaredNorm() / static_cast<double>(m);
  return parts;
}

std::vector<double> with_boundary(const std::vector<double>& t) {
  std::vector<double> all(t);
  all.push_back(0.0);
  return all;
}

void check_batch(const TrunkParams& params, std::span<const HeadWeights> heads,
                 const LossBatch& batch) {
  if (batch.systems.size() != heads.size() || batch.forcing.size() != heads.size()) {
    throw std::invalid_argument("loss: one system and forcing per head required");
  }
  if (batch.t.empty()) throw std::invalid_argument("loss: empty collocation batch");
  for (const auto& W : heads) {
    if (W.size() != params.spec.h) throw std::invalid_argument("loss: head weight size != h");
  }
  for (const auto& s : batch.systems) {
    if (s.dim() != params.spec.m) throw std::invalid_argument("loss: system dimension != m");
  }
}

}  // namespace

TrunkBatch trunk_batch(const TrunkParams& params, std::span<const double> t_batch) {
  for (double t : t_batch) {
    if (!std::isfinite(t)) throw std::invalid_argument("trunk: non-finite time value");
  }
  return run_trunk(params, t_batch, nullptr);
}

std::vector<TrunkEval> trunk_forward(const TrunkParams& params, std::span<const double> t_batch) {
  const TrunkBatch tb = trunk_batch(params, t_batch);
  std::vector<TrunkEval> out;
  out.reserve(t_batch.size());
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(t_batch.size()); ++i) {
    out.push_back(tb.at(i, params.spec.m, params.spec.h));
  }
  return out;
}

HeadOutput head_forward(const TrunkEval& eval, const HeadWeights& W) {
  if (eval.H.cols() != W.size() || eval.H_dot.cols() != W.size()) {
    throw std::invalid_argument("head_forward: H has " + std::to_string(eval.H.cols()) +
                                " columns but W has " + std::to_string(W.size()) + " rows");
  }
  return {eval.H * W, eval.H_dot * W};
}

HeadOutputBatch head_batch(const TrunkBatch& batch, const HeadWeights& W, int m, int h) {
  if (W.size() != h || batch.value.rows() != m * h) {
    throw std::invalid_argument("head_batch: shape mismatch");
  }
  return {head_rows(batch.value, W, m, h, batch.value.cols()),
          head_rows(batch.tangent, W, m, h, batch.tangent.cols())};
}

double head_loss(const FirstOrderSystem& system, std::span<const TrunkEval> collocation,
                 const TrunkEval& boundary, const HeadWeights& W, const Eigen::MatrixXd& F,
                 const Eigen::VectorXd& u_star) {
  const int m = system.dim();
  const auto n = static_cast<Eigen::Index>(collocation.size());
  if (n == 0) throw std::invalid_argument("head_loss: no collocation points");
  if (F.rows() != m || F.cols() != n) throw std::invalid_argument("head_loss: F must be m x N");
  double res = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto out = head_forward(collocation[i], W);
    res += (system.B * out.u_dot + system.A * out.u - F.col(i)).squaredNorm();
  }
  const auto b = head_forward(boundary, W);
  return res / static_cast<double>(m * n) + (b.u - u_star).squaredNorm() / m;
}

double total_loss(std::span<const double> head_losses) {
  if (head_losses.empty()) throw std::invalid_argument("total_loss: no heads");
  double s = 0.0;
  for (double l : head_losses) s += l;
  return s / static_cast<double>(head_losses.size());
}

double batch_loss(const TrunkParams& params, std::span<const HeadWeights> heads,
                  const LossBatch& batch, std::vector<double>* head_losses) {
  check_batch(params, heads, batch);
  const auto all_t = with_boundary(batch.t);
  const TrunkBatch tb = run_trunk(params, all_t, nullptr);
  const auto n = static_cast<Eigen::Index>(batch.t.size());
  std::vector<double> losses;
  for (std::size_t k = 0; k < heads.size(); ++k) {
    losses.push_back(head_loss_parts(tb, n, batch.systems[k], batch.forcing[k], heads[k],
                                     params.spec.m, params.spec.h)
                         .loss);
  }
  const double total = total_loss(losses);
  if (head_losses) *head_losses = std::move(losses);
  return total;
}

LossGradient loss_gradient(const TrunkParams& params, std::span<const HeadWeights> heads,
                           const LossBatch& batch) {
  check_batch(params, heads, batch);
  const int m = params.spec.m;
  const int h = params.spec.h;
  const auto n = static_cast<Eigen::Index>(batch.t.size());
  const Eigen::Index cols = n + 1;  // collocation points, then t = 0
  const auto all_t = with_boundary(batch.t);

  std::vector<LayerCache> caches;
  const TrunkBatch tb = run_trunk(params, all_t, &caches);

  LossGradient grad;
  grad.d_trunk = TrunkParams::zeros(params.spec);
  grad.d_heads.assign(heads.size(), HeadWeights::Zero(h));

  // Adjoints of the last-layer activations and tangents.
  Eigen::MatrixXd g_act = Eigen::MatrixXd::Zero(m * h, cols);
  Eigen::MatrixXd g_tan = Eigen::MatrixXd::Zero(m * h, cols);

  const double inv_k = 1.0 / static_cast<double>(heads.size());
  for (std::size_t k = 0; k < heads.size(); ++k) {
    const auto& sys = batch.systems[k];
    const auto parts = head_loss_parts(tb, n, sys, batch.forcing[k], heads[k], m, h);
    grad.head_losses.push_back(parts.loss);

    const Eigen::MatrixXd g_res = parts.residual * (2.0 * inv_k / static_cast<double>(m * n));
    const Eigen::MatrixXd g_u = sys.A.transpose() * g_res;
    const Eigen::MatrixXd g_udot = sys.B.transpose() * g_res;
    const Eigen::VectorXd g_u0 = parts.boundary * (2.0 * inv_k / m);

    const HeadWeights& W = heads[k];
    HeadWeights& gW = grad.d_heads[k];
    for (int r = 0; r < m; ++r) {
      const auto act_r = tb.value.block(r * h, 0, h, n);
      const auto tan_r = tb.tangent.block(r * h, 0, h, n);
      gW.noalias() += act_r * g_u.row(r).transpose();
      gW.noalias() += tan_r * g_udot.row(r).transpose();
      gW.noalias() += tb.value.col(n).segment(r * h, h) * g_u0(r);

      g_act.block(r * h, 0, h, n).noalias() += W * g_u.row(r);
      g_tan.block(r * h, 0, h, n).noalias() += W * g_udot.row(r);
      g_act.col(n).segment(r * h, h) += W * g_u0(r);
    }
  }
  grad.total = total_loss(grad.head_losses);

  // Backward through the trunk. Per layer (s = 1 - a^2):
  //   a = tanh(z), z = W x + b;  da = s * dz, dz = W dx.
  for (std::size_t li = caches.size(); li-- > 0;) {
    const LayerCache& c = caches[li];
    Eigen::MatrixXd g_stack(c.act.rows(), 2 * cols);
    // g_dz = g_da * s ; g_a += g_da * dz * (-2 a) ; g_z = g_a * s
    g_stack.rightCols(cols) = g_tan.cwiseProduct(c.slope);
    g_act.array() -= 2.0 * g_tan.array() * c.dz.array() * c.act.array();
    g_stack.leftCols(cols) = g_act.cwiseProduct(c.slope);

    grad.d_trunk.biases[li] = g_stack.leftCols(cols).rowwise().sum();
    if (li == 0) {
      // Input row is [t | 1].
      Eigen::MatrixXd x(1, 2 * cols);
      for (Eigen::Index i = 0; i < cols; ++i) {
        x(0, i) = all_t[i];
        x(0, cols + i) = 1.0;
      }
      grad.d_trunk.weights[li].noalias() = g_stack * x.transpose();
    } else {
      const LayerCache& prev = caches[li - 1];
      Eigen::MatrixXd x(prev.act.rows(), 2 * cols);
      x.leftCols(cols) = prev.act;
      x.rightCols(cols) = prev.slope.cwiseProduct(prev.dz);
      grad.d_trunk.weights[li].noalias() = g_stack * x.transpose();
      const Eigen::MatrixXd g_x = params.weights[li].transpose() * g_stack;
      g_act = g_x.leftCols(cols);
      g_tan = g_x.rightCols(cols);
    }
  }

  for (std::size_t l = 0; l < grad.d_trunk.weights.size(); ++l) {
    if (!grad.d_trunk.weights[l].allFinite() || !grad.d_trunk.biases[l].allFinite()) {
      throw NumericalError("non-finite gradient in trunk layer " + std::to_string(l));
    }
  }
  for (std::size_t k = 0; k < grad.d_heads.size(); ++k) {
    if (!grad.d_heads[k].allFinite()) {
      throw NumericalError("non-finite gradient in head " + std::to_string(k));
    }
  }
  return grad;
}

Eigen::VectorXd flatten(const TrunkParams& params, std::span<const HeadWeights> heads) {
  std::size_t total = params.parameter_count();
  for (const auto& w : heads) total += w.size();
  Eigen::VectorXd flat(static_cast<Eigen::Index>(total));
  Eigen::Index off = 0;
  auto put = [&](const auto& m) {
    flat.segment(off, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    off += m.size();
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    put(params.weights[l]);
    put(params.biases[l]);
  }
  for (const auto& w : heads) put(w);
  return flat;
}

void unflatten(const Eigen::VectorXd& flat, TrunkParams& params, std::vector<HeadWeights>& heads) {
  std::size_t total = params.parameter_count();
  for (const auto& w : heads) total += w.size();
  if (static_cast<std::size_t>(flat.size()) != total) {
    throw std::invalid_argument("unflatten: size mismatch");
  }
  Eigen::Index off = 0;
  auto take = [&](auto& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = flat.segment(off, m.size());
    off += m.size();
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    take(params.weights[l]);
    take(params.biases[l]);
  }
  for (auto& w : heads) take(w);
}

}  // namespace pertl
