#pragma once

// Multi-head fully connected tanh network.
//
// The trunk maps a scalar time t through tanh layers to an (m*h)-vector that is
// reshaped row-major into the hidden state H(t) (m x h): H(r, c) = a[r*h + c].
// The exact time derivative dH/dt is carried alongside as a forward-mode
// tangent. Each head k is a weight vector W_k (h) with output u_k = H W_k.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pertl/reduction.hpp"

namespace pertl {

struct TrunkSpec {
  std::vector<int> hidden_widths;  // last entry must equal m*h
  int m = 2;
  int h = 256;

  void validate() const;
  bool operator==(const TrunkSpec&) const = default;
};

struct TrunkParams {
  TrunkSpec spec;
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is out x in
  std::vector<Eigen::VectorXd> biases;

  static TrunkParams zeros(const TrunkSpec& spec);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static TrunkParams init(const TrunkSpec& spec, std::uint64_t seed);

  std::size_t parameter_count() const;
};

using HeadWeights = Eigen::VectorXd;

/// Uniform(-1/sqrt(h), 1/sqrt(h)) head weights, seeded independently of the trunk.
std::vector<HeadWeights> init_heads(const TrunkSpec& spec, int count, std::uint64_t seed);

struct TrunkEval {
  Eigen::MatrixXd H;      // m x h
  Eigen::MatrixXd H_dot;  // m x h
};

/// Last-layer activations for a whole batch: column i belongs to t_batch[i].
struct TrunkBatch {
  Eigen::MatrixXd value;    // (m*h) x n
  Eigen::MatrixXd tangent;  // (m*h) x n, d/dt of value

  TrunkEval at(Eigen::Index column, int m, int h) const;
};

TrunkBatch trunk_batch(const TrunkParams& params, std::span<const double> t_batch);

/// Throws NumericalError naming the layer if any activation is non-finite.
std::vector<TrunkEval> trunk_forward(const TrunkParams& params, std::span<const double> t_batch);

struct HeadOutput {
  Eigen::VectorXd u;
  Eigen::VectorXd u_dot;
};

HeadOutput head_forward(const TrunkEval& eval, const HeadWeights& W);

struct HeadOutputBatch {
  Eigen::MatrixXd u;      // m x n
  Eigen::MatrixXd u_dot;  // m x n
};

HeadOutputBatch head_batch(const TrunkBatch& batch, const HeadWeights& W, int m, int h);

/// (1/(mN)) sum_t |B u'(t) + A u(t) - F(t)|^2 + (1/m) |u(0) - u*|^2 with
/// N = collocation.size(); F is m x N.
double head_loss(const FirstOrderSystem& system, std::span<const TrunkEval> collocation,
                 const TrunkEval& boundary, const HeadWeights& W, const Eigen::MatrixXd& F,
                 const Eigen::VectorXd& u_star);

double total_loss(std::span<const double> head_losses);

/// Everything the multi-head loss needs for one iteration. Head k solves
/// systems[k] with lifted forcing forcing[k] (m x N on t) and boundary
/// systems[k].u_star at t = 0.
struct LossBatch {
  std::vector<double> t;
  std::vector<FirstOrderSystem> systems;
  std::vector<Eigen::MatrixXd> forcing;
};

struct LossGradient {
  double total = 0.0;
  std::vector<double> head_losses;
  TrunkParams d_trunk;
  std::vector<HeadWeights> d_heads;
};

/// L_total and per-head losses without gradients.
double batch_loss(const TrunkParams& params, std::span<const HeadWeights> heads,
                  const LossBatch& batch, std::vector<double>* head_losses = nullptr);

/// Exact gradient of L_total with respect to every trunk and head parameter.
/// Reverse-mode through both the activations and their time tangents.
LossGradient loss_gradient(const TrunkParams& params, std::span<const HeadWeights> heads,
                           const LossBatch& batch);

/// Flat parameter vector: per layer W (column-major) then b, then each head.
Eigen::VectorXd flatten(const TrunkParams& params, std::span<const HeadWeights> heads);
void unflatten(const Eigen::VectorXd& flat, TrunkParams& params, std::vector<HeadWeights>& heads);

}  // namespace pertl
