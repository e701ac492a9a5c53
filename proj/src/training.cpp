#include "pertl/training.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "pertl/errors.hpp"

namespace pertl {

void TrainConfig::validate() const {
  if (heads < 1) throw std::invalid_argument("config: heads must be >= 1");
  if (iterations < 0) throw std::invalid_argument("config: iterations must be >= 0");
  if (!(lr0 > 0.0)) throw std::invalid_argument("config: lr0 must be > 0");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
    throw std::invalid_argument("config: decay_factor must be in (0, 1]");
  }
  if (decay_every < 1) throw std::invalid_argument("config: decay_every must be >= 1");
  if (collocation_n < 1) throw std::invalid_argument("config: collocation_n must be >= 1");
  if (!(t_lo < t_hi)) throw std::invalid_argument("config: need t_lo < t_hi");
  for (const Interval* r : {&ranges.gamma, &ranges.omega, &ranges.alpha, &ranges.delta, &ranges.x0}) {
    if (r->lo > r->hi) throw std::invalid_argument("config: parameter range with lo > hi");
  }
  trunk_spec().validate();
}

TrunkSpec TrainConfig::trunk_spec() const {
  return TrunkSpec{hidden_widths, 2, h};
}

namespace {

double draw(const Interval& r, std::mt19937_64& rng) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

}  // namespace

std::vector<DuffingParams> sample_duffing(const DuffingRanges& ranges, int count, double beta,
                                          std::mt19937_64& rng) {
  std::vector<DuffingParams> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    DuffingParams p;
    p.gamma = draw(ranges.gamma, rng);
    p.omega = draw(ranges.omega, rng);
    p.alpha = draw(ranges.alpha, rng);
    p.delta = draw(ranges.delta, rng);
    p.x0 = draw(ranges.x0, rng);
    p.beta = beta;
    p.v0 = 0.0;
    out.push_back(p);
  }
  return out;
}

std::vector<DuffingParams> sample_parameter_sets(const TrainConfig& config) {
  std::mt19937_64 rng(config.seed);
  return sample_duffing(config.ranges, config.heads, 0.0, rng);
}

std::vector<double> sample_collocation(const TrainConfig& config, int /*iteration*/,
                                       std::mt19937_64& rng) {
  std::vector<double> t(config.collocation_n);
  if (config.t_lo == config.t_hi) {
    std::fill(t.begin(), t.end(), config.t_lo);
    return t;
  }
  std::uniform_real_distribution<double> dist(config.t_lo, config.t_hi);
  for (double& v : t) v = dist(rng);
  return t;
}

double scheduled_learning_rate(const TrainConfig& config, int iteration) {
  return config.lr0 * std::pow(config.decay_factor, iteration / config.decay_every);
}

void adam_step(Eigen::VectorXd& params, AdamState& state, const Eigen::VectorXd& grad,
               int iteration, const TrainConfig& config) {
  if (grad.size() != params.size()) throw std::invalid_argument("adam: gradient shape mismatch");
  if (!grad.allFinite()) throw NumericalError("adam: non-finite gradient");
  if (state.m.size() != params.size()) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
    state.step = 0;
  }
  ++state.step;
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  state.m = b1 * state.m + (1.0 - b1) * grad;
  state.v = b2 * state.v + (1.0 - b2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = scheduled_learning_rate(config, iteration);
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + config.adam_eps);
}

std::vector<HeadProblem> duffing_problems(std::span<const DuffingParams> sets) {
  std::vector<HeadProblem> out;
  for (const auto& p : sets) out.push_back({duffing_system(p), duffing_forcing(p)});
  return out;
}

LossBatch make_batch(std::span<const HeadProblem> problems, std::vector<double> t) {
  LossBatch batch;
  batch.t = std::move(t);
  const auto n = static_cast<Eigen::Index>(batch.t.size());
  for (const auto& prob : problems) {
    const int m = prob.system.dim();
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(m, n);
    for (Eigen::Index i = 0; i < n; ++i) F(m - 1, i) = prob.forcing(batch.t[i]);
    batch.systems.push_back(prob.system);
    batch.forcing.push_back(std::move(F));
  }
  return batch;
}

TrainResult train(TrunkParams trunk, std::vector<HeadWeights> heads,
                  std::span<const HeadProblem> problems, const TrainConfig& config,
                  const TrainProgress& progress) {
  config.validate();
  if (heads.size() != problems.size()) throw std::invalid_argument("train: one head per problem");

  const auto start = std::chrono::steady_clock::now();
  TrainResult result;
  std::mt19937_64 rng(config.seed ^ 0x5851f42d4c957f2dULL);
  AdamState adam;
  Eigen::VectorXd flat = flatten(trunk, heads);

  for (int it = 0; it < config.iterations; ++it) {
    LossBatch batch = make_batch(problems, sample_collocation(config, it, rng));
    LossGradient g;
    try {
      g = loss_gradient(trunk, heads, batch);
    } catch (const NumericalError& e) {
      result.diverged = true;
      result.message = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }
    result.total_history.push_back(g.total);
    result.head_history.push_back(g.head_losses);
    if (!std::isfinite(g.total) || g.total > 1e6) {
      result.diverged = true;
      result.message = "iteration " + std::to_string(it) + ": loss " + std::to_string(g.total);
      break;
    }
    if (progress) progress(it, g.total);

    adam_step(flat, adam, flatten(g.d_trunk, g.d_heads), it, config);
    unflatten(flat, trunk, heads);
  }

  result.trunk = std::move(trunk);
  result.heads = std::move(heads);
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<double> grid_head_losses(const TrunkParams& trunk, std::span<const HeadWeights> heads,
                                     std::span<const HeadProblem> problems, double t_lo,
                                     double t_hi, int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = t_lo + (t_hi - t_lo) * (i + 0.5) / n;
  std::vector<double> losses;
  batch_loss(trunk, heads, make_batch(problems, std::move(t)), &losses);
  return losses;
}

}  // namespace pertl
