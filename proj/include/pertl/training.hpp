#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pertl/duffing.hpp"
#include "pertl/network.hpp"

namespace pertl {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool operator==(const Interval&) const = default;
};

/// Sampling box for Duffing class instances.
struct DuffingRanges {
  Interval gamma{0.5, 3.0};
  Interval omega{0.5, 3.0};
  Interval alpha{0.5, 4.5};
  Interval delta{0.5, 4.5};
  Interval x0{-3.0, 3.0};

  bool operator==(const DuffingRanges&) const = default;
};

struct TrainConfig {
  int heads = 10;
  int iterations = 5000;
  double lr0 = 2e-4;
  double decay_factor = 0.96;
  int decay_every = 100;
  int collocation_n = 200;
  double t_lo = 0.0;
  double t_hi = 5.0;
  std::uint64_t seed = 0;
  DuffingRanges ranges;
  std::vector<int> hidden_widths{256, 256, 256, 512};
  int h = 256;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  TrunkSpec trunk_spec() const;
  bool operator==(const TrainConfig&) const = default;
};

/// K parameter sets, beta = 0 and v0 = 0, drawn in the order
/// gamma, omega, alpha, delta, x0 from a stream seeded by config.seed.
std::vector<DuffingParams> sample_parameter_sets(const TrainConfig& config);

/// Same draw order as sample_parameter_sets with an explicit count, beta and
/// stream; used for evaluation instances.
std::vector<DuffingParams> sample_duffing(const DuffingRanges& ranges, int count, double beta,
                                          std::mt19937_64& rng);

/// N i.i.d. uniform times in [t_lo, t_hi).
std::vector<double> sample_collocation(const TrainConfig& config, int iteration,
                                       std::mt19937_64& rng);

double scheduled_learning_rate(const TrainConfig& config, int iteration);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
};

/// One Adam update with lr = lr0 * decay_factor^(iteration / decay_every).
void adam_step(Eigen::VectorXd& params, AdamState& state, const Eigen::VectorXd& grad,
               int iteration, const TrainConfig& config);

/// One training task: head k fits system (with u_star) under forcing.
struct HeadProblem {
  FirstOrderSystem system;
  CosineForcing forcing;
};

std::vector<HeadProblem> duffing_problems(std::span<const DuffingParams> sets);

/// Builds the loss batch (lifted forcings) for a set of collocation times.
LossBatch make_batch(std::span<const HeadProblem> problems, std::vector<double> t);

struct TrainResult {
  TrunkParams trunk;
  std::vector<HeadWeights> heads;
  std::vector<double> total_history;               // L_total per iteration
  std::vector<std::vector<double>> head_history;   // per iteration, per head
  bool diverged = false;
  std::string message;
  double seconds = 0.0;
};

using TrainProgress = std::function<void(int iteration, double total_loss)>;

/// Adam on L_total with a fresh collocation sample each iteration and the
/// boundary point t = 0 appended. Stops early (diverged = true) when the loss
/// exceeds 1e6 or becomes non-finite.
TrainResult train(TrunkParams trunk, std::vector<HeadWeights> heads,
                  std::span<const HeadProblem> problems, const TrainConfig& config,
                  const TrainProgress& progress = {});

/// Per-head loss on a uniform grid of n points spanning the training domain.
std::vector<double> grid_head_losses(const TrunkParams& trunk, std::span<const HeadWeights> heads,
                                     std::span<const HeadProblem> problems, double t_lo,
                                     double t_hi, int n);

}  // namespace pertl
