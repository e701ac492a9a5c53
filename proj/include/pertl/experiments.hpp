#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pertl/oracle.hpp"
#include "pertl/training.hpp"
#include "pertl/transfer.hpp"

namespace pertl {

struct ExperimentConfig {
  std::filesystem::path checkpoint = "out/checkpoint.json";
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;
  std::vector<int> p_values{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13};
  int sweep_instances = 5;
  int instance_count = 20;
  int comparison_p = 12;
  double beta = 0.5;
  DuffingRanges ranges;
  int transfer_grid_n = 400;
  int eval_grid_n = 1000;
  double t_lo = 0.0;
  double t_hi = 5.0;
  IntegratorConfig oracle;

  void validate() const;
};

/// Applies known experiment keys; returns the keys it did not recognize.
std::vector<std::string> apply_experiment_keys(const std::map<std::string, std::string>& kv,
                                               ExperimentConfig& config);
std::string experiment_config_to_text(const ExperimentConfig& config);

/// Evaluation instances: `count` Duffing equations with beta fixed, drawn
/// from a stream derived from seed and stream_tag.
std::vector<DuffingParams> evaluation_instances(const ExperimentConfig& config, int count,
                                                std::uint64_t stream_tag);

inline constexpr std::uint64_t kSweepStream = 1;
inline constexpr std::uint64_t kComparisonStream = 2;

struct SweepRow {
  int p = 0;
  std::vector<double> log10_loss;  // per instance; instance 0 is the fixed instance
  double median = 0.0;
};

struct SweepResult {
  std::vector<DuffingParams> instances;
  std::vector<SweepRow> rows;
};

double median(std::vector<double> values);

SweepResult run_p_sweep(const ExperimentConfig& config,
                        const std::shared_ptr<const FrozenTrunk>& trunk);

struct ComparisonRow {
  int instance = 0;
  DuffingParams params;
  double linf = 0.0;
  double rel_l2 = 0.0;
  double solve_seconds = 0.0;
  std::string status = "ok";
  std::vector<double> t;
  std::vector<double> x_tl;
  std::vector<double> x_oracle;
};

std::vector<ComparisonRow> run_comparison(const ExperimentConfig& config,
                                          const std::shared_ptr<const FrozenTrunk>& trunk);

/// Provenance line placed at the top of every CSV.
std::string provenance_comment(const std::string& config_hash, const std::string& checkpoint_hash);

std::string sweep_to_csv(const SweepResult& sweep, const std::string& provenance);
std::string comparison_to_csv(const std::vector<ComparisonRow>& rows, const std::string& provenance);
/// Long format: instance, t, x_tl, x_oracle.
std::string trajectories_to_csv(const std::vector<ComparisonRow>& rows, const std::string& provenance);

struct PlotOutputs {
  std::filesystem::path long_csv;
  std::vector<std::filesystem::path> svgs;
};

/// Reads the sweep, comparison and (optional) trajectory CSVs and writes
/// plot_data.csv (figure, series, x, y) plus SVG line charts into out_dir.
/// Throws std::invalid_argument on malformed input.
PlotOutputs emit_plot_data(const std::filesystem::path& sweep_csv,
                           const std::filesystem::path& comparison_csv,
                           const std::filesystem::path& trajectories_csv,
                           const std::filesystem::path& out_dir, bool write_svg = true);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace pertl
