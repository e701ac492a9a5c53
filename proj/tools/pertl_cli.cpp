// pertl: train a multi-head trunk for the Duffing class, solve new instances
// by one-shot transfer, and reproduce the loss-vs-p and oracle comparisons.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "pertl/errors.hpp"
#include "pertl/experiments.hpp"
#include "pertl/oracle.hpp"
#include "pertl/serialization.hpp"
#include "pertl/training.hpp"
#include "pertl/transfer.hpp"

namespace fs = std::filesystem;
using namespace pertl;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
};

struct Configs {
  TrainConfig train;
  ExperimentConfig experiment;
  std::string text;  // canonical text used for the config hash
};

Configs load_configs(const GlobalOptions& g) {
  Configs c;
  if (!g.config_path.empty()) {
    const auto kv = parse_key_values(read_file(g.config_path));
    const auto unknown_train = apply_train_keys(kv, c.train);
    const auto unknown_exp = apply_experiment_keys(kv, c.experiment);
    for (const auto& key : unknown_train) {
      if (std::find(unknown_exp.begin(), unknown_exp.end(), key) != unknown_exp.end()) {
        throw std::invalid_argument("config: unknown key '" + key + "'");
      }
    }
  }
  if (g.seed) {
    c.train.seed = *g.seed;
    c.experiment.seed = *g.seed;
  }
  c.experiment.out_dir = g.out_dir;
  c.text = train_config_to_text(c.train) + experiment_config_to_text(c.experiment);
  return c;
}

std::shared_ptr<const FrozenTrunk> load_trunk(const fs::path& checkpoint, const ExperimentConfig& cfg) {
  if (!fs::exists(checkpoint)) {
    throw std::invalid_argument("checkpoint not found: " + checkpoint.string());
  }
  const auto ckpt = load_checkpoint(checkpoint);
  return std::make_shared<const FrozenTrunk>(
      ckpt.trunk, FrozenTrunk::uniform_grid(cfg.t_lo, cfg.t_hi, cfg.transfer_grid_n));
}

int run_train(const GlobalOptions& g, std::optional<int> iterations) {
  Configs c = load_configs(g);
  if (iterations) c.train.iterations = *iterations;
  c.train.validate();
  const auto sets = sample_parameter_sets(c.train);
  const auto problems = duffing_problems(sets);
  const auto spec = c.train.trunk_spec();
  std::cerr << "training " << c.train.heads << " heads, " << c.train.iterations << " iterations\n";
  auto result = train(TrunkParams::init(spec, c.train.seed), init_heads(spec, c.train.heads, c.train.seed),
                      problems, c.train, [](int it, double loss) {
                        if (it % 100 == 0) std::cerr << "iteration " << it << " L_total " << loss << "\n";
                      });

  const fs::path out = g.out_dir;
  CsvTable hist;
  hist.comments.push_back(provenance_comment(content_hash(c.text), "none"));
  hist.header = {"iteration", "L_total"};
  for (int k = 1; k <= c.train.heads; ++k) hist.header.push_back("L_" + std::to_string(k));
  for (std::size_t it = 0; it < result.total_history.size(); ++it) {
    std::vector<std::string> row{std::to_string(it), format_double(result.total_history[it])};
    for (double l : result.head_history[it]) row.push_back(format_double(l));
    hist.rows.push_back(std::move(row));
  }
  write_file(out / "loss_history.csv", csv_to_text(hist));

  if (result.diverged) {
    std::cerr << "training diverged: " << result.message << "\n";
    return kExitNumerical;
  }
  Checkpoint ckpt;
  ckpt.config = c.train;
  ckpt.trunk = result.trunk;
  ckpt.heads = result.heads;
  ckpt.parameter_sets = sets;
  if (!result.total_history.empty()) {
    ckpt.final_total_loss = result.total_history.back();
    ckpt.final_head_losses = result.head_history.back();
  }
  save_checkpoint(ckpt, out / "checkpoint.json");
  std::cout << "checkpoint: " << (out / "checkpoint.json").string() << "\n"
            << "final_L_total: " << ckpt.final_total_loss << "\n"
            << "seconds: " << result.seconds << "\n";
  return 0;
}

struct SolveOptions {
  std::string checkpoint;
  DuffingParams params;
  int p = 12;
  std::string output;
  bool with_oracle = false;
};

int run_solve(const GlobalOptions& g, const SolveOptions& o) {
  const Configs c = load_configs(g);
  const fs::path ckpt_path = o.checkpoint.empty() ? fs::path(g.out_dir) / "checkpoint.json" : fs::path(o.checkpoint);
  const auto trunk = load_trunk(ckpt_path, c.experiment);
  const auto ode = duffing_ode(o.params);
  const auto cascade = build_cascade(ode, o.p);
  for (const auto& w : cascade.warnings) std::cerr << "warning: " << w << "\n";
  const auto sol = solve_cascade(ode, o.p, trunk, cascade);

  const auto grid = FrozenTrunk::uniform_grid(c.experiment.t_lo, c.experiment.t_hi, c.experiment.eval_grid_n);
  const auto out = sol.evaluate(grid);
  const auto loss = duffing_residual_loss(sol, o.params, grid);
  std::optional<Trajectory> oracle;
  if (o.with_oracle) {
    oracle = integrate_duffing(o.params, {o.params.x0, o.params.v0}, grid, c.experiment.oracle);
  }

  CsvTable t;
  t.comments.push_back(provenance_comment(content_hash(c.text), file_hash(ckpt_path)));
  t.header = {"t", "x_TL"};
  if (oracle) t.header.push_back("x_oracle");
  t.header.push_back("residual");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double x = out.u(0, k);
    const double r = out.u_dot(1, k) + o.params.delta * out.u_dot(0, k) + o.params.alpha * x +
                     o.params.beta * x * x * x - o.params.gamma * std::cos(o.params.omega * grid[i]);
    std::vector<std::string> row{format_double(grid[i]), format_double(x)};
    if (oracle) row.push_back(format_double(oracle->u[i](0)));
    row.push_back(format_double(r));
    t.rows.push_back(std::move(row));
  }
  const fs::path output = o.output.empty() ? fs::path(g.out_dir) / "solution.csv" : fs::path(o.output);
  write_file(output, csv_to_text(t));

  double order_total = 0.0;
  for (double s : sol.order_seconds) order_total += s;
  std::cout << "solution: " << output.string() << "\n"
            << "p: " << o.p << "\n"
            << "log10_duffing_loss: " << loss.log10_loss << "\n"
            << "condition_estimate: " << sol.condition_estimate << "\n"
            << "regularization: " << sol.regularization << "\n"
            << "assemble_seconds: " << sol.assemble_seconds << "\n"
            << "cascade_seconds: " << order_total << "\n"
            << "total_seconds: " << sol.total_seconds << "\n"
            << "reference_model_seconds: " << 0.5 * o.p + 1.0 << "\n";
  if (oracle) {
    std::vector<double> x_tl(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) x_tl[i] = out.u(0, static_cast<Eigen::Index>(i));
    const auto metrics = compare(x_tl, oracle->component(0));
    std::cout << "oracle_linf: " << metrics.linf << "\n"
              << "oracle_rel_l2: " << metrics.rel_l2 << "\n";
  }
  return 0;
}

int run_sweep(const GlobalOptions& g, const std::string& checkpoint) {
  const Configs c = load_configs(g);
  const fs::path ckpt = checkpoint.empty() ? c.experiment.checkpoint : fs::path(checkpoint);
  const auto trunk = load_trunk(ckpt, c.experiment);
  const auto sweep = run_p_sweep(c.experiment, trunk);
  const fs::path path = fs::path(g.out_dir) / "sweep.csv";
  write_file(path, sweep_to_csv(sweep, provenance_comment(content_hash(c.text), file_hash(ckpt))));
  for (const auto& row : sweep.rows) {
    std::cout << "p=" << row.p << " median_log10_loss=" << row.median << "\n";
  }
  std::cout << "sweep: " << path.string() << "\n";
  return 0;
}

int run_compare(const GlobalOptions& g, const std::string& checkpoint) {
  const Configs c = load_configs(g);
  const fs::path ckpt = checkpoint.empty() ? c.experiment.checkpoint : fs::path(checkpoint);
  const auto trunk = load_trunk(ckpt, c.experiment);
  const auto rows = run_comparison(c.experiment, trunk);
  const auto prov = provenance_comment(content_hash(c.text), file_hash(ckpt));
  const fs::path out = g.out_dir;
  write_file(out / "comparison.csv", comparison_to_csv(rows, prov));
  write_file(out / "trajectories.csv", trajectories_to_csv(rows, prov));
  int failed = 0;
  for (const auto& r : rows) {
    std::cout << "instance " << r.instance << " rel_l2=" << r.rel_l2 << " linf=" << r.linf
              << " seconds=" << r.solve_seconds << " " << r.status << "\n";
    if (r.status != "ok") ++failed;
  }
  std::cout << "comparison: " << (out / "comparison.csv").string() << "\n";
  return failed == static_cast<int>(rows.size()) ? kExitNumerical : 0;
}

int run_plot(const GlobalOptions& g, std::string sweep, std::string comparison, std::string trajectories,
             bool svg) {
  const fs::path out = g.out_dir;
  if (sweep.empty()) sweep = (out / "sweep.csv").string();
  if (comparison.empty()) comparison = (out / "comparison.csv").string();
  if (trajectories.empty()) trajectories = (out / "trajectories.csv").string();
  const auto outputs = emit_plot_data(sweep, comparison, trajectories, out, svg);
  std::cout << "plot_data: " << outputs.long_csv.string() << "\n";
  for (const auto& s : outputs.svgs) std::cout << "svg: " << s.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-shot transfer solver for polynomial-nonlinear ODEs (Duffing class)"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "override the seed from the config");
  app.add_option("--out", g.out_dir, "output directory")->capture_default_str();

  std::optional<int> iterations;
  auto* train_cmd = app.add_subcommand("train", "train the multi-head trunk on sampled class instances");
  train_cmd->add_option("--iterations", iterations, "override the iteration count");

  SolveOptions so;
  auto* solve_cmd = app.add_subcommand("solve", "solve one Duffing equation by one-shot transfer");
  solve_cmd->add_option("--checkpoint", so.checkpoint, "checkpoint (default <out>/checkpoint.json)");
  solve_cmd->add_option("--delta", so.params.delta)->required();
  solve_cmd->add_option("--alpha", so.params.alpha)->required();
  solve_cmd->add_option("--beta", so.params.beta)->required();
  solve_cmd->add_option("--gamma", so.params.gamma)->required();
  solve_cmd->add_option("--omega", so.params.omega)->required();
  solve_cmd->add_option("--x0", so.params.x0)->required();
  solve_cmd->add_option("--v0", so.params.v0, "initial velocity")->capture_default_str();
  solve_cmd->add_option("-p,--order", so.p, "perturbation truncation order")->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  solve_cmd->add_option("--output", so.output, "CSV path (default <out>/solution.csv)");
  solve_cmd->add_flag("--oracle", so.with_oracle, "also integrate with the Runge-Kutta oracle");

  std::string sweep_ckpt;
  auto* sweep_cmd = app.add_subcommand("sweep-p", "log10 Duffing loss across truncation orders");
  sweep_cmd->add_option("--checkpoint", sweep_ckpt, "checkpoint (default from config)");

  std::string compare_ckpt;
  auto* compare_cmd = app.add_subcommand("compare", "transfer vs. Runge-Kutta on random instances");
  compare_cmd->add_option("--checkpoint", compare_ckpt, "checkpoint (default from config)");

  std::string plot_sweep, plot_comparison, plot_traj;
  bool no_svg = false;
  auto* plot_cmd = app.add_subcommand("plot", "emit long-format plot data and SVG charts");
  plot_cmd->add_option("--sweep", plot_sweep, "sweep CSV (default <out>/sweep.csv)");
  plot_cmd->add_option("--comparison", plot_comparison, "comparison CSV (default <out>/comparison.csv)");
  plot_cmd->add_option("--trajectories", plot_traj, "trajectory CSV (default <out>/trajectories.csv)");
  plot_cmd->add_flag("--no-svg", no_svg, "skip SVG output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train_cmd) return run_train(g, iterations);
    if (*solve_cmd) return run_solve(g, so);
    if (*sweep_cmd) return run_sweep(g, sweep_ckpt);
    if (*compare_cmd) return run_compare(g, compare_ckpt);
    if (*plot_cmd) return run_plot(g, plot_sweep, plot_comparison, plot_traj, !no_svg);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
