#include <doctest.h>

#include <filesystem>

#include "pertl/experiments.hpp"
#include "pertl/serialization.hpp"

using namespace pertl;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("pertl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::shared_ptr<const FrozenTrunk> random_trunk(const ExperimentConfig& cfg) {
  TrunkSpec spec;
  spec.hidden_widths = {16, 16, 24};
  spec.m = 2;
  spec.h = 12;
  return std::make_shared<const FrozenTrunk>(
      TrunkParams::init(spec, 5), FrozenTrunk::uniform_grid(cfg.t_lo, cfg.t_hi, cfg.transfer_grid_n));
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.p_values = {0, 1, 2};
  cfg.sweep_instances = 3;
  cfg.instance_count = 2;
  cfg.comparison_p = 2;
  cfg.transfer_grid_n = 80;
  cfg.eval_grid_n = 40;
  cfg.oracle.rel_tol = cfg.oracle.abs_tol = 1e-9;
  return cfg;
}

}  // namespace

TEST_CASE("median") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS(median({}));
}

TEST_CASE("fit_line") {
  const std::vector<double> x{2, 4, 8, 12}, y{1.5, 2.5, 4.5, 6.5};
  const auto f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(0.5));
  CHECK(f.intercept == doctest::Approx(0.5));
  CHECK(f.r_squared == doctest::Approx(1.0));
  const std::vector<double> noisy{1.0, 3.0, 2.0, 4.0};
  CHECK(fit_line(x, noisy).r_squared < 1.0);
}

TEST_CASE("evaluation instances are seeded per stream") {
  ExperimentConfig cfg;
  const auto a = evaluation_instances(cfg, 5, kSweepStream);
  CHECK(a == evaluation_instances(cfg, 5, kSweepStream));
  CHECK(a != evaluation_instances(cfg, 5, kComparisonStream));
  for (const auto& d : a) {
    CHECK(d.beta == 0.5);
    CHECK(d.v0 == 0.0);
    CHECK(d.alpha >= 0.5);
    CHECK(d.alpha <= 4.5);
  }
  cfg.seed = 99;
  CHECK(a != evaluation_instances(cfg, 5, kSweepStream));
}

TEST_CASE("experiment keys") {
  ExperimentConfig cfg;
  const auto unknown = apply_experiment_keys(
      parse_key_values("p_values = 0, 2, 5\nbeta = 0.25\ncomparison_p = 5\nheads = 3\n"), cfg);
  CHECK(unknown == std::vector<std::string>{"heads"});
  CHECK(cfg.p_values == std::vector<int>{0, 2, 5});
  CHECK(cfg.beta == 0.25);
  ExperimentConfig back;
  CHECK(apply_experiment_keys(parse_key_values(experiment_config_to_text(cfg)), back).empty());
  CHECK(back.p_values == cfg.p_values);
  CHECK(back.beta == cfg.beta);
  apply_experiment_keys(parse_key_values("p_values = 1, -2\n"), cfg);
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("sweep and comparison produce well-formed tables") {
  const auto cfg = small_config();
  const auto trunk = random_trunk(cfg);
  const auto sweep = run_p_sweep(cfg, trunk);
  REQUIRE(sweep.rows.size() == 3);
  CHECK(sweep.instances.size() == 3);
  for (const auto& row : sweep.rows) {
    CHECK(row.log10_loss.size() == 3);
    CHECK(row.median == median(row.log10_loss));
  }
  const auto csv = parse_csv(sweep_to_csv(sweep, provenance_comment("c", "k")));
  CHECK(csv.comments == std::vector<std::string>{"config_hash=c checkpoint_hash=k"});
  CHECK(csv.header == std::vector<std::string>{"p", "log10_loss_0", "log10_loss_1", "log10_loss_2",
                                               "median_log10_loss"});
  CHECK(csv.rows.size() == 3);

  const auto rows = run_comparison(cfg, trunk);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.status == "ok");
    CHECK(r.x_tl.size() == 40);
    CHECK(r.x_oracle.size() == 40);
    CHECK(std::isfinite(r.rel_l2));
  }
  const auto cmp = parse_csv(comparison_to_csv(rows, "p"));
  CHECK(cmp.header == std::vector<std::string>{"instance", "delta", "alpha", "beta", "gamma", "omega",
                                               "x0", "linf", "rel_l2", "solve_seconds", "status"});
  const auto traj = parse_csv(trajectories_to_csv(rows, "p"));
  CHECK(traj.header == std::vector<std::string>{"instance", "t", "x_tl", "x_oracle"});
  CHECK(traj.rows.size() == 80);
}

TEST_CASE("sweep output is deterministic") {
  const auto cfg = small_config();
  const auto trunk = random_trunk(cfg);
  CHECK(sweep_to_csv(run_p_sweep(cfg, trunk), "x") == sweep_to_csv(run_p_sweep(cfg, trunk), "x"));
}

TEST_CASE("plot data long format") {
  const auto dir = temp_dir("plot");
  write_file(dir / "sweep.csv",
             "# config_hash=a checkpoint_hash=b\np,log10_loss_0,median_log10_loss\n0,-1,-1\n1,-2.5,-2.5\n");
  write_file(dir / "comparison.csv",
             "instance,delta,alpha,beta,gamma,omega,x0,linf,rel_l2,solve_seconds,status\n"
             "0,1,1,0.5,1,1,0,0.1,0.01,0.2,ok\n");
  write_file(dir / "trajectories.csv", "instance,t,x_tl,x_oracle\n0,0.5,1,1.1\n");
  const auto out = emit_plot_data(dir / "sweep.csv", dir / "comparison.csv", dir / "trajectories.csv", dir);
  const std::string expected =
      "# sweep config_hash=a checkpoint_hash=b\n"
      "figure,series,x,y\n"
      "loss_vs_p,log10_loss_0,0,-1\n"
      "loss_vs_p,log10_loss_0,1,-2.5\n"
      "loss_vs_p,median_log10_loss,0,-1\n"
      "loss_vs_p,median_log10_loss,1,-2.5\n"
      "trajectories,instance_0_tl,0.5,1\n"
      "trajectories,instance_0_oracle,0.5,1.1\n"
      "rel_l2,instance_0,0,0.01\n";
  CHECK(read_file(out.long_csv) == expected);
  REQUIRE(out.svgs.size() == 2);
  CHECK(read_file(out.svgs[0]).rfind("<svg", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("plot data with an empty comparison keeps the header") {
  const auto dir = temp_dir("plot_empty");
  write_file(dir / "sweep.csv", "p,median_log10_loss\n");
  write_file(dir / "comparison.csv", "instance,linf,rel_l2\n");
  const auto out = emit_plot_data(dir / "sweep.csv", dir / "comparison.csv", "", dir, false);
  CHECK(read_file(out.long_csv) == "figure,series,x,y\n");
  CHECK(out.svgs.empty());
  write_file(dir / "bad.csv", "p,other\n0,1\n");
  CHECK_THROWS_AS(emit_plot_data(dir / "bad.csv", dir / "comparison.csv", "", dir, false),
                  std::invalid_argument);
  std::filesystem::remove_all(dir);
}
