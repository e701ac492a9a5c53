#include "pertl/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "pertl/serialization.hpp"

namespace pertl {

void ExperimentConfig::validate() const {
  if (p_values.empty()) throw std::invalid_argument("experiment: p_values must not be empty");
  for (int p : p_values) {
    if (p < 0) throw std::invalid_argument("experiment: p_values must be non-negative");
  }
  if (instance_count < 1) throw std::invalid_argument("experiment: instance_count must be >= 1");
  if (sweep_instances < 1) throw std::invalid_argument("experiment: sweep_instances must be >= 1");
  if (comparison_p < 0) throw std::invalid_argument("experiment: comparison_p must be >= 0");
  if (transfer_grid_n < 1 || eval_grid_n < 1) {
    throw std::invalid_argument("experiment: grid sizes must be >= 1");
  }
  if (!(t_lo < t_hi)) throw std::invalid_argument("experiment: need t_lo < t_hi");
  oracle.validate();
}

std::vector<std::string> apply_experiment_keys(const std::map<std::string, std::string>& kv,
                                               ExperimentConfig& c) {
  std::vector<std::string> unknown;
  for (const auto& [key, value] : kv) {
    if (key == "checkpoint") c.checkpoint = value;
    else if (key == "out") c.out_dir = value;
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "p_values") {
      c.p_values.clear();
      for (double v : parse_double_list(key, value)) c.p_values.push_back(static_cast<int>(v));
    } else if (key == "sweep_instances") c.sweep_instances = static_cast<int>(parse_int(key, value));
    else if (key == "instance_count") c.instance_count = static_cast<int>(parse_int(key, value));
    else if (key == "comparison_p") c.comparison_p = static_cast<int>(parse_int(key, value));
    else if (key == "beta") c.beta = parse_double(key, value);
    else if (key == "transfer_grid_n") c.transfer_grid_n = static_cast<int>(parse_int(key, value));
    else if (key == "eval_grid_n") c.eval_grid_n = static_cast<int>(parse_int(key, value));
    else if (key == "t_lo") c.t_lo = parse_double(key, value);
    else if (key == "t_hi") c.t_hi = parse_double(key, value);
    else if (key == "oracle_rel_tol") c.oracle.rel_tol = parse_double(key, value);
    else if (key == "oracle_abs_tol") c.oracle.abs_tol = parse_double(key, value);
    else if (key == "oracle_max_steps") c.oracle.max_steps = parse_int(key, value);
    else if (key == "range.gamma") c.ranges.gamma = parse_interval(key, value);
    else if (key == "range.omega") c.ranges.omega = parse_interval(key, value);
    else if (key == "range.alpha") c.ranges.alpha = parse_interval(key, value);
    else if (key == "range.delta") c.ranges.delta = parse_interval(key, value);
    else if (key == "range.x0") c.ranges.x0 = parse_interval(key, value);
    else unknown.push_back(key);
  }
  return unknown;
}

std::string experiment_config_to_text(const ExperimentConfig& c) {
  std::ostringstream os;
  auto interval = [](const Interval& i) { return format_double(i.lo) + ", " + format_double(i.hi); };
  os << "seed = " << c.seed << "\np_values = ";
  for (std::size_t i = 0; i < c.p_values.size(); ++i) os << (i ? ", " : "") << c.p_values[i];
  os << "\nsweep_instances = " << c.sweep_instances << "\ninstance_count = " << c.instance_count
     << "\ncomparison_p = " << c.comparison_p << "\nbeta = " << format_double(c.beta)
     << "\ntransfer_grid_n = " << c.transfer_grid_n << "\neval_grid_n = " << c.eval_grid_n
     << "\nt_lo = " << format_double(c.t_lo) << "\nt_hi = " << format_double(c.t_hi)
     << "\noracle_rel_tol = " << format_double(c.oracle.rel_tol)
     << "\noracle_abs_tol = " << format_double(c.oracle.abs_tol)
     << "\noracle_max_steps = " << c.oracle.max_steps
     << "\nrange.gamma = " << interval(c.ranges.gamma) << "\nrange.omega = " << interval(c.ranges.omega)
     << "\nrange.alpha = " << interval(c.ranges.alpha) << "\nrange.delta = " << interval(c.ranges.delta)
     << "\nrange.x0 = " << interval(c.ranges.x0) << "\n";
  return os.str();
}

std::vector<DuffingParams> evaluation_instances(const ExperimentConfig& config, int count,
                                                std::uint64_t stream_tag) {
  std::mt19937_64 rng(config.seed * 0x9e3779b97f4a7c15ULL + stream_tag);
  return sample_duffing(config.ranges, count, config.beta, rng);
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

SweepResult run_p_sweep(const ExperimentConfig& config,
                        const std::shared_ptr<const FrozenTrunk>& trunk) {
  config.validate();
  SweepResult result;
  result.instances = evaluation_instances(config, config.sweep_instances, kSweepStream);
  const auto grid = FrozenTrunk::uniform_grid(config.t_lo, config.t_hi, config.eval_grid_n);
  for (int p : config.p_values) {
    SweepRow row;
    row.p = p;
    for (const auto& inst : result.instances) {
      const auto sol = solve_cascade(duffing_ode(inst), p, trunk);
      row.log10_loss.push_back(duffing_residual_loss(sol, inst, grid).log10_loss);
    }
    row.median = median(row.log10_loss);
    result.rows.push_back(std::move(row));
  }
  return result;
}

std::vector<ComparisonRow> run_comparison(const ExperimentConfig& config,
                                          const std::shared_ptr<const FrozenTrunk>& trunk) {
  config.validate();
  const auto instances = evaluation_instances(config, config.instance_count, kComparisonStream);
  const auto grid = FrozenTrunk::uniform_grid(config.t_lo, config.t_hi, config.eval_grid_n);
  std::vector<ComparisonRow> rows;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    ComparisonRow row;
    row.instance = static_cast<int>(i);
    row.params = instances[i];
    row.t = grid;
    try {
      const auto start = std::chrono::steady_clock::now();
      const auto sol = solve_cascade(duffing_ode(row.params), config.comparison_p, trunk);
      const auto out = sol.evaluate(grid);
      row.solve_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      row.x_tl.resize(grid.size());
      for (std::size_t k = 0; k < grid.size(); ++k) row.x_tl[k] = out.u(0, static_cast<Eigen::Index>(k));
      const auto traj = integrate_duffing(row.params, {row.params.x0, row.params.v0}, grid, config.oracle);
      row.x_oracle = traj.component(0);
      const auto metrics = compare(row.x_tl, row.x_oracle);
      row.linf = metrics.linf;
      row.rel_l2 = metrics.rel_l2;
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
      row.linf = row.rel_l2 = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string provenance_comment(const std::string& config_hash, const std::string& checkpoint_hash) {
  return "config_hash=" + config_hash + " checkpoint_hash=" + checkpoint_hash;
}

std::string sweep_to_csv(const SweepResult& sweep, const std::string& provenance) {
  CsvTable t;
  t.comments.push_back(provenance);
  t.header.push_back("p");
  for (std::size_t i = 0; i < sweep.instances.size(); ++i) {
    t.header.push_back("log10_loss_" + std::to_string(i));
  }
  t.header.push_back("median_log10_loss");
  for (const auto& row : sweep.rows) {
    std::vector<std::string> r{std::to_string(row.p)};
    for (double v : row.log10_loss) r.push_back(format_double(v));
    r.push_back(format_double(row.median));
    t.rows.push_back(std::move(r));
  }
  return csv_to_text(t);
}

std::string comparison_to_csv(const std::vector<ComparisonRow>& rows, const std::string& provenance) {
  CsvTable t;
  t.comments.push_back(provenance);
  t.header = {"instance", "delta", "alpha", "beta", "gamma", "omega", "x0",
              "linf", "rel_l2", "solve_seconds", "status"};
  for (const auto& r : rows) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    t.rows.push_back({std::to_string(r.instance), format_double(r.params.delta),
                      format_double(r.params.alpha), format_double(r.params.beta),
                      format_double(r.params.gamma), format_double(r.params.omega),
                      format_double(r.params.x0), format_double(r.linf), format_double(r.rel_l2),
                      format_double(r.solve_seconds), status});
  }
  return csv_to_text(t);
}

std::string trajectories_to_csv(const std::vector<ComparisonRow>& rows, const std::string& provenance) {
  CsvTable t;
  t.comments.push_back(provenance);
  t.header = {"instance", "t", "x_tl", "x_oracle"};
  for (const auto& r : rows) {
    if (r.status != "ok") continue;
    for (std::size_t k = 0; k < r.t.size(); ++k) {
      t.rows.push_back({std::to_string(r.instance), format_double(r.t[k]), format_double(r.x_tl[k]),
                        format_double(r.x_oracle[k])});
    }
  }
  return csv_to_text(t);
}

namespace {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string render_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                       const std::vector<Series>& series) {
  constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 55;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (double v : s.x) { xmin = std::min(xmin, v); xmax = std::max(xmax, v); }
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (!std::isfinite(xmin)) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n"
     << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    os << "<text x=\"" << sx(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
       << format_double(std::round(xv * 100) / 100) << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">"
       << format_double(std::round(yv * 100) / 100) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel
     << "</text>\n"
     << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << ylabel << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    os << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kPalette[(k / 2) % 10]
       << "\"" << (s.dashed ? " stroke-dasharray=\"5,4\"" : "") << " points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      os << sx(s.x[i]) << "," << sy(s.y[i]) << " ";
    }
    os << "\"><title>" << s.name << "</title></polyline>\n";
  }
  os << "</svg>\n";
  return os.str();
}

double cell_double(const CsvTable& t, const std::vector<std::string>& row, std::size_t col) {
  try {
    return std::stod(row.at(col));
  } catch (const std::exception&) {
    throw std::invalid_argument("csv: column '" + t.header.at(col) + "' holds non-numeric '" +
                                row.at(col) + "'");
  }
}

}  // namespace

PlotOutputs emit_plot_data(const std::filesystem::path& sweep_csv,
                           const std::filesystem::path& comparison_csv,
                           const std::filesystem::path& trajectories_csv,
                           const std::filesystem::path& out_dir, bool write_svg) {
  const CsvTable sweep = parse_csv(read_file(sweep_csv));
  const CsvTable comparison = parse_csv(read_file(comparison_csv));
  const std::size_t p_col = sweep.column("p");
  const std::size_t med_col = sweep.column("median_log10_loss");
  for (const char* col : {"instance", "linf", "rel_l2"}) comparison.column(col);

  CsvTable out;
  for (const auto& c : sweep.comments) out.comments.push_back("sweep " + c);
  out.header = {"figure", "series", "x", "y"};

  std::vector<Series> sweep_series;
  for (std::size_t c = 0; c < sweep.header.size(); ++c) {
    if (c == p_col) continue;
    Series s{sweep.header[c], {}, {}, c != med_col};
    for (const auto& row : sweep.rows) {
      s.x.push_back(cell_double(sweep, row, p_col));
      s.y.push_back(cell_double(sweep, row, c));
      out.rows.push_back({"loss_vs_p", s.name, row[p_col], row[c]});
    }
    sweep_series.push_back(std::move(s));
  }

  std::vector<Series> traj_series;
  if (!trajectories_csv.empty() && std::filesystem::exists(trajectories_csv)) {
    const CsvTable traj = parse_csv(read_file(trajectories_csv));
    const std::size_t ic = traj.column("instance"), tc = traj.column("t"),
                      tl = traj.column("x_tl"), oc = traj.column("x_oracle");
    std::map<std::string, std::pair<Series, Series>> by_instance;
    for (const auto& row : traj.rows) {
      auto& [a, b] = by_instance[row[ic]];
      a.name = "instance_" + row[ic] + "_tl";
      b.name = "instance_" + row[ic] + "_oracle";
      b.dashed = true;
      const double t = cell_double(traj, row, tc);
      a.x.push_back(t);
      a.y.push_back(cell_double(traj, row, tl));
      b.x.push_back(t);
      b.y.push_back(cell_double(traj, row, oc));
      out.rows.push_back({"trajectories", a.name, row[tc], row[tl]});
      out.rows.push_back({"trajectories", b.name, row[tc], row[oc]});
    }
    for (auto& [_, pair] : by_instance) {
      traj_series.push_back(std::move(pair.first));
      traj_series.push_back(std::move(pair.second));
    }
  }
  const std::size_t ic = comparison.column("instance");
  for (const auto& row : comparison.rows) {
    out.rows.push_back({"rel_l2", "instance_" + row[ic], row[ic], row[comparison.column("rel_l2")]});
  }

  PlotOutputs outputs;
  outputs.long_csv = out_dir / "plot_data.csv";
  write_file(outputs.long_csv, csv_to_text(out));
  if (write_svg) {
    outputs.svgs.push_back(out_dir / "loss_vs_p.svg");
    write_file(outputs.svgs.back(),
               render_svg("Duffing residual loss vs. p", "p", "log10 loss", sweep_series));
    outputs.svgs.push_back(out_dir / "trajectories.svg");
    write_file(outputs.svgs.back(),
               render_svg("Transfer (solid) vs. Runge-Kutta (dashed)", "t", "x(t)", traj_series));
  }
  return outputs;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need >= 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) { mx += x[i]; my += y[i]; }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: x values are all equal");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

}  // namespace pertl
