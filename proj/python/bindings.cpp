#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pertl/duffing.hpp"
#include "pertl/errors.hpp"
#include "pertl/experiments.hpp"
#include "pertl/oracle.hpp"
#include "pertl/perturbation.hpp"
#include "pertl/reduction.hpp"
#include "pertl/serialization.hpp"
#include "pertl/training.hpp"
#include "pertl/transfer.hpp"

namespace py = pybind11;
using namespace pertl;

namespace {

PolynomialNonlinearODE make_ode(std::vector<double> g, int q, double epsilon, double bc_value,
                                std::vector<double> bc_derivatives) {
  PolynomialNonlinearODE ode;
  ode.g = std::move(g);
  ode.q = q;
  ode.epsilon = epsilon;
  ode.bc_value = bc_value;
  ode.bc_derivatives = std::move(bc_derivatives);
  if (ode.bc_derivatives.empty() && ode.g.size() > 2) ode.bc_derivatives.assign(ode.g.size() - 2, 0.0);
  return ode;
}

Checkpoint train_checkpoint(const TrainConfig& config) {
  config.validate();
  const auto sets = sample_parameter_sets(config);
  const auto problems = duffing_problems(sets);
  const auto spec = config.trunk_spec();
  TrainResult result;
  {
    py::gil_scoped_release release;
    result = train(TrunkParams::init(spec, config.seed), init_heads(spec, config.heads, config.seed),
                   problems, config);
  }
  if (result.diverged) throw NumericalError("training diverged: " + result.message);
  Checkpoint ck;
  ck.config = config;
  ck.trunk = std::move(result.trunk);
  ck.heads = std::move(result.heads);
  ck.parameter_sets = sets;
  ck.final_total_loss = result.total_history.back();
  ck.final_head_losses = result.head_history.back();
  return ck;
}

py::dict solve_duffing(const std::shared_ptr<const FrozenTrunk>& trunk, const DuffingParams& params, int p,
                       const std::vector<double>& t) {
  NormalMatrix::reset_factorization_count();
  const auto sol = solve_cascade(duffing_ode(params), p, trunk);
  const auto out = sol.evaluate(t);
  const auto loss = duffing_residual_loss(sol, params, trunk->grid());
  py::dict d;
  d["x"] = Eigen::VectorXd(out.u.row(0).transpose());
  d["x_dot"] = Eigen::VectorXd(out.u_dot.row(0).transpose());
  d["log10_loss"] = loss.log10_loss;
  d["seconds"] = sol.total_seconds;
  d["condition_estimate"] = sol.condition_estimate;
  d["factorizations"] = NormalMatrix::factorization_count();
  d["heads"] = sol.W;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Perturbation cascades solved by one-shot transfer on a frozen PINN trunk";

  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<DuffingParams>(m, "DuffingParams")
      .def(py::init([](double delta, double alpha, double beta, double gamma, double omega, double x0,
                       double v0) { return DuffingParams{delta, alpha, beta, gamma, omega, x0, v0}; }),
           py::kw_only(), py::arg("delta"), py::arg("alpha"), py::arg("beta"), py::arg("gamma"),
           py::arg("omega"), py::arg("x0"), py::arg("v0") = 0.0)
      .def_readwrite("delta", &DuffingParams::delta)
      .def_readwrite("alpha", &DuffingParams::alpha)
      .def_readwrite("beta", &DuffingParams::beta)
      .def_readwrite("gamma", &DuffingParams::gamma)
      .def_readwrite("omega", &DuffingParams::omega)
      .def_readwrite("x0", &DuffingParams::x0)
      .def_readwrite("v0", &DuffingParams::v0)
      .def("__repr__", [](const DuffingParams& d) {
        return "DuffingParams(delta=" + format_double(d.delta) + ", alpha=" + format_double(d.alpha) +
               ", beta=" + format_double(d.beta) + ", gamma=" + format_double(d.gamma) +
               ", omega=" + format_double(d.omega) + ", x0=" + format_double(d.x0) +
               ", v0=" + format_double(d.v0) + ")";
      });

  py::class_<CascadeSpec>(m, "CascadeSpec")
      .def_readonly("p", &CascadeSpec::p)
      .def_readonly("q", &CascadeSpec::q)
      .def_readonly("epsilon", &CascadeSpec::epsilon)
      .def_readonly("bc_scale", &CascadeSpec::bc_scale)
      .def_readonly("warnings", &CascadeSpec::warnings)
      .def_property_readonly("terms",
                             [](const CascadeSpec& s) {
                               std::vector<std::vector<std::pair<double, std::vector<int>>>> out;
                               for (const auto& order : s.terms) {
                                 auto& row = out.emplace_back();
                                 for (const auto& t : order) row.emplace_back(t.coefficient, t.exponents);
                               }
                               return out;
                             })
      .def("to_json", &cascade_to_text);

  m.def("enumerate_multi_indices", &enumerate_multi_indices, py::arg("q"), py::arg("p"), py::arg("j"));
  m.def("multinomial_coefficient",
        [](int q, const std::vector<int>& k) { return multinomial_coefficient(q, k); }, py::arg("q"),
        py::arg("k"));
  m.def(
      "build_cascade",
      [](std::vector<double> g, int q, double epsilon, int p, double bc_value, std::vector<double> bc_derivatives) {
        return build_cascade(make_ode(std::move(g), q, epsilon, bc_value, std::move(bc_derivatives)), p);
      },
      py::arg("g"), py::arg("q"), py::arg("epsilon"), py::arg("p"), py::arg("bc_value") = 0.0,
      py::arg("bc_derivatives") = std::vector<double>{});
  m.def(
      "build_system",
      [](const std::vector<double>& g) {
        const auto s = build_system(g);
        return py::make_tuple(s.A, s.B);
      },
      py::arg("g"), "First-order reduction (A, B) of sum_j g_j d^j/dt^j.");

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("heads", &TrainConfig::heads)
      .def_readwrite("iterations", &TrainConfig::iterations)
      .def_readwrite("lr0", &TrainConfig::lr0)
      .def_readwrite("decay_factor", &TrainConfig::decay_factor)
      .def_readwrite("decay_every", &TrainConfig::decay_every)
      .def_readwrite("collocation_n", &TrainConfig::collocation_n)
      .def_readwrite("t_lo", &TrainConfig::t_lo)
      .def_readwrite("t_hi", &TrainConfig::t_hi)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("hidden_widths", &TrainConfig::hidden_widths)
      .def_readwrite("h", &TrainConfig::h)
      .def("validate", &TrainConfig::validate)
      .def("to_text", &train_config_to_text);

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_readonly("config", &Checkpoint::config)
      .def_readonly("final_total_loss", &Checkpoint::final_total_loss)
      .def_readonly("final_head_losses", &Checkpoint::final_head_losses)
      .def_readonly("parameter_sets", &Checkpoint::parameter_sets)
      .def("save", [](const Checkpoint& c, const std::filesystem::path& path) { save_checkpoint(c, path); });

  m.def("train", &train_checkpoint, py::arg("config"),
        "Trains the multi-head trunk on the Duffing class and returns a checkpoint.");
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  py::class_<FrozenTrunk, std::shared_ptr<FrozenTrunk>>(m, "Trunk")
      .def(py::init([](const Checkpoint& c, double t_lo, double t_hi, int n) {
             return std::make_shared<FrozenTrunk>(c.trunk, FrozenTrunk::uniform_grid(t_lo, t_hi, n));
           }),
           py::arg("checkpoint"), py::arg("t_lo") = 0.0, py::arg("t_hi") = 5.0, py::arg("n") = 400)
      .def_property_readonly("m", &FrozenTrunk::m)
      .def_property_readonly("h", &FrozenTrunk::h)
      .def_property_readonly("grid", &FrozenTrunk::grid);

  m.def(
      "solve_duffing",
      [](const std::shared_ptr<FrozenTrunk>& trunk, const DuffingParams& params, int p,
         const std::vector<double>& t) { return solve_duffing(trunk, params, p, t); },
      py::arg("trunk"), py::arg("params"), py::arg("p"), py::arg("t"),
      "One-shot solve of the order-p cascade; returns x, x_dot on t plus diagnostics.");

  m.def(
      "integrate_duffing",
      [](const DuffingParams& params, const std::vector<double>& t, double rel_tol, double abs_tol) {
        IntegratorConfig cfg;
        cfg.rel_tol = rel_tol;
        cfg.abs_tol = abs_tol;
        const auto traj = integrate_duffing(params, {params.x0, params.v0}, t, cfg);
        return traj.component(0);
      },
      py::arg("params"), py::arg("t"), py::arg("rel_tol") = 1e-12, py::arg("abs_tol") = 1e-12,
      "Runge-Kutta reference x(t).");

  m.def(
      "p_sweep",
      [](const std::shared_ptr<FrozenTrunk>& trunk, std::vector<int> p_values, int instances, std::uint64_t seed,
         double beta) {
        ExperimentConfig cfg;
        cfg.p_values = std::move(p_values);
        cfg.sweep_instances = instances;
        cfg.seed = seed;
        cfg.beta = beta;
        const auto r = run_p_sweep(cfg, trunk);
        py::dict out;
        for (const auto& row : r.rows) out[py::int_(row.p)] = row.log10_loss;
        return out;
      },
      py::arg("trunk"), py::arg("p_values"), py::arg("instances") = 5, py::arg("seed") = 0,
      py::arg("beta") = 0.5, "log10 Duffing residual loss per instance for each p.");
}
