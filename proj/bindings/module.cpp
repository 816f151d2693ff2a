#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "compositeflow/analysis.hpp"
#include "compositeflow/errors.hpp"
#include "compositeflow/dynamics.hpp"
#include "compositeflow/linear_map.hpp"
#include "compositeflow/problem.hpp"
#include "compositeflow/regularizer.hpp"
#include "compositeflow/solver.hpp"

namespace py = pybind11;
using namespace compositeflow;

namespace {

py::dict trajectory_to_dict(const Trajectory& trajectory) {
  const std::size_t n = trajectory.records.size();
  Eigen::VectorXd k(n), t(n), h(n), h_mu(n), step_norm(n), resid_zopt(n), resid_grad(n);
  for (std::size_t i = 0; i < n; ++i) {
    const TrajectoryRecord& rec = trajectory.records[i];
    k[static_cast<Eigen::Index>(i)] = static_cast<double>(rec.k);
    t[static_cast<Eigen::Index>(i)] = rec.t;
    h[static_cast<Eigen::Index>(i)] = rec.objective_h;
    h_mu[static_cast<Eigen::Index>(i)] = rec.objective_h_mu;
    step_norm[static_cast<Eigen::Index>(i)] = rec.step_norm;
    resid_zopt[static_cast<Eigen::Index>(i)] = rec.resid_zopt;
    resid_grad[static_cast<Eigen::Index>(i)] = rec.resid_grad;
  }
  py::dict out;
  out["k"] = k;
  out["t"] = t;
  out["H"] = h;
  out["H_mu"] = h_mu;
  out["step_norm"] = step_norm;
  out["resid_zopt"] = resid_zopt;
  out["resid_grad"] = resid_grad;
  out["final_x"] = trajectory.final_x;
  out["status"] = trajectory.status;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "linearized proximal ADMM solvers, continuous-time limits and analysis";

  py::register_exception<Error>(m, "CompositeflowError");

  py::class_<LinearMap>(m, "LinearMap")
      .def(py::init<Matrix, std::uint64_t>(), py::arg("matrix"), py::arg("seed") = 0)
      .def_static("identity", &LinearMap::identity, py::arg("n"))
      .def_static("from_csv", &LinearMap::from_csv, py::arg("path"), py::arg("seed") = 0)
      .def_property_readonly("rows", &LinearMap::rows)
      .def_property_readonly("cols", &LinearMap::cols)
      .def_property_readonly("matrix", &LinearMap::matrix)
      .def("apply", &LinearMap::apply, py::arg("x"))
      .def("apply_adjoint", &LinearMap::apply_adjoint, py::arg("y"))
      .def("gram_norm", py::overload_cast<>(&LinearMap::gram_norm, py::const_))
      .def("gram_norm", py::overload_cast<double, int>(&LinearMap::gram_norm, py::const_),
           py::arg("tol"), py::arg("max_iter"))
      .def("min_eig_gram_adjoint", &LinearMap::min_eig_gram_adjoint)
      .def("surjective", &LinearMap::surjective)
      .def("pinv_apply", &LinearMap::pinv_apply, py::arg("r"))
      .def("condition_number", &LinearMap::condition_number);

  py::class_<Regularizer>(m, "Regularizer")
      .def_static("l1", &Regularizer::l1, py::arg("weight"), py::arg("dim"))
      .def_static("mcp", &Regularizer::mcp, py::arg("weight"), py::arg("shape"),
                  py::arg("dim"))
      .def_static("scad", &Regularizer::scad, py::arg("weight"), py::arg("shape"),
                  py::arg("dim"))
      .def_property_readonly("modulus", &Regularizer::modulus)
      .def_property_readonly("lipschitz", &Regularizer::lipschitz)
      .def("value", &Regularizer::value, py::arg("y"))
      .def("prox", &Regularizer::prox, py::arg("sigma"), py::arg("y"));

  py::class_<EnvelopeView>(m, "EnvelopeView")
      .def(py::init<Regularizer, double>(), py::arg("base"), py::arg("mu"))
      .def_property_readonly("mu", &EnvelopeView::mu)
      .def("smoothness", &EnvelopeView::smoothness)
      .def("value", &EnvelopeView::value, py::arg("y"))
      .def("grad", &EnvelopeView::grad, py::arg("y"))
      .def("prox", &EnvelopeView::prox, py::arg("sigma"), py::arg("w"));

  py::class_<SmoothSum>(m, "SmoothSum")
      .def(py::init<Matrix, Vector>(), py::arg("data"), py::arg("targets"))
      .def_property_readonly("lipschitz", &SmoothSum::lipschitz)
      .def("value", &SmoothSum::value, py::arg("x"))
      .def("grad", &SmoothSum::grad, py::arg("x"));

  py::class_<NoiseSpec>(m, "NoiseSpec")
      .def_static("exact", &NoiseSpec::exact)
      .def_static("gaussian", &NoiseSpec::gaussian, py::arg("sigma"), py::arg("master_seed"))
      .def_static("minibatch", &NoiseSpec::minibatch, py::arg("batch"),
                  py::arg("master_seed"))
      .def("with_seed", &NoiseSpec::with_seed, py::arg("seed"));

  py::class_<CompositeProblem>(m, "CompositeProblem")
      .def(py::init<SmoothSum, Regularizer, LinearMap, double>(), py::arg("smooth"),
           py::arg("regularizer"), py::arg("op"), py::arg("mu"))
      .def_property_readonly("dim", &CompositeProblem::dim)
      .def_property_readonly("mu", &CompositeProblem::mu)
      .def_property_readonly("smoothness", &CompositeProblem::smoothness)
      .def("objective_H", &CompositeProblem::objective_H, py::arg("x"))
      .def("objective_H_mu", &CompositeProblem::objective_H_mu, py::arg("x"))
      .def("grad_full", &CompositeProblem::grad_full, py::arg("x"))
      .def("grad_stochastic", &CompositeProblem::grad_stochastic, py::arg("x"),
           py::arg("noise"), py::arg("step_index"))
      .def("grad_H_mu", &CompositeProblem::grad_H_mu, py::arg("x"))
      .def(
          "subgrad_residual",
          [](const CompositeProblem& p, const Vector& x, double tol) {
            const SubgradResidual sr = p.subgrad_residual(x, tol);
            py::dict out;
            out["achieved"] = sr.achieved;
            out["stationarity"] = sr.stationarity;
            out["minimizer"] = sr.minimizer;
            out["converged"] = sr.converged;
            return out;
          },
          py::arg("x"), py::arg("tol") = 1e-10)
      .def("lift_point", &CompositeProblem::lift_point, py::arg("x"))
      .def("eps_criticality_bound", &CompositeProblem::eps_criticality_bound)
      .def("max_mu_for_epsilon", &CompositeProblem::max_mu_for_epsilon, py::arg("eps"));

  m.def("make_identity_operator", &make_identity_operator, py::arg("n"));
  m.def("make_gaussian_operator", &make_gaussian_operator, py::arg("m"), py::arg("n"),
        py::arg("seed"), py::arg("sigma_min") = 0.5, py::arg("sigma_max") = 2.0);
  m.def("make_first_difference_operator", &make_first_difference_operator, py::arg("n"),
        py::arg("pad_to_square") = false);
  m.def("make_least_squares_data", &make_least_squares_data, py::arg("num_components"),
        py::arg("n"), py::arg("data_seed"), py::arg("target_noise") = 0.25);

  py::class_<SolverParams>(m, "SolverParams")
      .def(py::init<>())
      .def_readwrite("rho", &SolverParams::rho)
      .def_readwrite("eta", &SolverParams::eta)
      .def_readwrite("tau", &SolverParams::tau)
      .def_readwrite("alpha", &SolverParams::alpha)
      .def_readwrite("gamma", &SolverParams::gamma)
      .def_readwrite("iterations", &SolverParams::iterations)
      .def_readwrite("seed", &SolverParams::seed)
      .def_readonly("beta", &SolverParams::beta)
      .def_readonly("lambda_", &SolverParams::lambda)
      .def_readonly("gram_norm", &SolverParams::gram_norm);

  m.def(
      "validate_solver",
      [](SolverParams params, const CompositeProblem& p, const std::string& kind) {
        return validate(params, p.op(), p.regularizer(), p.mu(),
                        solver_kind_from_string(kind));
      },
      py::arg("params"), py::arg("problem"), py::arg("kind"));

  m.def(
      "run",
      [](const std::string& kind, const CompositeProblem& problem,
         const SolverParams& params, const NoiseSpec& noise, const Vector& x0) {
        RunOptions options;
        options.x0 = x0;
        return trajectory_to_dict(
            run(solver_kind_from_string(kind), problem, params, noise, options));
      },
      py::arg("kind"), py::arg("problem"), py::arg("params"), py::arg("noise"),
      py::arg("x0") = Vector());

  py::class_<FlowConfig>(m, "FlowConfig")
      .def(py::init<>())
      .def_readwrite("lambda_", &FlowConfig::lambda)
      .def_readwrite("dt", &FlowConfig::dt)
      .def_readwrite("horizon", &FlowConfig::horizon)
      .def_readwrite("rho", &FlowConfig::rho)
      .def_readwrite("t_min", &FlowConfig::t_min)
      .def_readwrite("gamma", &FlowConfig::gamma)
      .def_readwrite("alpha", &FlowConfig::alpha)
      .def_readwrite("x0", &FlowConfig::x0)
      .def_readwrite("v0", &FlowConfig::v0)
      .def_readwrite("seed", &FlowConfig::seed)
      .def_readwrite("noise", &FlowConfig::noise);

  py::class_<SampledPath>(m, "SampledPath")
      .def_readonly("times", &SampledPath::times)
      .def_readonly("states", &SampledPath::states)
      .def_readonly("velocities", &SampledPath::velocities)
      .def_readonly("H", &SampledPath::objective_h)
      .def_readonly("H_mu", &SampledPath::objective_h_mu)
      .def_readonly("resid", &SampledPath::resid)
      .def_readonly("step_norm", &SampledPath::step_norm)
      .def_readonly("status", &SampledPath::status);

  m.def(
      "simulate",
      [](const std::string& kind, const CompositeProblem& problem, const FlowConfig& cfg) {
        return simulate(flow_kind_from_string(kind), problem, cfg);
      },
      py::arg("kind"), py::arg("problem"), py::arg("config"));

  m.def(
      "weak_error",
      [](const CompositeProblem& problem, const std::vector<std::string>& fns,
         const std::vector<double>& rho_grid, double horizon, int seeds, double lambda,
         std::uint64_t master_seed, const Vector& x0) {
        std::vector<TestFunction> test_fns;
        for (const std::string& name : fns) {
          test_fns.push_back(test_function_from_string(name, problem));
        }
        const auto tables =
            weak_error(problem, test_fns, rho_grid, horizon, seeds, lambda, master_seed, x0);
        py::list out;
        for (const WeakErrorTable& table : tables) {
          py::dict t;
          t["test_fn"] = table.test_fn;
          t["slope"] = table.slope;
          t["slope_stderr"] = table.slope_stderr;
          py::list points;
          for (const WeakErrorPoint& p : table.points) {
            py::dict d;
            d["rho"] = p.rho;
            d["max_error"] = p.max_error;
            d["argmax_k"] = p.argmax_k;
            d["standard_error"] = p.standard_error;
            d["relative_se"] = p.relative_se;
            d["flagged"] = p.flagged;
            points.append(d);
          }
          t["points"] = points;
          out.append(t);
        }
        return out;
      },
      py::arg("problem"), py::arg("test_fns"), py::arg("rho_grid"), py::arg("horizon"),
      py::arg("seeds"), py::arg("lambda_"), py::arg("master_seed"),
      py::arg("x0") = Vector());

  m.def(
      "descent_audit",
      [](const SampledPath& path, const std::string& objective) {
        const DescentAudit audit = descent_audit(
            path, objective == "H" ? ObjectiveSeries::kH : ObjectiveSeries::kHMu);
        py::dict out;
        out["max_violation"] = audit.max_violation;
        out["argmax_index"] = audit.argmax_index;
        return out;
      },
      py::arg("path"), py::arg("objective") = "H_mu");

  m.def(
      "energy_identity_gap",
      [](const std::vector<SampledPath>& paths, double t1, double t2, double tolerance,
         std::uint64_t bootstrap_seed) {
        const EnergyGap gap = energy_identity_gap(paths, t1, t2, tolerance, bootstrap_seed);
        py::dict out;
        out["gap"] = gap.gap;
        out["lhs"] = gap.lhs;
        out["rhs"] = gap.rhs;
        out["standard_error"] = gap.standard_error;
        out["verdict"] = gap.verdict;
        return out;
      },
      py::arg("paths"), py::arg("t1"), py::arg("t2"), py::arg("tolerance") = 0.1,
      py::arg("bootstrap_seed") = 0);

  m.def("choose_c", &choose_c, py::arg("lambda_"), py::arg("gamma"), py::arg("lipschitz"));

  m.def(
      "lyapunov_audit",
      [](const std::vector<SampledPath>& paths, const CompositeProblem& problem,
         const FlowConfig& cfg, double c, std::uint64_t bootstrap_seed) {
        const LyapunovAudit audit = lyapunov_audit(paths, problem, cfg, c, bootstrap_seed);
        py::dict out;
        out["c"] = audit.c;
        out["a"] = audit.a;
        out["b"] = audit.b;
        out["times"] = audit.times;
        out["mean_series"] = audit.mean_series;
        out["increments"] = audit.increments;
        out["increment_se"] = audit.increment_se;
        out["pass"] = audit.pass;
        out["max_excess"] = audit.max_excess;
        return out;
      },
      py::arg("paths"), py::arg("problem"), py::arg("config"), py::arg("c"),
      py::arg("bootstrap_seed") = 0);

  m.def(
      "rate_fit",
      [](const std::vector<double>& times, const std::vector<double>& gaps,
         double reference) {
        const RateFit fit = rate_fit(times, gaps, reference);
        py::dict out;
        out["model"] = to_string(fit.model);
        out["amplitude"] = fit.amplitude;
        out["rate"] = fit.rate;
        out["theta_hat"] = fit.theta_hat;
        out["r_squared"] = fit.r_squared;
        out["window"] = py::make_tuple(fit.window_start, fit.window_end);
        out["points_used"] = fit.points_used;
        out["regime_mismatch"] = fit.regime_mismatch;
        return out;
      },
      py::arg("times"), py::arg("gaps"), py::arg("reference") = 0.0);

  m.def(
      "criticality_report",
      [](const CompositeProblem& problem, const Vector& x_final, double tol_abs) {
        const CriticalityReport report = criticality_report(problem, x_final, tol_abs);
        py::dict out;
        out["resid_smoothed"] = report.resid_smoothed;
        out["x_bar"] = report.x_bar;
        out["resid_at_x_bar"] = report.resid_at_x_bar;
        out["resid_certificate"] = report.resid_certificate;
        out["bound"] = report.bound;
        out["tol_stat"] = report.tol_stat;
        out["pass"] = report.pass;
        return out;
      },
      py::arg("problem"), py::arg("x_final"), py::arg("tol_abs") = 1e-9);
}
