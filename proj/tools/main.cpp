#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "compositeflow/analysis.hpp"
#include "compositeflow/csv.hpp"
#include "compositeflow/dynamics.hpp"
#include "compositeflow/errors.hpp"
#include "compositeflow/harness.hpp"
#include "compositeflow/rng.hpp"
#include "compositeflow/solver.hpp"

namespace cf = compositeflow;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  int seeds = 0;
  int jobs = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool config_required = true) {
  auto* c = cmd->add_option("--config", opts.config_path, "path to the run config JSON");
  if (config_required) c->required();
  cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
  cmd->add_option("--seeds", opts.seeds, "ensemble size (overrides config)");
  cmd->add_option("--jobs", opts.jobs, "worker count (overrides config)");
}

cf::RunConfig load(const CommonOptions& opts) {
  cf::RunConfig config = cf::load_config(opts.config_path);
  if (!opts.out_dir.empty()) config.output.dir = opts.out_dir;
  if (opts.seeds > 0) config.ensemble.size = opts.seeds;
  if (opts.jobs > 0) config.ensemble.jobs = opts.jobs;
  config.echo = cf::config_to_json(config);
  return config;
}

cf::Vector x0_of(const cf::RunConfig& config) {
  if (config.problem.x0.empty()) return cf::Vector();
  return Eigen::Map<const cf::Vector>(config.problem.x0.data(),
                                      static_cast<Eigen::Index>(config.problem.x0.size()));
}

/// Ensemble of sampled paths with per-member derived seeds; shared by the
/// energy and Lyapunov audits.
std::vector<cf::SampledPath> simulate_ensemble(const cf::RunConfig& config,
                                               const cf::CompositeProblem& problem,
                                               cf::FlowKind kind) {
  cf::FlowConfig cfg = cf::validate(config.flow, problem, kind);
  cfg.x0 = x0_of(config);
  std::vector<cf::SampledPath> paths;
  const std::uint64_t master = cf::master_seed_of(config);
  for (int i = 0; i < config.ensemble.size; ++i) {
    cf::FlowConfig seeded = cfg;
    seeded.seed = cf::derive_seed(master, static_cast<std::uint64_t>(i));
    paths.push_back(cf::simulate(kind, problem, seeded));
    if (paths.back().status != "ok") {
      throw cf::DivergenceError("ensemble member " + std::to_string(i) + " diverged");
    }
  }
  return paths;
}

int cmd_run(const CommonOptions& opts) {
  cf::RunConfig config = load(opts);
  if (!config.is_solver_kind()) {
    throw cf::ConfigError("'run' expects a solver algorithm (lp_admm|lp_sadmm|acc_lp_sadmm)");
  }
  config.ensemble.size = 1;
  const cf::RunManifest manifest = cf::run_ensemble(config);
  std::cout << "wrote " << config.output.dir << "/" << manifest.outputs.front().file << "\n";
  return manifest.outputs.front().status == "ok" ? 0 : 3;
}

int cmd_ensemble(const CommonOptions& opts) {
  const cf::RunConfig config = load(opts);
  const cf::RunManifest manifest = cf::run_ensemble(config);
  int diverged = 0;
  for (const cf::SeedOutput& out : manifest.outputs) {
    if (out.status != "ok") ++diverged;
  }
  std::cout << "wrote " << manifest.outputs.size() << " member files to " << config.output.dir
            << " (" << diverged << " diverged)\n";
  return diverged == 0 ? 0 : 3;
}

int cmd_dynamics(const CommonOptions& opts, const std::string& kind_name) {
  cf::RunConfig config = load(opts);
  config.algorithm = kind_name;
  config.ensemble.size = 1;
  config.echo = cf::config_to_json(config);
  const cf::RunManifest manifest = cf::run_ensemble(config);
  std::cout << "wrote " << config.output.dir << "/" << manifest.outputs.front().file << "\n";
  return manifest.outputs.front().status == "ok" ? 0 : 3;
}

int cmd_weak_order(const CommonOptions& opts) {
  cf::RunConfig config = load(opts);
  const cf::CompositeProblem problem = cf::build_problem(config.problem);
  if (config.analysis.rho_grid.size() < 2) {
    throw cf::ConfigError("weak-order requires 'analysis.rho_grid' with at least 2 entries");
  }
  const double lambda =
      config.analysis.weak_lambda > 0 ? config.analysis.weak_lambda : config.flow.lambda;
  std::vector<cf::TestFunction> fns;
  for (const std::string& name : config.analysis.test_fns) {
    fns.push_back(cf::test_function_from_string(name, problem));
  }
  const int seeds = opts.seeds > 0 ? opts.seeds : config.analysis.weak_seeds;
  const auto tables =
      cf::weak_error(problem, fns, config.analysis.rho_grid, config.analysis.weak_horizon,
                     seeds, lambda, cf::master_seed_of(config), x0_of(config));

  cf::Json j;
  j["analysis"] = "weak_order";
  j["config"] = config.echo;
  j["lambda"] = lambda;
  j["seeds"] = seeds;
  cf::Json out_tables = cf::Json::array();
  bool any_flagged = false;
  for (const cf::WeakErrorTable& table : tables) {
    cf::Json t;
    t["test_fn"] = table.test_fn;
    t["slope"] = table.slope;
    t["slope_stderr"] = table.slope_stderr;
    cf::Json points = cf::Json::array();
    cf::Json series = cf::Json::array();
    for (const cf::WeakErrorPoint& p : table.points) {
      points.push_back(cf::Json{{"rho", p.rho},
                                {"max_error", p.max_error},
                                {"argmax_k", p.argmax_k},
                                {"standard_error", p.standard_error},
                                {"relative_se", p.relative_se},
                                {"flagged", p.flagged}});
      series.push_back(cf::Json::array({p.rho, p.max_error}));
      any_flagged = any_flagged || p.flagged;
    }
    t["points"] = points;
    t["series"] = series;
    out_tables.push_back(t);
  }
  j["tables"] = out_tables;
  if (!out_tables.empty()) {
    j["slope"] = out_tables.front()["slope"];
    j["series"] = out_tables.front()["series"];
  }
  j["flagged"] = any_flagged;
  std::filesystem::create_directories(config.output.dir);
  cf::write_json(config.output.dir + "/weak_order_report.json", j);
  std::cout << "weak-order slope: " << j["slope"].dump() << (any_flagged ? " (flagged)" : "")
            << "\n";
  return 0;
}

int cmd_audit_descent(const CommonOptions& opts) {
  cf::RunConfig config = load(opts);
  const cf::CompositeProblem problem = cf::build_problem(config.problem);
  cf::FlowConfig cfg = cf::validate(config.flow, problem, cf::FlowKind::kFlow);
  cfg.x0 = x0_of(config);
  const cf::SampledPath path = cf::simulate(cf::FlowKind::kFlow, problem, cfg);
  if (path.status != "ok") throw cf::DivergenceError("flow diverged");
  const cf::ObjectiveSeries which = config.analysis.objective == "H"
                                        ? cf::ObjectiveSeries::kH
                                        : cf::ObjectiveSeries::kHMu;
  const cf::DescentAudit audit = cf::descent_audit(path, which);
  const double h0 = config.analysis.objective == "H" ? path.objective_h.front()
                                                     : path.objective_h_mu.front();
  const double tolerance = 1e-6 * (1.0 + std::abs(h0));

  cf::Json j;
  j["analysis"] = "descent";
  j["config"] = config.echo;
  j["objective"] = config.analysis.objective;
  j["max_violation"] = audit.max_violation;
  j["argmax_index"] = audit.argmax_index;
  j["tolerance"] = tolerance;
  j["pass"] = audit.max_violation <= tolerance;
  cf::Json series = cf::Json::array();
  for (std::size_t i = 0; i < path.size(); ++i) {
    series.push_back(cf::Json::array(
        {path.times[i],
         which == cf::ObjectiveSeries::kH ? path.objective_h[i] : path.objective_h_mu[i]}));
  }
  j["series"] = series;
  std::filesystem::create_directories(config.output.dir);
  cf::write_json(config.output.dir + "/descent_report.json", j);
  std::cout << "descent max violation: " << audit.max_violation << " (tolerance " << tolerance
            << ")\n";
  return j["pass"].get<bool>() ? 0 : 1;
}

int cmd_audit_energy(const CommonOptions& opts) {
  cf::RunConfig config = load(opts);
  const cf::CompositeProblem problem = cf::build_problem(config.problem);
  const auto paths = simulate_ensemble(config, problem, cf::FlowKind::kSde1);
  const double t2 = config.analysis.t2 >= 0 ? config.analysis.t2 : config.flow.horizon;
  const cf::EnergyGap gap = cf::energy_identity_gap(paths, config.analysis.t1, t2,
                                                    config.analysis.tolerance,
                                                    cf::master_seed_of(config));
  cf::Json j;
  j["analysis"] = "energy";
  j["config"] = config.echo;
  j["t1"] = config.analysis.t1;
  j["t2"] = t2;
  j["ensemble"] = config.ensemble.size;
  j["gap"] = gap.gap;
  j["lhs"] = gap.lhs;
  j["rhs"] = gap.rhs;
  j["standard_error"] = gap.standard_error;
  j["tolerance"] = config.analysis.tolerance;
  j["verdict"] = gap.verdict;
  std::filesystem::create_directories(config.output.dir);
  cf::write_json(config.output.dir + "/energy_report.json", j);
  std::cout << "energy gap: " << gap.gap << " (SE " << gap.standard_error << ") verdict "
            << gap.verdict << "\n";
  if (gap.verdict == "pass") return 0;
  return gap.verdict == "inconclusive" ? 4 : 1;
}

int cmd_audit_lyapunov(const CommonOptions& opts) {
  cf::RunConfig config = load(opts);
  const cf::CompositeProblem problem = cf::build_problem(config.problem);
  const auto paths = simulate_ensemble(config, problem, cf::FlowKind::kSde2);
  const cf::FlowConfig cfg = cf::validate(config.flow, problem, cf::FlowKind::kSde2);
  const double c = cf::choose_c(cfg.lambda, cfg.gamma, problem.smoothness());
  const cf::LyapunovAudit audit =
      cf::lyapunov_audit(paths, problem, cfg, c, cf::master_seed_of(config));

  cf::Json j;
  j["analysis"] = "lyapunov";
  j["config"] = config.echo;
  j["c"] = audit.c;
  j["a"] = audit.a;
  j["b"] = audit.b;
  j["ensemble"] = config.ensemble.size;
  j["pass"] = audit.pass;
  j["max_excess"] = audit.max_excess;
  cf::Json series = cf::Json::array();
  for (std::size_t i = 0; i < audit.times.size(); ++i) {
    series.push_back(cf::Json::array({audit.times[i], audit.mean_series[i]}));
  }
  j["series"] = series;
  std::filesystem::create_directories(config.output.dir);
  cf::write_json(config.output.dir + "/lyapunov_report.json", j);
  std::cout << "lyapunov audit: " << (audit.pass ? "pass" : "fail") << " (max excess "
            << audit.max_excess << ")\n";
  return audit.pass ? 0 : 1;
}

int cmd_rate_fit(const CommonOptions& opts) {
  cf::RunConfig config = load(opts);
  const cf::CompositeProblem problem = cf::build_problem(config.problem);

  std::vector<double> times, values;
  if (config.is_solver_kind()) {
    const cf::SolverParams params =
        cf::validate(config.solver, problem.op(), problem.regularizer(), problem.mu(),
                     cf::solver_kind_from_string(config.algorithm));
    cf::RunOptions options;
    options.x0 = x0_of(config);
    options.state_stride = 0;
    const cf::Trajectory trajectory =
        cf::run(cf::solver_kind_from_string(config.algorithm), problem, params, config.noise,
                options);
    if (trajectory.status != "ok") throw cf::DivergenceError("run diverged");
    for (const cf::TrajectoryRecord& rec : trajectory.records) {
      times.push_back(rec.t);
      values.push_back(config.analysis.objective == "H" ? rec.objective_h
                                                        : rec.objective_h_mu);
    }
  } else {
    cf::FlowConfig cfg = cf::validate(config.flow, problem,
                                      cf::flow_kind_from_string(config.algorithm));
    cfg.x0 = x0_of(config);
    const cf::SampledPath path =
        cf::simulate(cf::flow_kind_from_string(config.algorithm), problem, cfg);
    if (path.status != "ok") throw cf::DivergenceError("flow diverged");
    times = path.times;
    values = config.analysis.objective == "H" ? path.objective_h : path.objective_h_mu;
  }

  const cf::GapSeries gaps = cf::objective_gaps(times, values, config.analysis.tail_fraction);
  const cf::RateFit fit = cf::rate_fit(gaps.times, gaps.gaps, gaps.reference);

  cf::Json j;
  j["analysis"] = "rate_fit";
  j["config"] = config.echo;
  j["model"] = cf::to_string(fit.model);
  j["amplitude"] = fit.amplitude;
  j["rate"] = fit.rate;
  j["theta_hat"] = fit.regime_mismatch ? cf::Json() : cf::Json(fit.theta_hat);
  j["r_squared"] = fit.r_squared;
  j["window"] = cf::Json::array({fit.window_start, fit.window_end});
  j["points_used"] = fit.points_used;
  j["regime_mismatch"] = fit.regime_mismatch;
  j["reference"] = gaps.reference;
  cf::Json series = cf::Json::array();
  for (std::size_t i = 0; i < gaps.times.size(); ++i) {
    series.push_back(cf::Json::array({gaps.times[i], gaps.gaps[i]}));
  }
  j["series"] = series;
  std::filesystem::create_directories(config.output.dir);
  cf::write_json(config.output.dir + "/rate_fit_report.json", j);
  std::cout << "rate fit: " << cf::to_string(fit.model) << " rate " << fit.rate << " r^2 "
            << fit.r_squared << "\n";
  return 0;
}

int cmd_criticality(const CommonOptions& opts) {
  cf::RunConfig config = load(opts);
  if (!config.is_solver_kind()) {
    throw cf::ConfigError("'criticality' expects a solver algorithm");
  }
  const cf::CompositeProblem problem = cf::build_problem(config.problem);
  const cf::SolverParams params =
      cf::validate(config.solver, problem.op(), problem.regularizer(), problem.mu(),
                   cf::solver_kind_from_string(config.algorithm));
  cf::RunOptions options;
  options.x0 = x0_of(config);
  options.state_stride = 0;
  const cf::Trajectory trajectory = cf::run(
      cf::solver_kind_from_string(config.algorithm), problem, params, config.noise, options);
  if (trajectory.status != "ok") throw cf::DivergenceError("run diverged");
  const cf::CriticalityReport rep =
      cf::criticality_report(problem, trajectory.final_x, config.analysis.criticality_tol);

  cf::Json j;
  j["analysis"] = "criticality";
  j["config"] = config.echo;
  j["resid_smoothed"] = rep.resid_smoothed;
  j["resid_at_x_bar"] = rep.resid_at_x_bar;
  j["resid_certificate"] = rep.resid_certificate;
  j["bound"] = rep.bound;
  j["tol_stat"] = rep.tol_stat;
  j["pass"] = rep.pass;
  std::filesystem::create_directories(config.output.dir);
  cf::write_json(config.output.dir + "/criticality_report.json", j);
  std::cout << "criticality: resid " << rep.resid_at_x_bar << " bound " << rep.bound << " -> "
            << (rep.pass ? "pass" : "fail") << "\n";
  return rep.pass ? 0 : 1;
}

int cmd_report(const CommonOptions& opts) {
  std::string dir = opts.out_dir;
  if (dir.empty() && !opts.config_path.empty()) {
    dir = cf::load_config(opts.config_path).output.dir;
  }
  if (dir.empty()) dir = ".";
  const cf::Json summary = cf::report(dir);
  cf::write_json(dir + "/summary.json", summary);
  std::cout << "summary status: " << summary["status"].get<std::string>() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linearized proximal ADMM algorithms, their continuous-time limits, "
               "and the analysis harness"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string dynamics_kind;

  auto* run = app.add_subcommand("run", "single solver trajectory");
  add_common(run, opts);
  auto* ensemble = app.add_subcommand("ensemble", "seeded ensemble of runs");
  add_common(ensemble, opts);
  auto* flow = app.add_subcommand("flow", "deterministic first-order flow");
  add_common(flow, opts);
  auto* sde1 = app.add_subcommand("sde1", "first-order SDE path");
  add_common(sde1, opts);
  auto* sde2 = app.add_subcommand("sde2", "second-order SDE path");
  add_common(sde2, opts);
  auto* weak = app.add_subcommand("weak-order", "weak-approximation order estimate");
  add_common(weak, opts);
  auto* descent = app.add_subcommand("audit-descent", "descent identity audit");
  add_common(descent, opts);
  auto* energy = app.add_subcommand("audit-energy", "energy identity audit");
  add_common(energy, opts);
  auto* lyapunov = app.add_subcommand("audit-lyapunov", "Lyapunov descent audit");
  add_common(lyapunov, opts);
  auto* ratefit = app.add_subcommand("rate-fit", "objective decay-rate fit");
  add_common(ratefit, opts);
  auto* criticality = app.add_subcommand("criticality", "lifted-point criticality report");
  add_common(criticality, opts);
  auto* report = app.add_subcommand("report", "collate analysis reports");
  add_common(report, opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // command-line misuse is a config error
  }

  try {
    if (run->parsed()) return cmd_run(opts);
    if (ensemble->parsed()) return cmd_ensemble(opts);
    if (flow->parsed()) return cmd_dynamics(opts, "flow");
    if (sde1->parsed()) return cmd_dynamics(opts, "sde1");
    if (sde2->parsed()) return cmd_dynamics(opts, "sde2");
    if (weak->parsed()) return cmd_weak_order(opts);
    if (descent->parsed()) return cmd_audit_descent(opts);
    if (energy->parsed()) return cmd_audit_energy(opts);
    if (lyapunov->parsed()) return cmd_audit_lyapunov(opts);
    if (ratefit->parsed()) return cmd_rate_fit(opts);
    if (criticality->parsed()) return cmd_criticality(opts);
    if (report->parsed()) return cmd_report(opts);
  } catch (const cf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cf::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
