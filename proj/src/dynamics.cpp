#include "compositeflow/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "compositeflow/csv.hpp"
#include "compositeflow/errors.hpp"
#include "compositeflow/rng.hpp"
#include "compositeflow/solver.hpp"

namespace compositeflow {

FlowKind flow_kind_from_string(const std::string& name) {
  if (name == "flow") return FlowKind::kFlow;
  if (name == "sde1") return FlowKind::kSde1;
  if (name == "sde2") return FlowKind::kSde2;
  throw ConfigError("unknown flow kind: '" + name + "' (expected flow|sde1|sde2)");
}

std::string to_string(FlowKind kind) {
  switch (kind) {
    case FlowKind::kFlow: return "flow";
    case FlowKind::kSde1: return "sde1";
    case FlowKind::kSde2: return "sde2";
  }
  return "?";
}

FlowMode flow_mode_from_string(const std::string& name) {
  if (name == "smoothed") return FlowMode::kSmoothed;
  if (name == "minimal_norm") return FlowMode::kMinimalNorm;
  throw ConfigError("unknown flow mode: '" + name + "' (expected smoothed|minimal_norm)");
}

FlowConfig validate(FlowConfig cfg, const CompositeProblem& problem, FlowKind kind) {
  const double gram = problem.op().gram_norm();
  if (!(cfg.lambda > gram)) {
    throw ConfigError("lambda must exceed ||A^T A|| (lambda = " + std::to_string(cfg.lambda) +
                      ", ||A^T A|| = " + std::to_string(gram) + ")");
  }
  if (!(cfg.dt > 0)) throw ConfigError("dt must be positive");
  if (cfg.horizon < 0) throw ConfigError("horizon must be nonnegative");
  const bool smoothed_field = kind != FlowKind::kFlow || cfg.mode == FlowMode::kSmoothed;
  if (smoothed_field && cfg.dt > cfg.lambda / problem.smoothness()) {
    throw ConfigError("dt must satisfy dt <= lambda/L for the smoothed field (dt = " +
                      std::to_string(cfg.dt) +
                      ", lambda/L = " + std::to_string(cfg.lambda / problem.smoothness()) + ")");
  }
  if (kind != FlowKind::kFlow && !(cfg.rho > 0)) {
    throw ConfigError("rho must be positive for the stochastic kinds");
  }
  if (kind == FlowKind::kSde2) {
    if (!(cfg.gamma > 0)) throw ConfigError("gamma must be positive");
    if (!(cfg.alpha > 0)) throw ConfigError("alpha must be positive");
  }
  if (cfg.t_min <= 0) cfg.t_min = cfg.dt;
  if (cfg.x0.size() != 0 && cfg.x0.size() != problem.dim()) {
    throw ConfigError("x0 dimension does not match the problem");
  }
  if (cfg.v0.size() != 0 && cfg.v0.size() != problem.dim()) {
    throw ConfigError("v0 dimension does not match the problem");
  }
  cfg.validated = true;
  return cfg;
}

namespace {

Vector field(const Vector& x, const CompositeProblem& problem, FlowMode mode) {
  if (mode == FlowMode::kSmoothed) return problem.grad_H_mu(x);
  const SubgradResidual sr = problem.subgrad_residual(x);
  return problem.grad_full(x) + problem.op().apply_adjoint(sr.minimizer);
}

void require_validated(const FlowConfig& cfg) {
  if (!cfg.validated) throw UsageError("flow config must pass validate() first");
}

}  // namespace

Vector flow_step(const Vector& x, const CompositeProblem& problem, const FlowConfig& cfg) {
  require_validated(cfg);
  return x - (cfg.dt / cfg.lambda) * field(x, problem, cfg.mode);
}

std::pair<Vector, Vector> sde1_step(const Vector& x, const CompositeProblem& problem,
                                    const FlowConfig& cfg, std::uint64_t step_index) {
  require_validated(cfg);
  Vector noise_term = Vector::Zero(x.size());
  if (cfg.noise) {
    RandomStream stream(cfg.seed, StreamPurpose::kSdeNoise, step_index);
    noise_term = -(std::sqrt(cfg.dt) / (cfg.lambda * std::sqrt(cfg.rho))) *
                 stream.normal_vector(x.size());
  }
  Vector x_new = x - (cfg.dt / cfg.lambda) * problem.grad_H_mu(x) + noise_term;
  return {std::move(x_new), std::move(noise_term)};
}

std::pair<std::pair<Vector, Vector>, Vector> sde2_step(const Vector& x, const Vector& v,
                                                       const CompositeProblem& problem,
                                                       const FlowConfig& cfg,
                                                       std::uint64_t step_index, double t) {
  require_validated(cfg);
  Vector noise_term = Vector::Zero(x.size());
  if (cfg.noise) {
    RandomStream stream(cfg.seed, StreamPurpose::kSdeNoise, step_index);
    noise_term = -(std::sqrt(cfg.dt) / (cfg.lambda * std::pow(cfg.rho, 0.25))) *
                 stream.normal_vector(x.size());
  }
  const double damping = cfg.gamma + cfg.alpha / std::max(t, cfg.t_min);
  Vector v_new =
      v - cfg.dt * damping * v - (cfg.dt / cfg.lambda) * problem.grad_H_mu(x) + noise_term;
  Vector x_new = x + cfg.dt * v_new;
  return {{std::move(x_new), std::move(v_new)}, std::move(noise_term)};
}

SampledPath simulate(FlowKind kind, const CompositeProblem& problem, const FlowConfig& cfg_in) {
  FlowConfig cfg = cfg_in.validated ? cfg_in : validate(cfg_in, problem, kind);
  const long steps = std::lround(cfg.horizon / cfg.dt);

  SampledPath path;
  path.lambda = cfg.lambda;
  path.dt = cfg.dt;

  Vector x = cfg.x0.size() == 0 ? Vector::Zero(problem.dim()) : cfg.x0;
  Vector v = cfg.v0.size() == 0 ? Vector::Zero(problem.dim()) : cfg.v0;

  const auto resid_at = [&](const Vector& point) {
    if (kind == FlowKind::kFlow && cfg.mode == FlowMode::kMinimalNorm) {
      return problem.subgrad_residual(point).achieved;
    }
    return problem.grad_H_mu(point).norm();
  };

  const auto append = [&](long i, double step_norm) {
    path.times.push_back(static_cast<double>(i) * cfg.dt);
    path.states.push_back(x);
    if (kind == FlowKind::kSde2) path.velocities.push_back(v);
    path.objective_h.push_back(problem.objective_H(x));
    path.objective_h_mu.push_back(problem.objective_H_mu(x));
    path.resid.push_back(resid_at(x));
    path.step_norm.push_back(step_norm);
    return std::isfinite(path.objective_h.back()) && std::isfinite(path.resid.back());
  };

  append(0, 0.0);
  for (long i = 0; i < steps; ++i) {
    const Vector x_before = x;
    Vector noise_term;
    switch (kind) {
      case FlowKind::kFlow: {
        x = flow_step(x, problem, cfg);
        noise_term = Vector::Zero(x.size());
        break;
      }
      case FlowKind::kSde1: {
        auto [x_new, nv] = sde1_step(x, problem, cfg, static_cast<std::uint64_t>(i));
        x = std::move(x_new);
        noise_term = std::move(nv);
        break;
      }
      case FlowKind::kSde2: {
        auto [xv, nv] = sde2_step(x, v, problem, cfg, static_cast<std::uint64_t>(i),
                                  static_cast<double>(i) * cfg.dt);
        x = std::move(xv.first);
        v = std::move(xv.second);
        noise_term = std::move(nv);
        break;
      }
    }
    if (!x.allFinite() || !v.allFinite() ||
        !append(i + 1, (x - x_before).norm())) {
      // Drop any partially appended non-finite record.
      if (path.times.size() > static_cast<std::size_t>(i + 1)) {
        path.times.pop_back();
        path.states.pop_back();
        if (kind == FlowKind::kSde2) path.velocities.pop_back();
        path.objective_h.pop_back();
        path.objective_h_mu.pop_back();
        path.resid.pop_back();
        path.step_norm.pop_back();
      }
      path.status = "diverged";
      path.diverged_at = i + 1;
      return path;
    }
    path.noise.push_back(std::move(noise_term));
  }
  return path;
}

void write_path_csv(const std::string& path_name, const SampledPath& sampled, bool with_state) {
  std::vector<std::string> header = {"i", "t", "H", "H_mu", "resid", "step_norm"};
  const Eigen::Index n = sampled.states.empty() ? 0 : sampled.states.front().size();
  const bool with_velocity = !sampled.velocities.empty();
  if (with_state) {
    for (Eigen::Index j = 0; j < n; ++j) header.push_back("x_" + std::to_string(j));
    if (with_velocity) {
      for (Eigen::Index j = 0; j < n; ++j) header.push_back("v_" + std::to_string(j));
    }
  }
  CsvWriter writer(path_name, header);
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    std::vector<double> row = {static_cast<double>(i), sampled.times[i],
                               sampled.objective_h[i], sampled.objective_h_mu[i],
                               sampled.resid[i], sampled.step_norm[i]};
    if (with_state) {
      for (Eigen::Index j = 0; j < n; ++j) row.push_back(sampled.states[i][j]);
      if (with_velocity) {
        for (Eigen::Index j = 0; j < n; ++j) row.push_back(sampled.velocities[i][j]);
      }
    }
    writer.write_row(row);
  }
}

TestFunction test_function_from_string(const std::string& name,
                                       const CompositeProblem& problem) {
  if (name == "x2") {
    return {"x2", [](const Vector& x) { return x.squaredNorm(); }};
  }
  if (name == "H_mu") {
    return {"H_mu", [&problem](const Vector& x) { return problem.objective_H_mu(x); }};
  }
  throw ConfigError("unknown test function: '" + name + "' (expected x2|H_mu)");
}

namespace {

struct Regression {
  double slope;
  double intercept;
  double r_squared;
  double slope_stderr;
};

Regression least_squares(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  if (n < 2) throw InsufficientDataError("least squares requires at least 2 points");
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / static_cast<double>(n);
  const double my = sy / static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0) throw InsufficientDataError("least squares: degenerate abscissae");
  Regression reg;
  reg.slope = sxy / sxx;
  reg.intercept = my - reg.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - (reg.intercept + reg.slope * xs[i]);
    ss_res += r * r;
  }
  reg.r_squared = syy == 0 ? 1.0 : 1.0 - ss_res / syy;
  reg.slope_stderr =
      n > 2 ? std::sqrt(ss_res / (static_cast<double>(n) - 2.0) / sxx) : 0.0;
  return reg;
}

}  // namespace

std::vector<WeakErrorTable> weak_error(const CompositeProblem& problem,
                                       const std::vector<TestFunction>& test_fns,
                                       const std::vector<double>& rho_grid, double horizon,
                                       int seeds, double lambda, std::uint64_t master_seed,
                                       const Vector& x0_in) {
  if (seeds < 2) throw UsageError("weak_error: need at least 2 seeds");
  if (rho_grid.size() < 2) throw UsageError("weak_error: need at least 2 rho values");
  if (!(lambda > problem.op().gram_norm())) {
    throw ConfigError("lambda must exceed ||A^T A||");
  }
  const Vector x0 = x0_in.size() == 0 ? Vector::Zero(problem.dim()) : x0_in;

  std::vector<WeakErrorTable> tables(test_fns.size());
  for (std::size_t f = 0; f < test_fns.size(); ++f) tables[f].test_fn = test_fns[f].name;

  for (const double rho : rho_grid) {
    const long num_steps = static_cast<long>(std::floor(rho * horizon));
    if (num_steps < 1) throw UsageError("weak_error: horizon too short for rho grid");

    // Discrete side: LP-SADMM with tau = lambda rho; eta chosen so the
    // admissibility margin is (lambda - ||A^T A||) rho / 2.
    SolverParams params;
    params.rho = rho;
    params.tau = lambda * rho;
    params.eta = 2.0 / (rho * (lambda - problem.op().gram_norm()));
    params.iterations = num_steps;
    params = validate(params, problem.op(), problem.regularizer(), problem.mu(),
                      SolverKind::kLpSadmm);

    // values[f][k][seed]
    const std::size_t num_fns = test_fns.size();
    std::vector<std::vector<std::vector<double>>> disc(num_fns), sde(num_fns);
    for (std::size_t f = 0; f < num_fns; ++f) {
      disc[f].assign(static_cast<std::size_t>(num_steps) + 1,
                     std::vector<double>(static_cast<std::size_t>(seeds)));
      sde[f].assign(static_cast<std::size_t>(num_steps) + 1,
                    std::vector<double>(static_cast<std::size_t>(seeds)));
    }

    for (int s = 0; s < seeds; ++s) {
      // Independent streams for the two ensembles: common random numbers off.
      const NoiseSpec noise =
          NoiseSpec::gaussian(1.0, derive_seed(master_seed, 2 * static_cast<std::uint64_t>(s)));
      IterateState state = make_initial_state(problem, x0);
      for (std::size_t f = 0; f < num_fns; ++f) {
        disc[f][0][static_cast<std::size_t>(s)] = test_fns[f].fn(state.x);
      }
      for (long k = 0; k < num_steps; ++k) {
        lp_sadmm_step(state, problem, params, noise);
        for (std::size_t f = 0; f < num_fns; ++f) {
          disc[f][static_cast<std::size_t>(k + 1)][static_cast<std::size_t>(s)] =
              test_fns[f].fn(state.x);
        }
      }

      FlowConfig cfg;
      cfg.lambda = lambda;
      cfg.rho = rho;
      cfg.dt = 1.0 / (10.0 * rho);
      cfg.horizon = horizon;
      cfg.seed = derive_seed(master_seed, 2 * static_cast<std::uint64_t>(s) + 1);
      cfg.x0 = x0;
      cfg = validate(cfg, problem, FlowKind::kSde1);
      Vector x = x0;
      for (std::size_t f = 0; f < num_fns; ++f) {
        sde[f][0][static_cast<std::size_t>(s)] = test_fns[f].fn(x);
      }
      for (long i = 0; i < 10 * num_steps; ++i) {
        x = sde1_step(x, problem, cfg, static_cast<std::uint64_t>(i)).first;
        if ((i + 1) % 10 == 0) {
          const std::size_t k = static_cast<std::size_t>((i + 1) / 10);
          for (std::size_t f = 0; f < num_fns; ++f) {
            sde[f][k][static_cast<std::size_t>(s)] = test_fns[f].fn(x);
          }
        }
      }
    }

    for (std::size_t f = 0; f < num_fns; ++f) {
      WeakErrorPoint point;
      point.rho = rho;
      point.max_error = -1.0;
      point.argmax_k = 0;
      for (long k = 0; k <= num_steps; ++k) {
        const auto& dv = disc[f][static_cast<std::size_t>(k)];
        const auto& sv = sde[f][static_cast<std::size_t>(k)];
        const double err = std::abs(pairwise_mean(dv) - pairwise_mean(sv));
        if (err > point.max_error) {
          point.max_error = err;
          point.argmax_k = k;
        }
      }
      const auto& dv = disc[f][static_cast<std::size_t>(point.argmax_k)];
      const auto& sv = sde[f][static_cast<std::size_t>(point.argmax_k)];
      const double md = pairwise_mean(dv);
      const double ms = pairwise_mean(sv);
      double var_d = 0, var_s = 0;
      for (int s = 0; s < seeds; ++s) {
        var_d += (dv[static_cast<std::size_t>(s)] - md) * (dv[static_cast<std::size_t>(s)] - md);
        var_s += (sv[static_cast<std::size_t>(s)] - ms) * (sv[static_cast<std::size_t>(s)] - ms);
      }
      var_d /= static_cast<double>(seeds - 1);
      var_s /= static_cast<double>(seeds - 1);
      point.standard_error = std::sqrt((var_d + var_s) / static_cast<double>(seeds));
      point.relative_se =
          point.max_error > 0 ? point.standard_error / point.max_error : 0.0;
      point.flagged = point.relative_se > 0.25;
      tables[f].points.push_back(point);
    }
  }

  for (WeakErrorTable& table : tables) {
    std::vector<double> log_rho, log_err;
    for (const WeakErrorPoint& p : table.points) {
      if (p.max_error > 0) {
        log_rho.push_back(std::log(p.rho));
        log_err.push_back(std::log(p.max_error));
      }
    }
    const Regression reg = least_squares(log_rho, log_err);
    table.slope = reg.slope;
    table.slope_stderr = reg.slope_stderr;
  }
  return tables;
}

}  // namespace compositeflow
