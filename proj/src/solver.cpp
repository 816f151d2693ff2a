#include "compositeflow/solver.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "compositeflow/csv.hpp"
#include "compositeflow/errors.hpp"

namespace compositeflow {

SolverKind solver_kind_from_string(const std::string& name) {
  if (name == "lp_admm") return SolverKind::kLpAdmm;
  if (name == "lp_sadmm") return SolverKind::kLpSadmm;
  if (name == "acc_lp_sadmm") return SolverKind::kAccLpSadmm;
  throw ConfigError("unknown solver kind: '" + name +
                    "' (expected lp_admm|lp_sadmm|acc_lp_sadmm)");
}

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::kLpAdmm: return "lp_admm";
    case SolverKind::kLpSadmm: return "lp_sadmm";
    case SolverKind::kAccLpSadmm: return "acc_lp_sadmm";
  }
  return "?";
}

SolverParams validate(SolverParams params, const LinearMap& a, const Regularizer& h,
                      double mu, SolverKind kind) {
  if (params.rho <= 0) throw ConfigError("rho must be positive");
  if (params.eta <= 0) throw ConfigError("eta must be positive");
  if (params.iterations < 0) throw ConfigError("iteration budget must be nonnegative");

  params.gram_norm = a.gram_norm();
  const double threshold = params.rho * params.gram_norm + 1.0 / params.eta;
  if (params.tau <= 0) {
    params.tau = 1.01 * threshold;
  }
  if (!(params.tau > threshold)) {
    std::ostringstream msg;
    msg << "tau must exceed rho*||A^T A|| + 1/eta (tau = " << params.tau
        << ", threshold = " << threshold << ")";
    throw ConfigError(msg.str());
  }

  if (!(mu > 0) || (h.modulus() > 0 && !(mu < 1.0 / h.modulus()))) {
    throw ConfigError("mu must satisfy 0 < mu < 1/modulus");
  }

  params.beta = 1.0 - params.gamma / std::sqrt(params.rho);
  if (kind == SolverKind::kAccLpSadmm) {
    if (params.alpha <= 0) throw ConfigError("momentum offset alpha must be positive");
    if (params.gamma <= 0) throw ConfigError("momentum damping gamma must be positive");
    if (!(params.beta > 0)) {
      std::ostringstream msg;
      msg << "beta = 1 - gamma/sqrt(rho) must be positive (beta = " << params.beta << ")";
      throw ConfigError(msg.str());
    }
  }

  params.lambda = params.tau / params.rho;
  params.validated = true;
  return params;
}

IterateState make_initial_state(const CompositeProblem& problem, const Vector& x0) {
  IterateState state;
  state.x = x0.size() == 0 ? Vector::Zero(problem.dim()) : x0;
  if (state.x.size() != problem.dim()) {
    throw UsageError("initial point dimension does not match the problem");
  }
  state.z = problem.op().apply(state.x);
  state.u = Vector::Zero(problem.range_dim());
  state.x_hat = state.x;
  state.z_hat = state.z;
  state.u_hat = state.u;
  state.k = 0;
  return state;
}

namespace {

struct PassResult {
  Vector x, z, u;
  Vector constraint_residual;
  double resid_zopt;
};

/// The shared linearized ADMM pass from base iterates (xb, zb, ub) with
/// gradient g evaluated at xb:
///   x+ = xb - (g + rho A^T(A xb - zb + ub/rho)) / tau
///   z+ = argmin_z  pen(z) + <ub, A x+ - z> + (rho/2)||A x+ - z||^2
///   u+ = ub + A x+ - z+
/// All three algorithms route through this function so the documented
/// bitwise equivalences hold by construction.
PassResult linearized_pass(const CompositeProblem& problem, const SolverParams& params,
                           const Vector& xb, const Vector& zb, const Vector& ub,
                           const Vector& g, bool envelope) {
  const LinearMap& a = problem.op();
  const double rho = params.rho;

  PassResult out;
  out.x = xb - (g + rho * a.apply_adjoint(a.apply(xb) - zb + ub / rho)) / params.tau;
  const Vector ax_new = a.apply(out.x);
  const Vector w = ax_new + ub / rho;
  if (envelope) {
    out.z = problem.envelope().prox(1.0 / rho, w);
    // Optimality condition of the z-update: grad h_mu(z+) = rho (A x+ - z+ + ub/rho).
    out.resid_zopt =
        (problem.envelope().grad(out.z) - rho * (ax_new - out.z + ub / rho)).norm();
  } else {
    out.z = problem.regularizer().prox(1.0 / rho, w);
    const Vector v = rho * (ax_new - out.z + ub / rho);
    double sq = 0.0;
    for (Eigen::Index i = 0; i < out.z.size(); ++i) {
      const Interval iv = problem.regularizer().subgradient1(out.z[i]);
      const double d = v[i] - iv.clamp(v[i]);
      sq += d * d;
    }
    out.resid_zopt = std::sqrt(sq);
  }
  out.constraint_residual = ax_new - out.z;
  out.u = ub + out.constraint_residual;
  return out;
}

void require_validated(const SolverParams& params) {
  if (!params.validated) throw UsageError("solver params must pass validate() first");
}

}  // namespace

StepDiagnostics lp_admm_step(IterateState& state, const CompositeProblem& problem,
                             const SolverParams& params) {
  require_validated(params);
  const Vector g = problem.grad_full(state.x);
  PassResult r = linearized_pass(problem, params, state.x, state.z, state.u, g, false);
  state.x = std::move(r.x);
  state.z = std::move(r.z);
  state.u = std::move(r.u);
  state.k += 1;
  return {r.resid_zopt, std::move(r.constraint_residual)};
}

StepDiagnostics lp_admm_envelope_step(IterateState& state, const CompositeProblem& problem,
                                      const SolverParams& params) {
  require_validated(params);
  const Vector g = problem.grad_full(state.x);
  PassResult r = linearized_pass(problem, params, state.x, state.z, state.u, g, true);
  state.x = std::move(r.x);
  state.z = std::move(r.z);
  state.u = std::move(r.u);
  state.k += 1;
  return {r.resid_zopt, std::move(r.constraint_residual)};
}

StepDiagnostics lp_sadmm_step(IterateState& state, const CompositeProblem& problem,
                              const SolverParams& params, const NoiseSpec& noise) {
  require_validated(params);
  const Vector g =
      problem.grad_stochastic(state.x, noise, static_cast<std::uint64_t>(state.k));
  PassResult r = linearized_pass(problem, params, state.x, state.z, state.u, g, true);
  state.x = std::move(r.x);
  state.z = std::move(r.z);
  state.u = std::move(r.u);
  state.k += 1;
  return {r.resid_zopt, std::move(r.constraint_residual)};
}

StepDiagnostics acc_lp_sadmm_step(IterateState& state, const CompositeProblem& problem,
                                  const SolverParams& params, const NoiseSpec& noise,
                                  bool force_zero_momentum) {
  require_validated(params);
  const Vector g =
      problem.grad_stochastic(state.x_hat, noise, static_cast<std::uint64_t>(state.k));
  PassResult r =
      linearized_pass(problem, params, state.x_hat, state.z_hat, state.u_hat, g, true);

  if (force_zero_momentum) {
    state.x_hat = r.x;
    state.z_hat = r.z;
    state.u_hat = r.u;
  } else {
    const double kp1 = static_cast<double>(state.k + 1);
    const double alpha_next = params.beta * kp1 / (kp1 + params.alpha);
    state.u_hat = r.u + alpha_next * (r.u - state.u);
    state.x_hat = r.x + alpha_next * (r.x - state.x);
    state.z_hat = r.z + alpha_next * (r.z - state.z);
  }
  state.x = std::move(r.x);
  state.z = std::move(r.z);
  state.u = std::move(r.u);
  state.k += 1;
  return {r.resid_zopt, std::move(r.constraint_residual)};
}

Trajectory run(SolverKind kind, const CompositeProblem& problem, const SolverParams& params,
               const NoiseSpec& noise, const RunOptions& options) {
  require_validated(params);
  IterateState state = make_initial_state(problem, options.x0);
  NoiseSpec seeded = noise;
  if (seeded.master_seed == 0) seeded.master_seed = params.seed;

  Trajectory trajectory;
  trajectory.params = params;
  trajectory.state_stride = options.state_stride;
  const auto start_time = std::chrono::steady_clock::now();

  const auto make_record = [&](long k, double step_norm, double resid_zopt) {
    TrajectoryRecord rec;
    rec.k = k;
    rec.t = static_cast<double>(k) / params.rho;
    rec.objective_h = problem.objective_H(state.x);
    rec.objective_h_mu = problem.objective_H_mu(state.x);
    rec.step_norm = step_norm;
    rec.resid_zopt = resid_zopt;
    rec.resid_grad = problem.grad_H_mu(state.x).norm();
    rec.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    return rec;
  };

  trajectory.records.push_back(make_record(0, 0.0, 0.0));
  if (options.state_stride > 0) trajectory.states.emplace(0, state.x);

  Vector last_finite_x = state.x;
  for (long k = 0; k < params.iterations; ++k) {
    const Vector x_before = state.x;
    StepDiagnostics diag;
    switch (kind) {
      case SolverKind::kLpAdmm:
        diag = options.envelope_z_update ? lp_admm_envelope_step(state, problem, params)
                                         : lp_admm_step(state, problem, params);
        break;
      case SolverKind::kLpSadmm:
        diag = lp_sadmm_step(state, problem, params, seeded);
        break;
      case SolverKind::kAccLpSadmm:
        diag = acc_lp_sadmm_step(state, problem, params, seeded,
                                 options.force_zero_momentum);
        break;
    }
    const bool finite_state =
        state.x.allFinite() && state.z.allFinite() && state.u.allFinite();
    TrajectoryRecord rec;
    bool finite_record = false;
    if (finite_state) {
      rec = make_record(state.k, (state.x - x_before).norm(), diag.resid_zopt);
      finite_record = std::isfinite(rec.objective_h) && std::isfinite(rec.objective_h_mu) &&
                      std::isfinite(rec.resid_grad);
    }
    if (!finite_record) {
      trajectory.status = "diverged";
      trajectory.diverged_at = state.k;
      break;
    }
    trajectory.records.push_back(rec);
    last_finite_x = state.x;
    if (options.state_stride > 0 && state.k % options.state_stride == 0) {
      trajectory.states.emplace(state.k, state.x);
    }
    if (options.callback) options.callback(state);
  }
  trajectory.final_x = last_finite_x;
  trajectory.states.emplace(trajectory.records.back().k, last_finite_x);
  return trajectory;
}

void write_trajectory_csv(const std::string& path, const Trajectory& trajectory) {
  CsvWriter writer(path, {"k", "t", "H", "H_mu", "step_norm", "resid_zopt", "resid_grad"});
  for (const TrajectoryRecord& rec : trajectory.records) {
    writer.write_row({static_cast<double>(rec.k), rec.t, rec.objective_h, rec.objective_h_mu,
                      rec.step_norm, rec.resid_zopt, rec.resid_grad});
  }
}

}  // namespace compositeflow
