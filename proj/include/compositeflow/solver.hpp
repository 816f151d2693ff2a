#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "compositeflow/problem.hpp"

namespace compositeflow {

enum class SolverKind { kLpAdmm, kLpSadmm, kAccLpSadmm };

SolverKind solver_kind_from_string(const std::string& name);
std::string to_string(SolverKind kind);

/// Hyperparameters shared by the three algorithms. `validate` checks the
/// admissibility constraints and caches the derived quantities; everything
/// downstream consumes only validated parameters.
struct SolverParams {
  double rho = 1.0;          // penalty
  double eta = 1.0;          // metric weight
  double tau = 0.0;          // <= 0 requests the default 1.01 (rho ||A^T A|| + 1/eta)
  double alpha = 3.0;        // momentum offset (accelerated variant)
  double gamma = 1.0;        // momentum damping (accelerated variant)
  long iterations = 1000;    // K
  std::uint64_t seed = 0;

  // Filled by validate():
  double gram_norm = 0.0;    // ||A^T A||
  double beta = 0.0;         // 1 - gamma / sqrt(rho)
  double lambda = 0.0;       // tau / rho, the continuous-limit speed
  bool validated = false;
};

/// Checks rho, eta > 0, tau > rho ||A^T A|| + 1/eta, 0 < mu < 1/modulus and
/// (for the accelerated variant) beta = 1 - gamma/sqrt(rho) > 0. Each
/// violated constraint raises a ConfigError naming it. Returns the params
/// with the derived quantities cached.
SolverParams validate(SolverParams params, const LinearMap& a, const Regularizer& h,
                      double mu, SolverKind kind);

/// Solver state. The hatted variables are live only for the accelerated
/// variant and start equal to the plain ones.
struct IterateState {
  Vector x, z, u;
  Vector x_hat, z_hat, u_hat;
  long k = 0;
};

IterateState make_initial_state(const CompositeProblem& problem, const Vector& x0);

/// Diagnostics of the update that produced the newest iterate. The
/// constraint residual A x+ - z+ is the exact vector added to the
/// multiplier, so u+ == u + constraint_residual holds bitwise.
struct StepDiagnostics {
  double resid_zopt = 0.0;
  Vector constraint_residual;
};

/// One step of LP-ADMM (plain prox z-update on h).
StepDiagnostics lp_admm_step(IterateState& state, const CompositeProblem& problem,
                             const SolverParams& params);

/// One step of LP-ADMM applied to the smoothed objective (f, h_mu, A): the
/// z-update is the envelope prox. With exact noise lp_sadmm_step is bitwise
/// identical to this.
StepDiagnostics lp_admm_envelope_step(IterateState& state, const CompositeProblem& problem,
                                      const SolverParams& params);

/// One step of LP-SADMM: stochastic gradient in the x-update, envelope prox
/// in the z-update.
StepDiagnostics lp_sadmm_step(IterateState& state, const CompositeProblem& problem,
                              const SolverParams& params, const NoiseSpec& noise);

/// One step of accelerated LP-SADMM with momentum schedule
/// alpha_k = beta k / (k + alpha). `force_zero_momentum` pins alpha_k = 0,
/// reducing the iteration to LP-SADMM bitwise.
StepDiagnostics acc_lp_sadmm_step(IterateState& state, const CompositeProblem& problem,
                                  const SolverParams& params, const NoiseSpec& noise,
                                  bool force_zero_momentum = false);

/// Per-step diagnostics recorded along a run.
struct TrajectoryRecord {
  long k;
  double t;           // k / rho
  double objective_h;
  double objective_h_mu;
  double step_norm;   // ||x_k - x_{k-1}||, 0 at k = 0
  double resid_zopt;  // optimality residual of the z-update that produced x_k
  double resid_grad;  // ||grad H_mu(x_k)||
  double elapsed_seconds;  // wall clock since the run started; never persisted
};

/// Time-indexed iterates with per-step diagnostics; the unit of persistence
/// and analysis. Diagnostics are recorded every step, full states every
/// `state_stride` steps (and always at the end).
struct Trajectory {
  SolverParams params;  // snapshot of the validated parameters
  std::vector<TrajectoryRecord> records;
  std::map<long, Vector> states;
  Vector final_x;
  long state_stride = 100;
  std::string status = "ok";   // "ok" or "diverged"
  long diverged_at = -1;
};

struct RunOptions {
  Vector x0;                    // empty selects the zero vector
  long state_stride = 100;
  bool envelope_z_update = false;  // LP-ADMM on (f, h_mu, A) instead of (f, h, A)
  bool force_zero_momentum = false;
  std::function<void(const IterateState&)> callback;  // invoked after each step
};

/// Executes K steps from x0 (zero by default) with z0 = A x0, u0 = 0.
/// Reproducible from (params, noise seed). A non-finite value stops the run
/// with status "diverged" and the last finite record retained.
Trajectory run(SolverKind kind, const CompositeProblem& problem, const SolverParams& params,
               const NoiseSpec& noise, const RunOptions& options = {});

/// Writes the trajectory diagnostics with the fixed header
/// `k,t,H,H_mu,step_norm,resid_zopt,resid_grad`.
void write_trajectory_csv(const std::string& path, const Trajectory& trajectory);

}  // namespace compositeflow
