#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "compositeflow/problem.hpp"

namespace compositeflow {

enum class FlowKind { kFlow, kSde1, kSde2 };
enum class FlowMode { kSmoothed, kMinimalNorm };

FlowKind flow_kind_from_string(const std::string& name);
std::string to_string(FlowKind kind);
FlowMode flow_mode_from_string(const std::string& name);

/// Integration parameters for the continuous-time limits. The same config
/// drives the deterministic flow, the first-order SDE (noise scale
/// rho^{-1/2}) and the second-order SDE (noise scale rho^{-1/4}, damping
/// gamma + alpha/t clamped at t_min).
struct FlowConfig {
  double lambda = 0.0;   // must exceed ||A^T A||
  double dt = 0.01;
  double horizon = 1.0;  // T
  double rho = 100.0;    // noise scale source
  double t_min = 0.0;    // 0 selects dt
  double gamma = 1.0;    // second-order damping
  double alpha = 3.0;    // second-order damping offset
  Vector x0;             // empty selects zero
  Vector v0;             // empty selects zero (second-order)
  std::uint64_t seed = 0;
  FlowMode mode = FlowMode::kSmoothed;
  bool noise = true;     // false: zero-noise reduction of the SDE kinds
  bool validated = false;
};

/// Checks lambda > ||A^T A||, dt in (0, lambda/L] for the smoothed field,
/// rho > 0 and horizon >= 0; fills defaults (t_min = dt).
FlowConfig validate(FlowConfig cfg, const CompositeProblem& problem, FlowKind kind);

/// Uniform-grid samples of one trajectory with per-time diagnostics. The
/// noise entry at index i is the additive noise contribution of step
/// i -> i+1 (applied to x for sde1, to the velocity for sde2), so drift-only
/// velocity estimates are (dx - noise)/dt.
struct SampledPath {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> velocities;  // second-order only
  std::vector<Vector> noise;
  std::vector<double> objective_h;
  std::vector<double> objective_h_mu;
  std::vector<double> resid;       // ||grad H_mu|| or minimal-norm subgradient distance
  std::vector<double> step_norm;
  double lambda = 0.0;
  double dt = 0.0;
  std::string status = "ok";
  long diverged_at = -1;

  std::size_t size() const { return times.size(); }
};

/// Explicit Euler step of the first-order flow: x - (dt/lambda) g, where g
/// is grad H_mu (smoothed mode) or the minimal-norm element grad f + A^T g*
/// from the subgradient box (minimal_norm mode).
Vector flow_step(const Vector& x, const CompositeProblem& problem, const FlowConfig& cfg);

/// Euler-Maruyama step of the first-order SDE:
/// x - (dt/lambda) grad H_mu(x) - (1/lambda) rho^{-1/2} sqrt(dt) zeta.
/// Returns the new state and the noise contribution actually added.
std::pair<Vector, Vector> sde1_step(const Vector& x, const CompositeProblem& problem,
                                    const FlowConfig& cfg, std::uint64_t step_index);

/// Semi-implicit Euler-Maruyama step of the second-order SDE:
///   v+ = v - dt (gamma + alpha/max(t, t_min)) v - (dt/lambda) grad H_mu(x)
///        - (1/lambda) rho^{-1/4} sqrt(dt) zeta
///   x+ = x + dt v+
/// Returns ((x+, v+), noise contribution added to v).
std::pair<std::pair<Vector, Vector>, Vector> sde2_step(const Vector& x, const Vector& v,
                                                       const CompositeProblem& problem,
                                                       const FlowConfig& cfg,
                                                       std::uint64_t step_index, double t);

/// Integrates to the horizon; deterministic given (cfg, seed). Divergence
/// retains the last finite prefix with status "diverged".
SampledPath simulate(FlowKind kind, const CompositeProblem& problem, const FlowConfig& cfg);

/// Writes a path CSV with header
/// `i,t,H,H_mu,resid,step_norm[,x_0..,v_0..]` (state/velocity columns when
/// requested).
void write_path_csv(const std::string& path, const SampledPath& sampled, bool with_state);

/// Named polynomially bounded test function for the weak-error comparator.
struct TestFunction {
  std::string name;
  std::function<double(const Vector&)> fn;
};

TestFunction test_function_from_string(const std::string& name,
                                       const CompositeProblem& problem);

struct WeakErrorPoint {
  double rho;
  double max_error;   // max_k |E g(x^k) - E g(x(k/rho))|
  long argmax_k;
  double standard_error;  // Monte-Carlo SE of the error at argmax_k
  double relative_se;
  bool flagged;       // relative SE above 25%
};

struct WeakErrorTable {
  std::string test_fn;
  std::vector<WeakErrorPoint> points;
  double slope;        // least-squares slope of log(error) vs log(rho)
  double slope_stderr;
};

/// For each rho: runs `seeds` paired but independently seeded ensembles of
/// LP-SADMM (K = floor(rho T) steps, tau = lambda rho) and of the
/// first-order SDE (internal step 1/(10 rho), sampled at t = k/rho), and
/// compares ensemble means of each test function. Common random numbers are
/// off: the weak metric compares laws, not paths.
std::vector<WeakErrorTable> weak_error(const CompositeProblem& problem,
                                       const std::vector<TestFunction>& test_fns,
                                       const std::vector<double>& rho_grid, double horizon,
                                       int seeds, double lambda, std::uint64_t master_seed,
                                       const Vector& x0 = Vector());

}  // namespace compositeflow
