#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "compositeflow/analysis.hpp"
#include "compositeflow/dynamics.hpp"
#include "compositeflow/problem.hpp"
#include "compositeflow/solver.hpp"

namespace compositeflow {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "compositeflow 0.1.0";

/// Problem construction recipe: either the built-in generated family or CSV
/// paths for the data matrix, target vector and operator matrix.
struct ProblemConfig {
  Eigen::Index n = 2;
  Eigen::Index m = 2;
  Eigen::Index components = 10;  // N
  std::string operator_kind = "identity";  // identity|gaussian|first_difference
  std::uint64_t operator_seed = 1;
  double sigma_min = 0.5;
  double sigma_max = 2.0;
  bool pad_to_square = false;
  std::string reg_kind = "l1";
  double reg_weight = 0.1;
  double reg_shape = 0.0;
  double mu = 0.1;
  std::uint64_t data_seed = 7;
  double target_noise = 0.25;
  std::string data_csv;      // optional overrides
  std::string target_csv;
  std::string operator_csv;
  std::vector<double> x0;    // empty selects zero
};

struct OutputConfig {
  std::string dir = ".";
  long stride = 100;
  bool write_state = false;
};

struct EnsembleConfig {
  int size = 1;
  int jobs = 1;
};

struct AnalysisConfig {
  double t1 = 0.0;
  double t2 = -1.0;          // negative selects the horizon
  double tolerance = 0.1;
  std::string objective = "H_mu";  // descent audit series
  std::vector<double> rho_grid;
  std::vector<std::string> test_fns = {"x2"};
  double weak_horizon = 1.0;
  int weak_seeds = 256;
  double weak_lambda = 0.0;  // 0 selects flow.lambda
  double tail_fraction = 0.05;
  double criticality_tol = 1e-9;
};

/// Fully parsed and constraint-checked run configuration. `echo` holds the
/// canonical JSON form (defaults filled) used for manifests and round-trips.
struct RunConfig {
  ProblemConfig problem;
  std::string algorithm = "lp_admm";
  SolverParams solver;
  FlowConfig flow;
  NoiseSpec noise;
  OutputConfig output;
  EnsembleConfig ensemble;
  AnalysisConfig analysis;
  Json echo;

  bool is_solver_kind() const;
};

/// Parses and validates a config JSON. Unknown keys are rejected naming the
/// key; constraint violations quote the constraint. The environment variable
/// COMPOSITEFLOW_SEED, when set, overrides every master seed in the config.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const Json& j);
Json config_to_json(const RunConfig& config);

CompositeProblem build_problem(const ProblemConfig& config);

struct SeedOutput {
  int index;
  std::uint64_t seed;
  std::string file;
  std::string status;
};

/// Everything needed to reproduce and interpret a run: config echo, the
/// derived constants every verdict consumes, per-seed output files.
struct RunManifest {
  Json config_echo;
  double gram_norm;
  double min_eig_gram_adjoint;
  double smooth_lipschitz;   // L_f
  double reg_lipschitz;      // L_h
  double modulus;            // weak-convexity modulus of h
  double smoothness;         // L
  double beta;
  double lambda;
  std::vector<SeedOutput> outputs;
  double wall_clock_seconds;

  Json to_json() const;
};

/// Executes `ensemble.size` runs with per-seed streams derived as
/// seed_i = mix64-derived(master_seed, i), writing one CSV per seed plus
/// manifest.json. Workers share only the immutable problem; the per-seed
/// files are byte-identical for any parallelism degree.
RunManifest run_ensemble(const RunConfig& config);

/// Master seed of a config: the noise master seed (solver kinds, falling
/// back to the solver seed) or the flow seed (dynamics kinds).
std::uint64_t master_seed_of(const RunConfig& config);

/// Collates analysis reports found in `dir` (descent, energy, lyapunov,
/// rate_fit, criticality, weak_order) plus manifest.json into summary.json
/// and a gnuplot-friendly series.csv. Missing inputs appear as explicit
/// gaps; with no analyses at all the summary status is "no-analyses".
Json report(const std::string& dir);

void write_json(const std::string& path, const Json& j);
Json read_json(const std::string& path);

}  // namespace compositeflow
