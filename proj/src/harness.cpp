#include "compositeflow/harness.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "compositeflow/csv.hpp"
#include "compositeflow/errors.hpp"
#include "compositeflow/rng.hpp"

namespace compositeflow {

namespace {

void check_keys(const Json& obj, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("'" + ctx + "' must be a JSON object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("unknown key '" + item.key() + "' in '" + ctx + "'");
  }
}

double get_num(const Json& obj, const std::string& ctx, const char* key, double def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_number()) {
    throw ConfigError("key '" + std::string(key) + "' in '" + ctx + "' must be a number");
  }
  return obj[key].get<double>();
}

long get_int(const Json& obj, const std::string& ctx, const char* key, long def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_number_integer()) {
    throw ConfigError("key '" + std::string(key) + "' in '" + ctx + "' must be an integer");
  }
  return obj[key].get<long>();
}

std::uint64_t get_seed(const Json& obj, const std::string& ctx, const char* key,
                       std::uint64_t def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_number_integer()) {
    throw ConfigError("key '" + std::string(key) + "' in '" + ctx + "' must be an integer");
  }
  return obj[key].get<std::uint64_t>();
}

bool get_bool(const Json& obj, const std::string& ctx, const char* key, bool def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_boolean()) {
    throw ConfigError("key '" + std::string(key) + "' in '" + ctx + "' must be a boolean");
  }
  return obj[key].get<bool>();
}

std::string get_str(const Json& obj, const std::string& ctx, const char* key,
                    const std::string& def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_string()) {
    throw ConfigError("key '" + std::string(key) + "' in '" + ctx + "' must be a string");
  }
  return obj[key].get<std::string>();
}

ProblemConfig parse_problem(const Json& j) {
  check_keys(j, "problem",
             {"n", "m", "N", "operator", "operator_seed", "sigma_min", "sigma_max",
              "pad_to_square", "reg", "mu", "data_seed", "target_noise", "data_csv",
              "target_csv", "operator_csv", "x0"});
  ProblemConfig p;
  p.n = get_int(j, "problem", "n", 2);
  p.m = get_int(j, "problem", "m", 0);
  p.components = get_int(j, "problem", "N", 10);
  p.operator_kind = get_str(j, "problem", "operator", "identity");
  if (p.operator_kind != "identity" && p.operator_kind != "gaussian" &&
      p.operator_kind != "first_difference") {
    throw ConfigError("unknown operator kind: '" + p.operator_kind +
                      "' (expected identity|gaussian|first_difference)");
  }
  p.operator_seed = get_seed(j, "problem", "operator_seed", 1);
  p.sigma_min = get_num(j, "problem", "sigma_min", 0.5);
  p.sigma_max = get_num(j, "problem", "sigma_max", 2.0);
  p.pad_to_square = get_bool(j, "problem", "pad_to_square", false);
  if (j.contains("reg")) {
    const Json& r = j["reg"];
    check_keys(r, "problem.reg", {"kind", "weight", "shape"});
    p.reg_kind = get_str(r, "problem.reg", "kind", "l1");
    regularizer_kind_from_string(p.reg_kind);  // schema check
    p.reg_weight = get_num(r, "problem.reg", "weight", 0.1);
    p.reg_shape = get_num(r, "problem.reg", "shape", 0.0);
  }
  p.mu = get_num(j, "problem", "mu", 0.1);
  p.data_seed = get_seed(j, "problem", "data_seed", 7);
  p.target_noise = get_num(j, "problem", "target_noise", 0.25);
  p.data_csv = get_str(j, "problem", "data_csv", "");
  p.target_csv = get_str(j, "problem", "target_csv", "");
  p.operator_csv = get_str(j, "problem", "operator_csv", "");
  if (j.contains("x0")) {
    if (!j["x0"].is_array()) throw ConfigError("key 'x0' in 'problem' must be an array");
    for (const auto& v : j["x0"]) {
      if (!v.is_number()) throw ConfigError("entries of 'problem.x0' must be numbers");
      p.x0.push_back(v.get<double>());
    }
  }
  // Derive m from the operator kind when unspecified.
  if (p.m == 0) {
    if (p.operator_kind == "identity") {
      p.m = p.n;
    } else if (p.operator_kind == "first_difference") {
      p.m = p.pad_to_square ? p.n : p.n - 1;
    } else {
      p.m = p.n;
    }
  }
  return p;
}

SolverParams parse_solver(const Json& j) {
  check_keys(j, "solver",
             {"rho", "eta", "tau", "alpha", "gamma", "iterations", "seed"});
  SolverParams s;
  s.rho = get_num(j, "solver", "rho", 1.0);
  s.eta = get_num(j, "solver", "eta", 1.0);
  s.tau = get_num(j, "solver", "tau", 0.0);
  s.alpha = get_num(j, "solver", "alpha", 3.0);
  s.gamma = get_num(j, "solver", "gamma", 1.0);
  s.iterations = get_int(j, "solver", "iterations", 1000);
  s.seed = get_seed(j, "solver", "seed", 0);
  return s;
}

FlowConfig parse_flow(const Json& j) {
  check_keys(j, "flow",
             {"lambda", "dt", "horizon", "rho", "t_min", "gamma", "alpha", "seed", "mode",
              "noise"});
  FlowConfig f;
  f.lambda = get_num(j, "flow", "lambda", 0.0);
  f.dt = get_num(j, "flow", "dt", 0.01);
  f.horizon = get_num(j, "flow", "horizon", 1.0);
  f.rho = get_num(j, "flow", "rho", 100.0);
  f.t_min = get_num(j, "flow", "t_min", 0.0);
  f.gamma = get_num(j, "flow", "gamma", 1.0);
  f.alpha = get_num(j, "flow", "alpha", 3.0);
  f.seed = get_seed(j, "flow", "seed", 0);
  f.mode = flow_mode_from_string(get_str(j, "flow", "mode", "smoothed"));
  f.noise = get_bool(j, "flow", "noise", true);
  return f;
}

NoiseSpec parse_noise(const Json& j) {
  check_keys(j, "noise", {"mode", "sigma", "batch", "master_seed"});
  NoiseSpec n;
  n.mode = noise_mode_from_string(get_str(j, "noise", "mode", "exact"));
  n.sigma = get_num(j, "noise", "sigma", 1.0);
  n.batch = get_int(j, "noise", "batch", 0);
  n.master_seed = get_seed(j, "noise", "master_seed", 0);
  return n;
}

AnalysisConfig parse_analysis(const Json& j) {
  check_keys(j, "analysis",
             {"t1", "t2", "tolerance", "objective", "rho_grid", "test_fns", "weak_horizon",
              "weak_seeds", "weak_lambda", "tail_fraction", "criticality_tol"});
  AnalysisConfig a;
  a.t1 = get_num(j, "analysis", "t1", 0.0);
  a.t2 = get_num(j, "analysis", "t2", -1.0);
  a.tolerance = get_num(j, "analysis", "tolerance", 0.1);
  a.objective = get_str(j, "analysis", "objective", "H_mu");
  if (j.contains("rho_grid")) {
    if (!j["rho_grid"].is_array()) {
      throw ConfigError("key 'rho_grid' in 'analysis' must be an array");
    }
    for (const auto& v : j["rho_grid"]) {
      if (!v.is_number()) throw ConfigError("entries of 'analysis.rho_grid' must be numbers");
      a.rho_grid.push_back(v.get<double>());
    }
  }
  if (j.contains("test_fns")) {
    if (!j["test_fns"].is_array()) {
      throw ConfigError("key 'test_fns' in 'analysis' must be an array");
    }
    a.test_fns.clear();
    for (const auto& v : j["test_fns"]) {
      if (!v.is_string()) throw ConfigError("entries of 'analysis.test_fns' must be strings");
      a.test_fns.push_back(v.get<std::string>());
    }
  }
  a.weak_horizon = get_num(j, "analysis", "weak_horizon", 1.0);
  a.weak_seeds = static_cast<int>(get_int(j, "analysis", "weak_seeds", 256));
  a.weak_lambda = get_num(j, "analysis", "weak_lambda", 0.0);
  a.tail_fraction = get_num(j, "analysis", "tail_fraction", 0.05);
  a.criticality_tol = get_num(j, "analysis", "criticality_tol", 1e-9);
  return a;
}

bool is_solver_algorithm(const std::string& name) {
  return name == "lp_admm" || name == "lp_sadmm" || name == "acc_lp_sadmm";
}

bool is_flow_algorithm(const std::string& name) {
  return name == "flow" || name == "sde1" || name == "sde2";
}

}  // namespace

bool RunConfig::is_solver_kind() const { return is_solver_algorithm(algorithm); }

RunConfig parse_config(const Json& j) {
  check_keys(j, "config",
             {"problem", "algorithm", "solver", "flow", "noise", "output", "ensemble",
              "analysis"});
  RunConfig config;
  if (!j.contains("problem")) throw ConfigError("missing required key 'problem'");
  config.problem = parse_problem(j["problem"]);
  if (!j.contains("algorithm")) throw ConfigError("missing required key 'algorithm'");
  if (!j["algorithm"].is_string()) throw ConfigError("key 'algorithm' must be a string");
  config.algorithm = j["algorithm"].get<std::string>();
  if (!is_solver_algorithm(config.algorithm) && !is_flow_algorithm(config.algorithm)) {
    throw ConfigError("unknown algorithm '" + config.algorithm +
                      "' (expected lp_admm|lp_sadmm|acc_lp_sadmm|flow|sde1|sde2)");
  }
  if (j.contains("solver")) config.solver = parse_solver(j["solver"]);
  if (j.contains("flow")) config.flow = parse_flow(j["flow"]);
  if (j.contains("noise")) config.noise = parse_noise(j["noise"]);
  if (j.contains("output")) {
    const Json& o = j["output"];
    check_keys(o, "output", {"dir", "stride", "write_state"});
    config.output.dir = get_str(o, "output", "dir", ".");
    config.output.stride = get_int(o, "output", "stride", 100);
    config.output.write_state = get_bool(o, "output", "write_state", false);
  }
  if (j.contains("ensemble")) {
    const Json& e = j["ensemble"];
    check_keys(e, "ensemble", {"size", "jobs"});
    config.ensemble.size = static_cast<int>(get_int(e, "ensemble", "size", 1));
    config.ensemble.jobs = static_cast<int>(get_int(e, "ensemble", "jobs", 1));
    if (config.ensemble.size < 1) throw ConfigError("ensemble size must be at least 1");
    if (config.ensemble.jobs < 1) throw ConfigError("ensemble jobs must be at least 1");
  }
  if (j.contains("analysis")) config.analysis = parse_analysis(j["analysis"]);
  config.echo = config_to_json(config);
  return config;
}

Json config_to_json(const RunConfig& config) {
  Json j;
  Json p;
  p["n"] = config.problem.n;
  p["m"] = config.problem.m;
  p["N"] = config.problem.components;
  p["operator"] = config.problem.operator_kind;
  p["operator_seed"] = config.problem.operator_seed;
  p["sigma_min"] = config.problem.sigma_min;
  p["sigma_max"] = config.problem.sigma_max;
  p["pad_to_square"] = config.problem.pad_to_square;
  p["reg"] = Json{{"kind", config.problem.reg_kind},
                  {"weight", config.problem.reg_weight},
                  {"shape", config.problem.reg_shape}};
  p["mu"] = config.problem.mu;
  p["data_seed"] = config.problem.data_seed;
  p["target_noise"] = config.problem.target_noise;
  if (!config.problem.data_csv.empty()) p["data_csv"] = config.problem.data_csv;
  if (!config.problem.target_csv.empty()) p["target_csv"] = config.problem.target_csv;
  if (!config.problem.operator_csv.empty()) p["operator_csv"] = config.problem.operator_csv;
  if (!config.problem.x0.empty()) p["x0"] = config.problem.x0;
  j["problem"] = p;
  j["algorithm"] = config.algorithm;
  j["solver"] = Json{{"rho", config.solver.rho},     {"eta", config.solver.eta},
                     {"tau", config.solver.tau},     {"alpha", config.solver.alpha},
                     {"gamma", config.solver.gamma}, {"iterations", config.solver.iterations},
                     {"seed", config.solver.seed}};
  j["flow"] = Json{{"lambda", config.flow.lambda},
                   {"dt", config.flow.dt},
                   {"horizon", config.flow.horizon},
                   {"rho", config.flow.rho},
                   {"t_min", config.flow.t_min},
                   {"gamma", config.flow.gamma},
                   {"alpha", config.flow.alpha},
                   {"seed", config.flow.seed},
                   {"mode", config.flow.mode == FlowMode::kSmoothed ? "smoothed" : "minimal_norm"},
                   {"noise", config.flow.noise}};
  j["noise"] = Json{{"mode", to_string(config.noise.mode)},
                    {"sigma", config.noise.sigma},
                    {"batch", config.noise.batch},
                    {"master_seed", config.noise.master_seed}};
  j["output"] = Json{{"dir", config.output.dir},
                     {"stride", config.output.stride},
                     {"write_state", config.output.write_state}};
  j["ensemble"] = Json{{"size", config.ensemble.size}, {"jobs", config.ensemble.jobs}};
  Json a;
  a["t1"] = config.analysis.t1;
  a["t2"] = config.analysis.t2;
  a["tolerance"] = config.analysis.tolerance;
  a["objective"] = config.analysis.objective;
  if (!config.analysis.rho_grid.empty()) a["rho_grid"] = config.analysis.rho_grid;
  a["test_fns"] = config.analysis.test_fns;
  a["weak_horizon"] = config.analysis.weak_horizon;
  a["weak_seeds"] = config.analysis.weak_seeds;
  a["weak_lambda"] = config.analysis.weak_lambda;
  a["tail_fraction"] = config.analysis.tail_fraction;
  a["criticality_tol"] = config.analysis.criticality_tol;
  j["analysis"] = a;
  return j;
}

CompositeProblem build_problem(const ProblemConfig& config) {
  LinearMap op = [&]() -> LinearMap {
    if (!config.operator_csv.empty()) {
      return LinearMap::from_csv(config.operator_csv, config.operator_seed);
    }
    if (config.operator_kind == "identity") {
      if (config.m != config.n) {
        throw ConfigError("identity operator requires m == n");
      }
      return make_identity_operator(config.n);
    }
    if (config.operator_kind == "gaussian") {
      return make_gaussian_operator(config.m, config.n, config.operator_seed,
                                    config.sigma_min, config.sigma_max);
    }
    if (config.operator_kind == "first_difference") {
      const bool pad = config.pad_to_square || config.m == config.n;
      if (config.m != (pad ? config.n : config.n - 1)) {
        throw ConfigError("first-difference operator requires m == n-1 (or m == n padded)");
      }
      return make_first_difference_operator(config.n, pad);
    }
    throw ConfigError("unknown operator kind: '" + config.operator_kind +
                      "' (expected identity|gaussian|first_difference)");
  }();

  SmoothSum smooth = [&]() -> SmoothSum {
    if (!config.data_csv.empty()) {
      Matrix data = read_matrix_csv(config.data_csv);
      Vector targets = config.target_csv.empty() ? Vector::Zero(data.rows())
                                                 : read_vector_csv(config.target_csv);
      return SmoothSum(std::move(data), std::move(targets));
    }
    return make_least_squares_data(config.components, config.n, config.data_seed,
                                   config.target_noise);
  }();

  Regularizer reg(regularizer_kind_from_string(config.reg_kind), config.reg_weight,
                  config.reg_shape, op.rows());
  return CompositeProblem(std::move(smooth), std::move(reg), std::move(op), config.mu);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  RunConfig config = parse_config(j);

  if (const char* env = std::getenv("COMPOSITEFLOW_SEED")) {
    const std::uint64_t seed = std::strtoull(env, nullptr, 10);
    config.solver.seed = seed;
    config.flow.seed = seed;
    config.noise.master_seed = seed;
    config.echo = config_to_json(config);
  }

  // Pre-check every constraint the run would hit.
  const CompositeProblem problem = build_problem(config.problem);
  if (config.is_solver_kind()) {
    validate(config.solver, problem.op(), problem.regularizer(), problem.mu(),
             solver_kind_from_string(config.algorithm));
  } else {
    validate(config.flow, problem, flow_kind_from_string(config.algorithm));
  }
  if (!config.problem.x0.empty() &&
      static_cast<Eigen::Index>(config.problem.x0.size()) != problem.dim()) {
    throw ConfigError("problem.x0 length does not match dimension n");
  }
  return config;
}

std::uint64_t master_seed_of(const RunConfig& config) {
  if (config.is_solver_kind()) {
    return config.noise.master_seed != 0 ? config.noise.master_seed : config.solver.seed;
  }
  return config.flow.seed;
}

Json RunManifest::to_json() const {
  Json j;
  j["version"] = kVersion;
  j["config"] = config_echo;
  Json derived;
  derived["gram_norm"] = gram_norm;
  derived["min_eig_gram_adjoint"] = min_eig_gram_adjoint;
  derived["L_f"] = smooth_lipschitz;
  derived["L_h"] = reg_lipschitz;
  derived["modulus"] = modulus;
  derived["L"] = smoothness;
  derived["beta"] = beta;
  derived["lambda"] = lambda;
  j["derived"] = derived;
  Json outs = Json::array();
  for (const SeedOutput& o : outputs) {
    outs.push_back(Json{
        {"index", o.index}, {"seed", o.seed}, {"file", o.file}, {"status", o.status}});
  }
  j["outputs"] = outs;
  j["wall_clock_seconds"] = wall_clock_seconds;
  return j;
}

RunManifest run_ensemble(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const CompositeProblem problem = build_problem(config.problem);
  std::filesystem::create_directories(config.output.dir);

  RunManifest manifest;
  manifest.config_echo = config.echo.is_null() ? config_to_json(config) : config.echo;
  manifest.gram_norm = problem.op().gram_norm();
  manifest.min_eig_gram_adjoint = problem.op().min_eig_gram_adjoint();
  manifest.smooth_lipschitz = problem.smooth().lipschitz();
  manifest.reg_lipschitz = problem.regularizer().lipschitz();
  manifest.modulus = problem.regularizer().modulus();
  manifest.smoothness = problem.smoothness();

  const bool solver_kind = config.is_solver_kind();
  SolverParams params;
  FlowConfig flow_cfg;
  if (solver_kind) {
    params = validate(config.solver, problem.op(), problem.regularizer(), problem.mu(),
                      solver_kind_from_string(config.algorithm));
    manifest.beta = params.beta;
    manifest.lambda = params.lambda;
  } else {
    flow_cfg = validate(config.flow, problem, flow_kind_from_string(config.algorithm));
    manifest.beta = 1.0 - flow_cfg.gamma / std::sqrt(flow_cfg.rho);
    manifest.lambda = flow_cfg.lambda;
  }

  Vector x0;
  if (!config.problem.x0.empty()) {
    x0 = Eigen::Map<const Vector>(config.problem.x0.data(),
                                  static_cast<Eigen::Index>(config.problem.x0.size()));
  }

  const int size = config.ensemble.size;
  const std::uint64_t master = master_seed_of(config);
  manifest.outputs.resize(static_cast<std::size_t>(size));

  const auto run_one = [&](int index) {
    SeedOutput out;
    out.index = index;
    out.seed = derive_seed(master, static_cast<std::uint64_t>(index));
    char name[64];
    std::snprintf(name, sizeof(name), "%s_seed%04d.csv", solver_kind ? "traj" : "path", index);
    out.file = name;
    const std::string full = config.output.dir + "/" + out.file;
    try {
      if (solver_kind) {
        SolverParams seeded = params;
        seeded.seed = out.seed;
        RunOptions options;
        options.x0 = x0;
        options.state_stride = config.output.stride;
        const Trajectory trajectory =
            run(solver_kind_from_string(config.algorithm), problem, seeded,
                config.noise.with_seed(out.seed), options);
        write_trajectory_csv(full, trajectory);
        out.status = trajectory.status;
      } else {
        FlowConfig seeded = flow_cfg;
        seeded.seed = out.seed;
        seeded.x0 = x0;
        const SampledPath path =
            simulate(flow_kind_from_string(config.algorithm), problem, seeded);
        write_path_csv(full, path, config.output.write_state);
        out.status = path.status;
      }
    } catch (const std::exception& e) {
      out.status = std::string("error: ") + e.what();
    }
    manifest.outputs[static_cast<std::size_t>(index)] = out;
  };

  const int jobs = std::max(1, std::min(config.ensemble.jobs, size));
  if (jobs == 1) {
    for (int i = 0; i < size; ++i) run_one(i);
  } else {
    std::atomic<int> next{0};
    const auto worker = [&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= size) break;
        run_one(i);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  manifest.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(config.output.dir + "/manifest.json", manifest.to_json());
  return manifest;
}

namespace {

const char* const kAnalysisFiles[] = {"descent_report.json",     "energy_report.json",
                                      "lyapunov_report.json",    "rate_fit_report.json",
                                      "criticality_report.json", "weak_order_report.json"};

}  // namespace

Json report(const std::string& dir) {
  Json summary;
  summary["version"] = kVersion;

  Json gaps = Json::array();
  Json analyses;
  Json verdicts;
  int found = 0;

  const std::string manifest_path = dir + "/manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    Json manifest = read_json(manifest_path);
    manifest.erase("wall_clock_seconds");  // keep the report idempotent
    summary["manifest"] = manifest;
  } else {
    gaps.push_back("manifest.json");
  }

  for (const char* file : kAnalysisFiles) {
    const std::string path = dir + "/" + file;
    if (!std::filesystem::exists(path)) {
      gaps.push_back(file);
      continue;
    }
    const Json j = read_json(path);
    const std::string name = j.contains("analysis") ? j["analysis"].get<std::string>() : file;
    analyses[name] = j;
    ++found;
    if (j.contains("model")) verdicts[name] = j["model"];
    if (j.contains("slope")) verdicts[name] = j["slope"];
    if (j.contains("verdict")) verdicts[name] = j["verdict"];
    if (j.contains("pass")) verdicts[name] = j["pass"].get<bool>() ? "pass" : "fail";
  }

  summary["status"] = found == 0 ? "no-analyses" : "ok";
  summary["gaps"] = gaps;
  summary["verdicts"] = verdicts;
  summary["analyses"] = analyses;

  // Plot-ready series: one row per (series, abscissa, value).
  std::ofstream series(dir + "/series.csv");
  series << "series,t,value\n";
  for (const auto& item : analyses.items()) {
    if (!item.value().contains("series")) continue;
    for (const auto& point : item.value()["series"]) {
      series << item.key() << ',' << format_double(point[0].get<double>()) << ','
             << format_double(point[1].get<double>()) << '\n';
    }
  }
  return summary;
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open: " + path);
  try {
    return Json::parse(in);
  } catch (const std::exception& e) {
    throw UsageError("invalid JSON in " + path + ": " + e.what());
  }
}

}  // namespace compositeflow
