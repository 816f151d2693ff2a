#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "compositeflow/errors.hpp"
#include "compositeflow/harness.hpp"

using namespace compositeflow;
namespace fs = std::filesystem;

namespace {

Json minimal_config() {
  return Json::parse(R"({
    "problem": {"n": 3, "N": 8, "reg": {"kind": "l1", "weight": 0.2}, "mu": 0.1},
    "algorithm": "lp_admm",
    "solver": {"rho": 2.0, "iterations": 20}
  })");
}

std::string write_temp_config(const Json& j, const std::string& name) {
  const std::string path = name;
  std::ofstream out(path);
  out << j.dump(2);
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("load_config fills documented defaults") {
  const std::string path = write_temp_config(minimal_config(), "harness_minimal.json");
  const RunConfig config = load_config(path);
  fs::remove(path);
  CHECK(config.problem.m == 3);            // identity operator: m = n
  CHECK(config.solver.eta == 1.0);         // default eta
  CHECK(config.solver.tau == 0.0);         // default tau resolved at validate time
  CHECK(config.output.stride == 100);
  CHECK(config.ensemble.size == 1);
  CHECK(config.noise.mode == NoiseMode::kExact);
}

TEST_CASE("load_config rejects a boundary tau quoting the constraint") {
  Json j = minimal_config();
  j["solver"]["tau"] = 3.0;  // rho ||A^T A|| + 1/eta = 2 + 1 exactly
  const std::string path = write_temp_config(j, "harness_boundary.json");
  try {
    load_config(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("tau must exceed rho*||A^T A|| + 1/eta") !=
          std::string::npos);
  }
  fs::remove(path);
}

TEST_CASE("unknown keys are rejected by name") {
  Json j = minimal_config();
  j["problem"]["typo_key"] = 1;
  try {
    parse_config(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("typo_key") != std::string::npos);
  }
  Json top = minimal_config();
  top["extra"] = true;
  CHECK_THROWS_AS(parse_config(top), ConfigError);
}

TEST_CASE("config round trip: load -> serialize -> load is the identity") {
  const RunConfig first = parse_config(minimal_config());
  const Json serialized = config_to_json(first);
  const RunConfig second = parse_config(serialized);
  CHECK(config_to_json(second) == serialized);
  CHECK(second.echo == first.echo);
}

TEST_CASE("COMPOSITEFLOW_SEED overrides every master seed") {
  const std::string path = write_temp_config(minimal_config(), "harness_seed.json");
  setenv("COMPOSITEFLOW_SEED", "424242", 1);
  const RunConfig config = load_config(path);
  unsetenv("COMPOSITEFLOW_SEED");
  fs::remove(path);
  CHECK(config.solver.seed == 424242);
  CHECK(config.flow.seed == 424242);
  CHECK(config.noise.master_seed == 424242);
  CHECK(config.echo["solver"]["seed"] == 424242);
}

TEST_CASE("run_ensemble: single member manifest") {
  Json j = minimal_config();
  j["output"] = Json{{"dir", "harness_m1"}};
  RunConfig config = parse_config(j);
  const RunManifest manifest = run_ensemble(config);
  CHECK(manifest.outputs.size() == 1);
  CHECK(manifest.outputs.front().status == "ok");
  CHECK(fs::exists("harness_m1/traj_seed0000.csv"));
  CHECK(fs::exists("harness_m1/manifest.json"));
  const Json m = read_json("harness_m1/manifest.json");
  CHECK(m["derived"].contains("gram_norm"));
  CHECK(m["derived"].contains("L"));
  CHECK(m["derived"].contains("lambda"));
  fs::remove_all("harness_m1");
}

TEST_CASE("run_ensemble: reruns and parallelism degree are byte-identical") {
  Json j = minimal_config();
  j["algorithm"] = "lp_sadmm";
  j["noise"] = Json{{"mode", "gaussian"}, {"master_seed", 11}};
  j["ensemble"] = Json{{"size", 8}, {"jobs", 1}};
  j["output"] = Json{{"dir", "harness_a"}};
  run_ensemble(parse_config(j));

  j["output"]["dir"] = "harness_b";
  run_ensemble(parse_config(j));

  j["output"]["dir"] = "harness_c";
  j["ensemble"]["jobs"] = 8;
  run_ensemble(parse_config(j));

  for (int i = 0; i < 8; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "traj_seed%04d.csv", i);
    const std::string a = slurp(std::string("harness_a/") + name);
    REQUIRE_FALSE(a.empty());
    CHECK(a == slurp(std::string("harness_b/") + name));
    CHECK(a == slurp(std::string("harness_c/") + name));
  }
  fs::remove_all("harness_a");
  fs::remove_all("harness_b");
  fs::remove_all("harness_c");
}

TEST_CASE("report: empty directory yields the no-analyses status") {
  fs::create_directories("harness_empty");
  const Json summary = report("harness_empty");
  CHECK(summary["status"] == "no-analyses");
  CHECK(summary["gaps"].size() == 7);  // manifest + six analyses missing
  fs::remove_all("harness_empty");
}

TEST_CASE("report is idempotent byte for byte") {
  fs::create_directories("harness_rep");
  Json fake;
  fake["analysis"] = "rate_fit";
  fake["model"] = "power";
  fake["rate"] = -2.0;
  fake["series"] = Json::array({Json::array({0.0, 1.0}), Json::array({1.0, 0.25})});
  write_json("harness_rep/rate_fit_report.json", fake);

  write_json("harness_rep/summary.json", report("harness_rep"));
  const std::string first = slurp("harness_rep/summary.json");
  const std::string first_series = slurp("harness_rep/series.csv");
  write_json("harness_rep/summary.json", report("harness_rep"));
  CHECK(slurp("harness_rep/summary.json") == first);
  CHECK(slurp("harness_rep/series.csv") == first_series);
  const Json summary = Json::parse(first);
  CHECK(summary["status"] == "ok");
  CHECK(summary["verdicts"].contains("rate_fit"));
  fs::remove_all("harness_rep");
}

TEST_CASE("config errors carry the offending context") {
  Json j = minimal_config();
  j["problem"]["reg"]["kind"] = "l0";
  CHECK_THROWS_WITH_AS(parse_config(j),
                       "unknown regularizer kind: 'l0' (expected l1|mcp|scad)", ConfigError);
  Json j2 = minimal_config();
  j2["problem"]["n"] = 2.5;
  CHECK_THROWS_AS(parse_config(j2), ConfigError);
}

TEST_CASE("problems load from CSV files") {
  std::ofstream("harness_data.csv") << "1,0\n0,1\n0.5,0.5\n";
  std::ofstream("harness_target.csv") << "1\n-1\n0\n";
  std::ofstream("harness_op.csv") << "2,0\n0,1\n";
  Json j = minimal_config();
  j["problem"] = Json{{"n", 2},
                      {"m", 2},
                      {"data_csv", "harness_data.csv"},
                      {"target_csv", "harness_target.csv"},
                      {"operator_csv", "harness_op.csv"},
                      {"reg", Json{{"kind", "l1"}, {"weight", 0.2}}},
                      {"mu", 0.1}};
  const RunConfig config = parse_config(j);
  const CompositeProblem problem = build_problem(config.problem);
  CHECK(problem.dim() == 2);
  CHECK(problem.op().gram_norm() == doctest::Approx(4.0));
  Vector x(2);
  x << 1, 1;
  // f(1,1) = (0 + 0 + 0.5^2 * ... ) : residuals (0, 2, 1) against D x = (1,1,1)
  CHECK(problem.smooth().value(x) == doctest::Approx((0.0 + 4.0 + 1.0) / 6.0));
  fs::remove("harness_data.csv");
  fs::remove("harness_target.csv");
  fs::remove("harness_op.csv");
}

TEST_CASE("dynamics configs validate during load") {
  Json j = minimal_config();
  j["algorithm"] = "flow";
  j["flow"] = Json{{"lambda", 0.5}, {"dt", 0.01}, {"horizon", 1.0}};
  const std::string path = write_temp_config(j, "harness_flow_bad.json");
  CHECK_THROWS_AS(load_config(path), ConfigError);  // lambda below ||A^T A||
  fs::remove(path);
}
