#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "geomala/error.hpp"
#include "geomala/experiment.hpp"

using namespace geomala;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("geomala_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(GEOMALA_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string minimal(const std::string& kernel, const fs::path& out, const std::string& metric = "") {
  std::string cfg = R"({
  "target": {"name": "StdGaussian", "dim": 2},
  "kernel": {"kind": ")" + kernel + R"(", "lambda": 1.0},
)";
  if (!metric.empty()) cfg += R"(  "metric": {"kind": ")" + metric + "\"},\n";
  cfg += R"(  "run": {"m": 10000, "seed": 7},
  "output": {"dir": ")" + out.string() + R"("}
})";
  return cfg;
}

void check_csv_shape(const fs::path& p, std::size_t expect_rows) {
  std::ifstream in(p);
  std::string line;
  std::size_t columns = 0, rows = 0;
  while (std::getline(in, line)) {
    const std::size_t c = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    if (columns == 0) columns = c;
    REQUIRE(c == columns);
    ++rows;
  }
  CHECK(rows == expect_rows + 1);
}

}  // namespace

TEST_CASE("run writes traces and a summary that re-parses") {
  const fs::path dir = scratch("run");
  write(dir / "c.json", minimal("RWM", dir / "out"));
  REQUIRE(run_cli("run --quiet --config " + (dir / "c.json").string(), dir / "log") == 0);
  REQUIRE(fs::exists(dir / "out" / "trace_c0.csv"));
  REQUIRE(fs::exists(dir / "out" / "summary.json"));
  const json s = json::parse(slurp(dir / "out" / "summary.json"));
  const std::set<std::string> keys = {"acceptance_rate", "tau", "ess", "tv", "seed", "wall_time_s"};
  std::set<std::string> got;
  for (auto it = s.begin(); it != s.end(); ++it) got.insert(it.key());
  CHECK(got == keys);
  CHECK(s["seed"] == 7);
  CHECK(s["tau"].contains("x1"));
  CHECK(s["ess"].contains("norm2"));
  CHECK(s["acceptance_rate"].get<double>() > 0.0);
  const std::string csv = slurp(dir / "out" / "trace_c0.csv");
  CHECK(csv.rfind("iter,accepted,log_pi,x1,x2\n", 0) == 0);
  check_csv_shape(dir / "out" / "trace_c0.csv", 9000);
}

TEST_CASE("same seed gives byte-identical traces; flags override the file") {
  const fs::path dir = scratch("determinism");
  write(dir / "c.json", minimal("MALA", dir / "a"));
  REQUIRE(run_cli("run --quiet --config " + (dir / "c.json").string(), dir / "log") == 0);
  REQUIRE(run_cli("run --quiet --config " + (dir / "c.json").string() + " --out-dir " + (dir / "b").string(),
                  dir / "log") == 0);
  CHECK(slurp(dir / "a" / "trace_c0.csv") == slurp(dir / "b" / "trace_c0.csv"));
  REQUIRE(run_cli("run --quiet --config " + (dir / "c.json").string() + " --seed 8 --chains 3 --out-dir " +
                      (dir / "c").string(),
                  dir / "log") == 0);
  CHECK(slurp(dir / "a" / "trace_c0.csv") != slurp(dir / "c" / "trace_c0.csv"));
  CHECK(fs::exists(dir / "c" / "trace_c2.csv"));
  CHECK(json::parse(slurp(dir / "c" / "summary.json"))["seed"] == 8);
}

TEST_CASE("MMALA with the identity metric reproduces MALA files") {
  const fs::path dir = scratch("lattice");
  write(dir / "mala.json", minimal("MALA", dir / "mala"));
  write(dir / "mmala.json", minimal("MMALA", dir / "mmala", "Identity"));
  REQUIRE(run_cli("run --quiet --config " + (dir / "mala.json").string(), dir / "log") == 0);
  REQUIRE(run_cli("run --quiet --config " + (dir / "mmala.json").string(), dir / "log") == 0);
  CHECK(slurp(dir / "mala" / "trace_c0.csv") == slurp(dir / "mmala" / "trace_c0.csv"));
}

TEST_CASE("config errors are line-precise and exit nonzero") {
  const fs::path dir = scratch("errors");
  write(dir / "unknown.json", "{\n  \"target\": {\"name\": \"StdGaussian\",\n    \"dimension\": 2}\n}\n");
  CHECK(run_cli("run --config " + (dir / "unknown.json").string(), dir / "log") != 0);
  CHECK(slurp(dir / "log").find("line 3") != std::string::npos);
  CHECK(slurp(dir / "log").find("dimension") != std::string::npos);

  write(dir / "type.json", "{\n  \"run\": {\n    \"m\": \"many\"\n  }\n}\n");
  CHECK(run_cli("run --config " + (dir / "type.json").string(), dir / "log") != 0);
  CHECK(slurp(dir / "log").find("line 3") != std::string::npos);

  write(dir / "syntax.json", "{\n  \"run\": {\n    \"m\": 10,,\n  }\n}\n");
  CHECK(run_cli("run --config " + (dir / "syntax.json").string(), dir / "log") != 0);
  CHECK(slurp(dir / "log").find("line 3") != std::string::npos);

  CHECK_THROWS_AS(parse_config("{\"kernel\": {\"kind\": \"HMC\"}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"bogus\": 1}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"run\": {\"m\": 100, \"burn_in\": 100}}"), ConfigError);
  CHECK_NOTHROW(parse_config("{}"));
}

TEST_CASE("defaults") {
  const ExperimentConfig cfg = parse_config(R"({"run": {"m": 5000}})");
  CHECK(cfg.run.burn_in_or_default() == 500);
  CHECK(cfg.run.thin == 1);
  CHECK(default_target_acceptance(KernelKind::RWM) == 0.234);
  CHECK(default_target_acceptance(KernelKind::MALA) == 0.574);
}

TEST_CASE("tuning with a single grid entry selects it and warns") {
  const fs::path dir = scratch("tune");
  ExperimentConfig cfg = parse_config(R"({
    "target": {"name": "StdGaussian", "dim": 3},
    "kernel": {"kind": "RWM", "lambda_grid": [0.8]},
    "run": {"m": 2000}
  })");
  cfg.output.dir = (dir / "out").string();
  const json r = cmd_tune(cfg);
  CHECK(r["selected_lambda"] == 0.8);
  CHECK(r["warnings"].size() == 1);
  const json again = json::parse(slurp(dir / "out" / "tuning.json"));
  CHECK(again["grid"].size() == 1);
  CHECK(again["grid"][0].contains("acceptance_rate"));
  CHECK(again["grid"][0]["ess"].contains("x1"));
}

TEST_CASE("scaling with one dimension reports no slope") {
  const fs::path dir = scratch("scaling");
  ExperimentConfig cfg = parse_config(R"({
    "target": {"name": "StdGaussian"},
    "kernel": {"kind": "RWM"},
    "run": {"m": 2000},
    "scaling": {"dims": [4], "iterations": 8}
  })");
  cfg.output.dir = (dir / "out").string();
  const json r = cmd_scaling(cfg);
  CHECK(r["slope"].is_null());
  REQUIRE(r["dims"].size() == 1);
  CHECK(r["dims"][0]["n"] == 4);
  CHECK(json::parse(slurp(dir / "out" / "scaling.json"))["slope"].is_null());
  CHECK(log_log_slope({1, 2, 4}, {1.0, std::pow(2.0, -0.5), 0.5}).value() == doctest::Approx(-1.0));
}

TEST_CASE("diffusion-check grids") {
  const fs::path dir = scratch("diffusion");
  ExperimentConfig cfg = parse_config(R"({
    "target": {"name": "StdGaussian", "dim": 1},
    "diffusion": {"process": "Langevin", "lo": -2, "hi": 2, "points": 21}
  })");
  cfg.output.dir = (dir / "out").string();
  const DiffusionCheckReport r = cmd_diffusion_check(cfg);
  CHECK(r.points.size() == 21);
  CHECK(r.max_residual < 1e-4);
  check_csv_shape(dir / "out" / "residuals.csv", 21);
  CHECK(slurp(dir / "out" / "residuals.csv").rfind("x1,residual\n", 0) == 0);

  cfg.diffusion.points = 1;
  cmd_diffusion_check(cfg);
  check_csv_shape(dir / "out" / "residuals.csv", 1);

  ExperimentConfig manifold = parse_config(R"({
    "target": {"name": "Gaussian", "mean": [0.5], "cov": [[2.0]]},
    "metric": {"kind": "Fisher"},
    "diffusion": {"process": "ManifoldLangevin"}
  })");
  manifold.output.dir = (dir / "m").string();
  CHECK(cmd_diffusion_check(manifold).max_residual < 1e-3);
}

TEST_CASE("compare writes a joint table") {
  const fs::path dir = scratch("compare");
  write(dir / "c.json", R"({
  "target": {"name": "BayesLogistic", "dim": 3, "rows": 40},
  "metric": {"kind": "Fisher"},
  "run": {"m": 2000},
  "compare": [
    {"kind": "RWM", "lambda": 0.3},
    {"kind": "MALA", "lambda": 0.3},
    {"kind": "SimplifiedMMALA", "lambda": 0.8}
  ],
  "output": {"dir": ")" + (dir / "out").string() + R"("}
})");
  REQUIRE(run_cli("compare --quiet --config " + (dir / "c.json").string(), dir / "log") == 0);
  const json r = json::parse(slurp(dir / "out" / "compare.json"));
  REQUIRE(r["rows"].size() == 3);
  CHECK(r["rows"][2]["metric"].get<std::string>().find("Fisher") != std::string::npos);
  check_csv_shape(dir / "out" / "compare.csv", 3);
}

TEST_CASE("partial failures exit nonzero and are listed") {
  const fs::path dir = scratch("partial");
  write(dir / "data.csv", "x1,y\n1.0,1\n-0.5,0\n");
  write(dir / "c.json", R"({
  "target": {"name": "BayesLogistic", "data": ")" + (dir / "data.csv").string() + R"("},
  "run": {"m": 100, "chains": 2, "x0": [1e308], "x0_scale": 1e308},
  "output": {"dir": ")" + (dir / "out").string() + R"("}
})");
  CHECK(run_cli("run --quiet --config " + (dir / "c.json").string(), dir / "log") != 0);
  CHECK(slurp(dir / "log").find("chain") != std::string::npos);
}

TEST_CASE("BayesLogistic data files") {
  const fs::path dir = scratch("data");
  write(dir / "data.csv", "x1,x2,y\n1.0,0.5,1\n-0.5,2.0,0\n0.1,-0.3,1\n");
  ExperimentConfig cfg = parse_config(R"({"target": {"name": "BayesLogistic", "data": ")" +
                                      (dir / "data.csv").string() + R"(", "prior_var": 4}})");
  const TargetPtr t = build_target(cfg.target);
  CHECK(t->dim() == 2);
  write(dir / "bad.csv", "x1,y\n1.0,1\nnope,0\n");
  cfg.target.data = (dir / "bad.csv").string();
  CHECK_THROWS_AS(build_target(cfg.target), UsageError);
}
