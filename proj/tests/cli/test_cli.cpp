#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"

using namespace iwan;
using namespace iwan::cli;
namespace fs = std::filesystem;

namespace {

const std::string kTiny =
    "problem: test1\n"
    "dim: 2\n"
    "iterations: 4\n"
    "n_interior: 100\n"
    "n_boundary: 20\n"
    "u_depth: 3\n"
    "u_width: 5\n"
    "gamma_depth: 3\n"
    "gamma_width: 5\n"
    "test_depth: 3\n"
    "test_width: 5\n"
    "eval_cadence: 2\n"
    "grid_per_axis: 10\n";

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("iwan_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string error_of(const std::string& text) {
  try {
    parse_run_config(text, "cfg.yaml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config errors name the key and line") {
  CHECK(error_of("dim: 2\n") == "cfg.yaml: missing required key 'problem'");
  CHECK(error_of("") == "cfg.yaml: missing required key 'problem'");
  CHECK(error_of("problem: test1\ndim: 2\nitteration: 5\n") == "cfg.yaml:3: unknown key 'itteration'");
  CHECK(error_of("problem: test1\ntau_theta: fast\n") == "cfg.yaml:2: tau_theta: expected a number, got 'fast'");
  CHECK(error_of("problem: test1\niterations: -3\n").rfind("cfg.yaml:2: iterations:", 0) == 0);
  CHECK(error_of("problem: test1\nseed: 1\nseed: 2\n").find("duplicate key 'seed'") != std::string::npos);
  CHECK(error_of("problem: test1\nsweep_depth: []\n").find("must not be empty") != std::string::npos);
  CHECK(error_of("problem: test1\noptimizer_u: rmsprop\n").rfind("cfg.yaml:2:", 0) == 0);
  CHECK(error_of("problem: nope\n").rfind("cfg.yaml:1:", 0) == 0);
  CHECK(error_of("problem: test1\ndim: 3\nn_boundary: 4\n").find("n_boundary") != std::string::npos);
  CHECK(error_of("problem: test1\nsweep_scale: [1]\nsweep_n_interior: [5]\n").find("sweep_scale") != std::string::npos);
  CHECK(error_of("- a\n- b\n").find("mapping") != std::string::npos);
}

TEST_CASE("full-scale test1 config resolves to the published settings") {
  const RunConfig c = load_run_config(IWAN_SOURCE_DIR "/configs/test1.yaml");
  CHECK(c.problem == "test1");
  CHECK(c.dim == 5);
  CHECK(c.solve.n_interior == 100000);
  CHECK(c.solve.n_boundary == 100u * 5u);
  CHECK(c.solve.beta_prime == 10.0);
  CHECK(c.solve.beta == 10000.0);
  CHECK(c.solve.iterations == 20000);
  CHECK(c.solve.u_shape == NetShape{9, 20});
  CHECK(c.solve.optimizers[0] == OptimizerKind::adagrad);
  const std::string yaml = to_yaml(c);
  CHECK(yaml.find("n_interior: 100000\n") != std::string::npos);
  CHECK(yaml.find("ball_bound: .inf\n") != std::string::npos);
}

TEST_CASE("every shipped config parses") {
  for (const auto& entry : fs::directory_iterator(IWAN_SOURCE_DIR "/configs")) {
    CAPTURE(entry.path().string());
    const bool compare = entry.path().filename().string().find("fdm") != std::string::npos;
    CHECK_NOTHROW(load_run_config(entry.path().string(), compare ? fdm_compare_defaults() : RunConfig{}));
  }
}

TEST_CASE("resolved config round-trips") {
  RunConfig c = parse_run_config(kTiny, "tiny");
  c.noise = 0.05;
  c.label = "odd: label # with \"quotes\"";
  c.solve.tau_theta = 0.1 + 0.2;  // not representable in short decimal form
  c.solve.ball_bound = 123.456;
  c.solve.density = Density::gaussian(Eigen::Vector2d(0.1, -0.2), Eigen::Vector2d(3.0, 0.5));
  c.solve.optimizers = {OptimizerKind::adam, OptimizerKind::sgd, OptimizerKind::adagrad, OptimizerKind::adam};
  c.solve.order = UpdateOrder::algorithm1;
  c.sweep.scale = {0.25, 4.0};
  c.sweep.seed = {7, 8};
  c.fdm.lambdas = {0.5};
  const std::string once = to_yaml(c);
  const RunConfig back = parse_run_config(once, "resolved");
  CHECK(to_yaml(back) == once);
  CHECK(back.solve.tau_theta == c.solve.tau_theta);
  CHECK(back.label == c.label);
  CHECK(back.solve.density.kind == Density::Kind::gaussian_restricted);
  CHECK(back.sweep.scale == c.sweep.scale);

  RunConfig plain = parse_run_config(kTiny, "tiny");
  CHECK(parse_run_config(to_yaml(plain), "resolved").solve.ball_bound == std::numeric_limits<double>::infinity());
}

TEST_CASE("fdm-compare defaults encode the matched budget") {
  const RunConfig c = parse_run_config("problem: test2\n", "cmp", fdm_compare_defaults());
  CHECK(c.dim == 2);
  CHECK(c.solve.u_shape == NetShape{5, 15});  // 4 hidden layers of 15
  CHECK(c.solve.gamma_shape == NetShape{5, 15});
  CHECK(c.solve.n_interior == 1000);
  CHECK(c.solve.n_boundary == 120);
  CHECK(c.fdm.n == 31);
  CHECK(c.fdm.lambdas == std::vector<double>{0.01, 0.1, 1.0});
}

TEST_CASE("solve writes the documented artifacts deterministically") {
  const RunConfig c = parse_run_config(kTiny, "tiny");
  const fs::path a = scratch("solve_a");
  const fs::path b = scratch("solve_b");
  std::ostringstream log;
  cmd_solve(c, a, log);
  cmd_solve(c, b, log);
  CHECK(log.str().find("rel_error_gamma=") != std::string::npos);

  const std::vector<std::string> history = lines(slurp(a / "history.csv"));
  CHECK(history.front() == "iteration,e_value,l_bdry,total,rel_error_gamma,grad_mapping_norm");
  CHECK(history.size() == 1 + 3);  // iterations 0, 2, 4
  CHECK(lines(slurp(a / "timing.csv")).front() == "iteration,elapsed_seconds");
  const std::vector<std::string> gamma = lines(slurp(a / "field_gamma.csv"));
  CHECK(gamma.front() == "x1,x2,gamma");
  CHECK(gamma.size() == 1 + 100);
  CHECK(lines(slurp(a / "field_abs_error.csv")).front() == "x1,x2,abs_error");
  CHECK(slurp(a / "history.csv") == slurp(b / "history.csv"));
  CHECK(slurp(a / "field_gamma.csv") == slurp(b / "field_gamma.csv"));

  // Feeding the resolved config back reproduces the run.
  const fs::path again = scratch("solve_again");
  cmd_solve(load_run_config((a / "resolved_config.yaml").string()), again, log);
  CHECK(slurp(again / "history.csv") == slurp(a / "history.csv"));
  CHECK(slurp(again / "resolved_config.yaml") == slurp(a / "resolved_config.yaml"));
}

TEST_CASE("sweep cells, summary and failure marking") {
  RunConfig c = parse_run_config(kTiny + "sweep_width: [4, 6]\nsweep_seed: [1, 2]\n", "sweep");
  const fs::path out = scratch("sweep");
  std::ostringstream log;
  CHECK(cmd_sweep(c, out, 2, log) == kExitOk);
  const std::vector<std::string> summary = lines(slurp(out / "summary.csv"));
  REQUIRE(summary.size() == 1 + 4);
  CHECK(summary[0] == "cell,depth,width,n_interior,n_boundary,scale,seed,status,final_rel_error,wall_seconds");
  CHECK(summary[1].rfind("cell_000,3,4,100,20,,1,ok,", 0) == 0);
  CHECK(summary[4].rfind("cell_003,3,6,100,20,,2,ok,", 0) == 0);
  for (int i = 0; i < 4; ++i) CHECK(fs::exists(out / ("cell_00" + std::to_string(i)) / "history.csv"));

  // Scale axis; S = 0.01 gives N_b = 2 which fails validation in 2D.
  c = parse_run_config(kTiny + "sweep_scale: [0.01, 0.5]\nscale_base_interior: 200\nscale_base_boundary: 200\n",
                       "scale");
  const fs::path scaled = scratch("scale");
  CHECK(cmd_sweep(c, scaled, 1, log) == kExitRunFailed);
  const std::vector<std::string> rows = lines(slurp(scaled / "summary.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[1] == "cell_000,3,5,2,2,0.01,1,failed,,");
  CHECK(rows[2].rfind("cell_001,3,5,100,100,0.5,1,ok,", 0) == 0);
  CHECK(slurp(scaled / "cell_000" / "error.txt").find("n_boundary") != std::string::npos);

  // A single-cell sweep matches a plain solve.
  c = parse_run_config(kTiny + "sweep_seed: [1]\n", "one");
  const fs::path one = scratch("one");
  CHECK(cmd_sweep(c, one, 1, log) == kExitOk);
  const fs::path plain = scratch("plain");
  cmd_solve(parse_run_config(kTiny, "tiny"), plain, log);
  CHECK(slurp(one / "cell_000" / "history.csv") == slurp(plain / "history.csv"));

  CHECK_THROWS_AS(cmd_sweep(parse_run_config(kTiny, "tiny"), scratch("none"), 1, log), ConfigError);
}

TEST_CASE("fdm-compare rows and files") {
  RunConfig c = parse_run_config(
      "problem: test2\niterations: 3\nfdm_iterations: 20\nfdm_n: 11\ngrid_per_axis: 10\ntest_depth: 3\n"
      "test_width: 5\n",
      "cmp", fdm_compare_defaults());
  const fs::path out = scratch("compare");
  std::ostringstream log;
  CHECK(cmd_fdm_compare(c, out, log) == kExitOk);
  const std::vector<std::string> rows = lines(slurp(out / "summary.csv"));
  REQUIRE(rows.size() == 1 + 3 + 1);
  CHECK(rows[0] == "method,lambda,status,final_objective,rel_error_gamma,wall_seconds");
  CHECK(rows[1].rfind("fdm,0.01,ok,", 0) == 0);
  CHECK(rows[2].rfind("fdm,0.1,ok,", 0) == 0);
  CHECK(rows[3].rfind("fdm,1,ok,", 0) == 0);
  CHECK(rows[4].rfind("iwan,,ok,", 0) == 0);
  CHECK(fs::exists(out / "fdm_lambda_0.1" / "field_abs_error.csv"));
  CHECK(lines(slurp(out / "fdm_lambda_0.1" / "trace.csv")).front() == "iteration,objective");
  CHECK(fs::exists(out / "iwan" / "field_abs_error.csv"));

  c = parse_run_config("problem: test1\ndim: 3\n", "cmp", fdm_compare_defaults());
  CHECK_THROWS_AS(cmd_fdm_compare(c, scratch("compare3d"), log), std::invalid_argument);
}

TEST_CASE("worker count resolution") {
  ::unsetenv("IWAN_WORKERS");
  CHECK(resolve_workers(0) == 1);
  CHECK(resolve_workers(3) == 3);
  ::setenv("IWAN_WORKERS", "4", 1);
  CHECK(resolve_workers(0) == 4);
  CHECK(resolve_workers(2) == 2);
  ::setenv("IWAN_WORKERS", "many", 1);
  CHECK_THROWS_AS(resolve_workers(0), std::invalid_argument);
  ::unsetenv("IWAN_WORKERS");
}

TEST_CASE("binary exit codes") {
  const fs::path dir = scratch("binary");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.yaml") << "dim: 2\n";
  const std::string cmd = std::string(IWAN_CLI_PATH) + " solve --config " + (dir / "bad.yaml").string() + " --out " +
                          (dir / "o").string() + " 2> " + (dir / "err.txt").string();
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == kExitBadConfig);
  CHECK(slurp(dir / "err.txt").find("missing required key 'problem'") != std::string::npos);

  std::ofstream(dir / "good.yaml") << kTiny;
  const std::string run = std::string(IWAN_CLI_PATH) + " solve --config " + (dir / "good.yaml").string() +
                          " --seed 5 --out " + (dir / "o").string() + " > " + (dir / "log.txt").string();
  CHECK(WEXITSTATUS(std::system(run.c_str())) == kExitOk);
  CHECK(slurp(dir / "o" / "resolved_config.yaml").find("seed: 5\n") != std::string::npos);
  CHECK(slurp(dir / "log.txt").find("seed=5") != std::string::npos);
}
