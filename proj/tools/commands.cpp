#include "commands.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include "iwan/fdm.hpp"

namespace iwan::cli {

namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_fields(const fs::path& dir, const FieldEvaluator& candidate, const ProblemSpec& problem, int per_axis) {
  const FieldEvaluator truth = [&problem](const Eigen::MatrixXd& pts) { return problem.gamma_batch(pts); };
  const SliceTable mine = export_field(candidate, problem.input_domain(), per_axis);
  const SliceTable exact = export_field(truth, problem.input_domain(), per_axis);
  std::ofstream gamma = open_out(dir / "field_gamma.csv");
  write_slice_csv(gamma, mine, "gamma");
  std::ofstream err = open_out(dir / "field_abs_error.csv");
  write_slice_csv(err, abs_difference(mine, exact), "abs_error");
}

struct SolveOutcome {
  double final_error = 0.0;
  double final_total = 0.0;
  double wall = 0.0;
};

SolveOutcome solve_into(const RunConfig& config, const fs::path& out) {
  fs::create_directories(out);
  {
    std::ofstream resolved = open_out(out / "resolved_config.yaml");
    resolved << to_yaml(config);
  }
  const auto start = std::chrono::steady_clock::now();
  const ProblemSpec problem = build_problem(config);
  IwanSolver solver(problem, config.solve);
  solver.run();
  const double wall = seconds_since(start);
  {
    std::ofstream history = open_out(out / "history.csv");
    write_history_csv(history, solver.history());
    std::ofstream timing = open_out(out / "timing.csv");
    write_timing_csv(timing, solver.history());
  }
  write_fields(out, solver.gamma_field(), problem, config.solve.grid_per_axis);
  const HistoryRecord& last = solver.history().records.back();
  return {last.rel_error, last.total, wall};
}

struct Cell {
  RunConfig config;
  std::optional<double> scale;
};

std::vector<Cell> expand(const RunConfig& base) {
  std::vector<Cell> cells{{base, std::nullopt}};
  const auto axis = [&cells](const auto& values, auto apply) {
    if (values.empty()) return;
    std::vector<Cell> next;
    for (const Cell& c : cells) {
      for (const auto& v : values) {
        Cell copy = c;
        apply(copy, v);
        next.push_back(std::move(copy));
      }
    }
    cells = std::move(next);
  };
  const SweepAxes& s = base.sweep;
  axis(s.depth, [](Cell& c, int v) { c.config.solve.u_shape.depth = c.config.solve.gamma_shape.depth = v; });
  axis(s.width, [](Cell& c, int v) { c.config.solve.u_shape.width = c.config.solve.gamma_shape.width = v; });
  axis(s.n_interior, [](Cell& c, std::size_t v) { c.config.solve.n_interior = v; });
  axis(s.n_boundary, [](Cell& c, std::size_t v) { c.config.solve.n_boundary = v; });
  axis(s.scale, [&s](Cell& c, double v) {
    c.scale = v;
    c.config.solve.n_interior = static_cast<std::size_t>(std::llround(v * static_cast<double>(s.scale_base_interior)));
    c.config.solve.n_boundary = static_cast<std::size_t>(std::llround(v * static_cast<double>(s.scale_base_boundary)));
  });
  axis(s.seed, [](Cell& c, std::uint64_t v) { c.config.solve.seed = v; });
  for (Cell& c : cells) c.config.sweep = SweepAxes{};
  return cells;
}

std::string cell_name(std::size_t index) {
  std::string digits = std::to_string(index);
  return "cell_" + std::string(digits.size() < 3 ? 3 - digits.size() : 0, '0') + digits;
}

}  // namespace

void cmd_solve(const RunConfig& config, const fs::path& out, std::ostream& log) {
  const SolveOutcome r = solve_into(config, out);
  log << "problem=" << config.problem << " dim=" << config.dim << " seed=" << config.solve.seed
      << " iterations=" << config.solve.iterations << " rel_error_gamma=" << format_double(r.final_error)
      << " wall_seconds=" << format_double(r.wall) << "\n";
}

int cmd_sweep(const RunConfig& config, const fs::path& out, int workers, std::ostream& log) {
  if (config.sweep.empty()) throw ConfigError("sweep: no sweep_* axis declared");
  const std::vector<Cell> cells = expand(config);
  fs::create_directories(out);
  {
    std::ofstream resolved = open_out(out / "resolved_config.yaml");
    resolved << to_yaml(config);
  }

  struct Row {
    bool ok = false;
    SolveOutcome outcome;
  };
  std::vector<Row> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  const auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const fs::path dir = out / cell_name(i);
      try {
        rows[i].outcome = solve_into(cells[i].config, dir);
        rows[i].ok = true;
      } catch (const std::exception& e) {
        fs::create_directories(dir);
        std::ofstream(dir / "error.txt") << e.what() << "\n";
      }
      const std::lock_guard lock(log_mutex);
      log << cell_name(i) << " " << (rows[i].ok ? "ok rel_error_gamma=" + format_double(rows[i].outcome.final_error)
                                                : std::string("failed"))
          << "\n";
    }
  };
  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(cells.size())));
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(work);
    work();
  }

  std::ofstream summary = open_out(out / "summary.csv");
  summary << "cell,depth,width,n_interior,n_boundary,scale,seed,status,final_rel_error,wall_seconds\n";
  bool all_ok = true;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const SolveConfig& s = cells[i].config.solve;
    summary << cell_name(i) << "," << s.u_shape.depth << "," << s.u_shape.width << "," << s.n_interior << ","
            << s.n_boundary << "," << (cells[i].scale ? format_double(*cells[i].scale) : "") << "," << s.seed << ",";
    if (rows[i].ok) {
      summary << "ok," << format_double(rows[i].outcome.final_error) << "," << format_double(rows[i].outcome.wall)
              << "\n";
    } else {
      summary << "failed,,\n";
      all_ok = false;
    }
  }
  return all_ok ? kExitOk : kExitRunFailed;
}

int cmd_fdm_compare(const RunConfig& config, const fs::path& out, std::ostream& log) {
  const ProblemSpec problem = build_problem(config);
  if (problem.dim() != 2 || problem.time_dependent()) {
    throw std::invalid_argument("fdm-compare needs a two-dimensional elliptic problem, got " + problem.id() +
                                " with dim " + std::to_string(problem.dim()));
  }
  fs::create_directories(out);
  {
    std::ofstream resolved = open_out(out / "resolved_config.yaml");
    resolved << to_yaml(config);
  }
  std::ofstream summary = open_out(out / "summary.csv");
  summary << "method,lambda,status,final_objective,rel_error_gamma,wall_seconds\n";
  bool all_ok = true;

  const TestGrid grid(problem.input_domain(), config.solve.seed, config.solve.grid_per_axis);
  const FieldEvaluator truth = [&problem](const Eigen::MatrixXd& pts) { return problem.gamma_batch(pts); };
  for (double lambda : config.fdm.lambdas) {
    const fs::path dir = out / ("fdm_lambda_" + format_double(lambda));
    fs::create_directories(dir);
    FdmConfig fc;
    fc.n = config.fdm.n;
    fc.lambda = lambda;
    fc.iterations = config.fdm.iterations;
    fc.step = config.fdm.step;
    Rng noise = make_stream(config.solve.seed, stream::noise, 0xFD);
    const auto start = std::chrono::steady_clock::now();
    try {
      const FdmResult r = fdm_solve(problem, fc, noise);
      const double wall = seconds_since(start);
      const FieldEvaluator gamma = grid_evaluator(r.gamma);
      const double err = relative_l2(gamma, truth, grid);
      std::ofstream trace = open_out(dir / "trace.csv");
      trace << "iteration,objective\n";
      for (std::size_t k = 0; k < r.trace.size(); ++k) trace << k << "," << format_double(r.trace[k]) << "\n";
      write_fields(dir, gamma, problem, config.solve.grid_per_axis);
      summary << "fdm," << format_double(lambda) << ",ok," << format_double(r.trace.back()) << ","
              << format_double(err) << "," << format_double(wall) << "\n";
      log << "fdm lambda=" << format_double(lambda) << " rel_error_gamma=" << format_double(err) << "\n";
    } catch (const FdmDivergence& e) {
      std::ofstream(dir / "error.txt") << e.what() << "\n";
      summary << "fdm," << format_double(lambda) << ",failed,,,\n";
      log << "fdm lambda=" << format_double(lambda) << " failed: " << e.what() << "\n";
      all_ok = false;
    }
  }

  try {
    const SolveOutcome r = solve_into(config, out / "iwan");
    summary << "iwan,,ok," << format_double(r.final_total) << "," << format_double(r.final_error) << ","
            << format_double(r.wall) << "\n";
    log << "iwan rel_error_gamma=" << format_double(r.final_error) << "\n";
  } catch (const std::exception& e) {
    std::ofstream(out / "iwan" / "error.txt") << e.what() << "\n";
    summary << "iwan,,failed,,,\n";
    log << "iwan failed: " << e.what() << "\n";
    all_ok = false;
  }
  return all_ok ? kExitOk : kExitRunFailed;
}

void cmd_problems(std::ostream& out) {
  out << "id,min_dim,max_dim,default_dim,description\n";
  for (const ProblemInfo& p : problem_catalog()) {
    out << p.id << "," << p.min_dim << "," << (p.max_dim < 0 ? std::string("any") : std::to_string(p.max_dim)) << ","
        << p.default_dim << ",\"" << p.description << "\"\n";
  }
}

int resolve_workers(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("IWAN_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    throw std::invalid_argument(std::string("IWAN_WORKERS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

}  // namespace iwan::cli
