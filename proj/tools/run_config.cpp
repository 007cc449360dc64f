#include "run_config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace iwan::cli {

namespace {

struct Located {
  const YAML::Node& node;
  const std::string& source;
  const std::string& key;
  int line;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(source + ":" + std::to_string(line) + ": " + key + ": " + what);
  }

  std::string scalar() const {
    if (!node.IsScalar()) fail("expected a scalar value");
    return node.Scalar();
  }

  template <class T>
  T as(const char* type_name) const {
    if (!node.IsScalar()) fail(std::string("expected ") + type_name);
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      fail(std::string("expected ") + type_name + ", got '" + node.Scalar() + "'");
    }
  }

  double real() const {
    const double v = as<double>("a number");
    if (std::isnan(v)) fail("must not be NaN");
    return v;
  }
  double positive() const {
    const double v = real();
    if (!(v > 0.0)) fail("must be positive");
    return v;
  }
  double non_negative() const {
    const double v = real();
    if (!(v >= 0.0) || std::isinf(v)) fail("must be finite and non-negative");
    return v;
  }
  long long integer() const { return as<long long>("an integer"); }
  int int_at_least(long long lo) const {
    const long long v = integer();
    if (v < lo || v > std::numeric_limits<int>::max()) fail("must be an integer >= " + std::to_string(lo));
    return static_cast<int>(v);
  }
  std::size_t count_at_least(long long lo) const {
    const long long v = integer();
    if (v < lo) fail("must be an integer >= " + std::to_string(lo));
    return static_cast<std::size_t>(v);
  }
  std::uint64_t seed() const {
    const long long v = integer();
    if (v < 0) fail("must be a non-negative integer");
    return static_cast<std::uint64_t>(v);
  }

  template <class T, class F>
  std::vector<T> list(F element) const {
    if (!node.IsSequence()) fail("expected a list");
    if (node.size() == 0) fail("list must not be empty");
    std::vector<T> out;
    for (const YAML::Node& item : node) {
      const Located sub{item, source, key, item.Mark().line + 1};
      out.push_back(element(sub));
    }
    return out;
  }

  Eigen::Vector2d pair() const {
    const std::vector<double> v = list<double>([](const Located& s) { return s.real(); });
    if (v.size() != 2) fail("expected two numbers");
    return {v[0], v[1]};
  }
};

using Setter = std::function<void(const Located&, RunConfig&)>;

OptimizerKind optimizer(const Located& at) {
  try {
    return parse_optimizer_kind(at.scalar());
  } catch (const std::invalid_argument& e) {
    at.fail(e.what());
  }
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["problem"] = [](const Located& a, RunConfig& c) { c.problem = a.scalar(); };
    t["dim"] = [](const Located& a, RunConfig& c) { c.dim = a.int_at_least(1); };
    t["noise"] = [](const Located& a, RunConfig& c) { c.noise = a.non_negative(); };
    t["label"] = [](const Located& a, RunConfig& c) { c.label = a.scalar(); };
    t["iterations"] = [](const Located& a, RunConfig& c) { c.solve.iterations = a.int_at_least(0); };
    t["inner_steps"] = [](const Located& a, RunConfig& c) { c.solve.inner_steps = a.int_at_least(1); };
    t["tau_theta"] = [](const Located& a, RunConfig& c) { c.solve.tau_theta = a.positive(); };
    t["tau_eta"] = [](const Located& a, RunConfig& c) { c.solve.tau_eta = a.positive(); };
    t["beta"] = [](const Located& a, RunConfig& c) { c.solve.beta = a.non_negative(); };
    t["beta_prime"] = [](const Located& a, RunConfig& c) { c.solve.beta_prime = a.non_negative(); };
    t["n_interior"] = [](const Located& a, RunConfig& c) { c.solve.n_interior = a.count_at_least(1); };
    t["n_boundary"] = [](const Located& a, RunConfig& c) { c.solve.n_boundary = a.count_at_least(1); };
    t["n_initial"] = [](const Located& a, RunConfig& c) { c.solve.n_initial = a.count_at_least(0); };
    t["optimizer_u"] = [](const Located& a, RunConfig& c) { c.solve.optimizers[0] = optimizer(a); };
    t["optimizer_gamma"] = [](const Located& a, RunConfig& c) { c.solve.optimizers[1] = optimizer(a); };
    t["optimizer_phi"] = [](const Located& a, RunConfig& c) { c.solve.optimizers[2] = optimizer(a); };
    t["optimizer_phibar"] = [](const Located& a, RunConfig& c) { c.solve.optimizers[3] = optimizer(a); };
    t["ball_bound"] = [](const Located& a, RunConfig& c) { c.solve.ball_bound = a.positive(); };
    t["seed"] = [](const Located& a, RunConfig& c) { c.solve.seed = a.seed(); };
    t["eval_cadence"] = [](const Located& a, RunConfig& c) { c.solve.eval_cadence = a.int_at_least(1); };
    t["order"] = [](const Located& a, RunConfig& c) {
      try {
        c.solve.order = parse_update_order(a.scalar());
      } catch (const std::invalid_argument& e) {
        a.fail(e.what());
      }
    };
    t["u_depth"] = [](const Located& a, RunConfig& c) { c.solve.u_shape.depth = a.int_at_least(2); };
    t["u_width"] = [](const Located& a, RunConfig& c) { c.solve.u_shape.width = a.int_at_least(1); };
    t["gamma_depth"] = [](const Located& a, RunConfig& c) { c.solve.gamma_shape.depth = a.int_at_least(2); };
    t["gamma_width"] = [](const Located& a, RunConfig& c) { c.solve.gamma_shape.width = a.int_at_least(1); };
    t["test_depth"] = [](const Located& a, RunConfig& c) { c.solve.test_shape.depth = a.int_at_least(2); };
    t["test_width"] = [](const Located& a, RunConfig& c) { c.solve.test_shape.width = a.int_at_least(1); };
    t["density"] = [](const Located& a, RunConfig& c) {
      const std::string v = a.scalar();
      if (v == "uniform") {
        c.solve.density.kind = Density::Kind::uniform;
      } else if (v == "gaussian") {
        c.solve.density.kind = Density::Kind::gaussian_restricted;
      } else {
        a.fail("expected uniform or gaussian, got '" + v + "'");
      }
    };
    t["density_mean"] = [](const Located& a, RunConfig& c) { c.solve.density.mean = a.pair(); };
    t["density_inv_cov"] = [](const Located& a, RunConfig& c) { c.solve.density.inverse_covariance_diag = a.pair(); };
    t["penalty_theta"] = [](const Located& a, RunConfig& c) { c.solve.penalty_theta = a.non_negative(); };
    t["penalty_eta"] = [](const Located& a, RunConfig& c) { c.solve.penalty_eta = a.non_negative(); };
    t["grid_per_axis"] = [](const Located& a, RunConfig& c) { c.solve.grid_per_axis = a.int_at_least(2); };

    t["sweep_depth"] = [](const Located& a, RunConfig& c) {
      c.sweep.depth = a.list<int>([](const Located& s) { return s.int_at_least(2); });
    };
    t["sweep_width"] = [](const Located& a, RunConfig& c) {
      c.sweep.width = a.list<int>([](const Located& s) { return s.int_at_least(1); });
    };
    t["sweep_n_interior"] = [](const Located& a, RunConfig& c) {
      c.sweep.n_interior = a.list<std::size_t>([](const Located& s) { return s.count_at_least(1); });
    };
    t["sweep_n_boundary"] = [](const Located& a, RunConfig& c) {
      c.sweep.n_boundary = a.list<std::size_t>([](const Located& s) { return s.count_at_least(1); });
    };
    t["sweep_scale"] = [](const Located& a, RunConfig& c) {
      c.sweep.scale = a.list<double>([](const Located& s) { return s.positive(); });
    };
    t["sweep_seed"] = [](const Located& a, RunConfig& c) {
      c.sweep.seed = a.list<std::uint64_t>([](const Located& s) { return s.seed(); });
    };
    t["scale_base_interior"] = [](const Located& a, RunConfig& c) { c.sweep.scale_base_interior = a.count_at_least(1); };
    t["scale_base_boundary"] = [](const Located& a, RunConfig& c) { c.sweep.scale_base_boundary = a.count_at_least(1); };

    t["fdm_lambdas"] = [](const Located& a, RunConfig& c) {
      c.fdm.lambdas = a.list<double>([](const Located& s) { return s.non_negative(); });
    };
    t["fdm_n"] = [](const Located& a, RunConfig& c) { c.fdm.n = a.int_at_least(3); };
    t["fdm_iterations"] = [](const Located& a, RunConfig& c) { c.fdm.iterations = a.int_at_least(0); };
    t["fdm_step"] = [](const Located& a, RunConfig& c) { c.fdm.step = a.positive(); };
    return t;
  }();
  return table;
}

template <class T, class F>
std::string yaml_list(const std::vector<T>& values, F format) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += format(values[i]);
  }
  return out + "]";
}

std::string yaml_real(double v) {
  if (std::isinf(v)) return v > 0 ? ".inf" : "-.inf";
  return format_double(v);
}

std::string yaml_string(const std::string& s) {
  YAML::Emitter e;
  e << YAML::DoubleQuoted << s;
  return e.c_str();
}

}  // namespace

RunConfig fdm_compare_defaults() {
  RunConfig c;
  c.problem = "test2";
  c.dim = 2;
  c.solve.u_shape = c.solve.gamma_shape = NetShape{5, 15};
  c.solve.n_interior = 1000;
  c.solve.n_boundary = 120;
  return c;
}

RunConfig parse_run_config(const std::string& text, const std::string& source, const RunConfig& base) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsNull() && !root.IsMap()) throw ConfigError(source + ": expected a mapping of keys to values");

  RunConfig config = base;
  std::map<std::string, int> seen;
  if (root.IsMap()) {
    for (const auto& kv : root) {
      const int line = kv.first.Mark().line + 1;
      const std::string key = kv.first.as<std::string>();
      if (auto [it, fresh] = seen.emplace(key, line); !fresh) {
        throw ConfigError(source + ":" + std::to_string(line) + ": duplicate key '" + key + "' (first on line " +
                          std::to_string(it->second) + ")");
      }
      const auto setter = setters().find(key);
      if (setter == setters().end()) {
        throw ConfigError(source + ":" + std::to_string(line) + ": unknown key '" + key + "'");
      }
      setter->second(Located{kv.second, source, key, kv.second.Mark().line + 1}, config);
    }
  }
  if (config.problem.empty()) throw ConfigError(source + ": missing required key 'problem'");
  if (!config.sweep.scale.empty() && (!config.sweep.n_interior.empty() || !config.sweep.n_boundary.empty())) {
    throw ConfigError(source + ": sweep_scale cannot be combined with sweep_n_interior or sweep_n_boundary");
  }
  if (config.dim == 0) {
    for (const ProblemInfo& info : problem_catalog()) {
      if (info.id == config.problem) config.dim = info.default_dim;
    }
  }
  try {
    config.solve.validate(build_problem(config));
  } catch (const std::exception& e) {
    const auto at = seen.find("problem");
    throw ConfigError(source + (at != seen.end() ? ":" + std::to_string(at->second) : std::string()) + ": " + e.what());
  }
  return config;
}

RunConfig load_run_config(const std::string& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path, base);
}

ProblemSpec build_problem(const RunConfig& config) { return make_problem(config.problem, config.dim, config.noise); }

std::string to_yaml(const RunConfig& c) {
  const SolveConfig& s = c.solve;
  const auto real = [](double v) { return yaml_real(v); };
  const auto whole = [](auto v) { return std::to_string(v); };
  std::ostringstream out;
  out << "problem: " << yaml_string(c.problem) << "\n";
  out << "dim: " << c.dim << "\n";
  out << "noise: " << yaml_real(c.noise) << "\n";
  out << "label: " << yaml_string(c.label) << "\n";
  out << "iterations: " << s.iterations << "\n";
  out << "inner_steps: " << s.inner_steps << "\n";
  out << "tau_theta: " << yaml_real(s.tau_theta) << "\n";
  out << "tau_eta: " << yaml_real(s.tau_eta) << "\n";
  out << "beta: " << yaml_real(s.beta) << "\n";
  out << "beta_prime: " << yaml_real(s.beta_prime) << "\n";
  out << "n_interior: " << s.n_interior << "\n";
  out << "n_boundary: " << s.n_boundary << "\n";
  out << "n_initial: " << s.n_initial << "\n";
  out << "optimizer_u: " << to_string(s.optimizers[0]) << "\n";
  out << "optimizer_gamma: " << to_string(s.optimizers[1]) << "\n";
  out << "optimizer_phi: " << to_string(s.optimizers[2]) << "\n";
  out << "optimizer_phibar: " << to_string(s.optimizers[3]) << "\n";
  out << "ball_bound: " << yaml_real(s.ball_bound) << "\n";
  out << "seed: " << s.seed << "\n";
  out << "eval_cadence: " << s.eval_cadence << "\n";
  out << "order: " << to_string(s.order) << "\n";
  out << "u_depth: " << s.u_shape.depth << "\n";
  out << "u_width: " << s.u_shape.width << "\n";
  out << "gamma_depth: " << s.gamma_shape.depth << "\n";
  out << "gamma_width: " << s.gamma_shape.width << "\n";
  out << "test_depth: " << s.test_shape.depth << "\n";
  out << "test_width: " << s.test_shape.width << "\n";
  out << "density: " << (s.density.kind == Density::Kind::uniform ? "uniform" : "gaussian") << "\n";
  out << "density_mean: [" << yaml_real(s.density.mean[0]) << ", " << yaml_real(s.density.mean[1]) << "]\n";
  out << "density_inv_cov: [" << yaml_real(s.density.inverse_covariance_diag[0]) << ", "
      << yaml_real(s.density.inverse_covariance_diag[1]) << "]\n";
  out << "penalty_theta: " << yaml_real(s.penalty_theta) << "\n";
  out << "penalty_eta: " << yaml_real(s.penalty_eta) << "\n";
  out << "grid_per_axis: " << s.grid_per_axis << "\n";
  const SweepAxes& w = c.sweep;
  if (!w.depth.empty()) out << "sweep_depth: " << yaml_list(w.depth, whole) << "\n";
  if (!w.width.empty()) out << "sweep_width: " << yaml_list(w.width, whole) << "\n";
  if (!w.n_interior.empty()) out << "sweep_n_interior: " << yaml_list(w.n_interior, whole) << "\n";
  if (!w.n_boundary.empty()) out << "sweep_n_boundary: " << yaml_list(w.n_boundary, whole) << "\n";
  if (!w.scale.empty()) out << "sweep_scale: " << yaml_list(w.scale, real) << "\n";
  if (!w.seed.empty()) out << "sweep_seed: " << yaml_list(w.seed, whole) << "\n";
  out << "scale_base_interior: " << w.scale_base_interior << "\n";
  out << "scale_base_boundary: " << w.scale_base_boundary << "\n";
  out << "fdm_lambdas: " << yaml_list(c.fdm.lambdas, real) << "\n";
  out << "fdm_n: " << c.fdm.n << "\n";
  out << "fdm_iterations: " << c.fdm.iterations << "\n";
  out << "fdm_step: " << yaml_real(c.fdm.step) << "\n";
  return out.str();
}

}  // namespace iwan::cli
