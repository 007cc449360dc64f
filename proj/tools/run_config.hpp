#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "iwan/problems.hpp"
#include "iwan/solver.hpp"

namespace iwan::cli {

/// Malformed or inconsistent config text. The message starts with
/// "<source>:<line>:" when the offending key is known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sweep axes. depth and width apply to the u and gamma networks; scale sets
/// n_interior = S * scale_base_interior and n_boundary = S * scale_base_boundary.
struct SweepAxes {
  std::vector<int> depth;
  std::vector<int> width;
  std::vector<std::size_t> n_interior;
  std::vector<std::size_t> n_boundary;
  std::vector<double> scale;
  std::vector<std::uint64_t> seed;
  std::size_t scale_base_interior = 25000;
  std::size_t scale_base_boundary = 200;

  bool empty() const {
    return depth.empty() && width.empty() && n_interior.empty() && n_boundary.empty() && scale.empty() && seed.empty();
  }
};

struct FdmSettings {
  std::vector<double> lambdas{0.01, 0.1, 1.0};
  int n = 31;
  int iterations = 20000;
  double step = 1e-4;
};

struct RunConfig {
  std::string problem;
  int dim = 0;
  double noise = 0.0;
  std::string label;
  SolveConfig solve;
  SweepAxes sweep;
  FdmSettings fdm;
};

/// Defaults applied by fdm-compare before the file is read: 4 hidden layers
/// of 15 units for u and gamma, N_r = 1000, N_b = 120, problem test2 in 2D.
RunConfig fdm_compare_defaults();

/// Parses flat YAML over `base`. Unknown keys, type errors and a missing
/// `problem` raise ConfigError; the result is validated against its problem.
RunConfig parse_run_config(const std::string& text, const std::string& source, const RunConfig& base = RunConfig{});
RunConfig load_run_config(const std::string& path, const RunConfig& base = RunConfig{});

/// Every key with its effective value; parsing it back gives the same config.
std::string to_yaml(const RunConfig& config);

ProblemSpec build_problem(const RunConfig& config);

}  // namespace iwan::cli
