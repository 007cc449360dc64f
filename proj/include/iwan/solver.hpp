#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "iwan/eval.hpp"
#include "iwan/loss.hpp"
#include "iwan/optim.hpp"
#include "iwan/problems.hpp"

namespace iwan {

/// interleaved: u, phi (J_eta steps), gamma, phibar (J_eta steps).
/// algorithm1:  phi, phibar (J_eta steps each), then u and gamma.
enum class UpdateOrder { interleaved, algorithm1 };

std::string to_string(UpdateOrder order);
UpdateOrder parse_update_order(const std::string& name);

/// depth counts layers, so a net has depth - 1 hidden layers of `width` units.
struct NetShape {
  int depth = 9;
  int width = 20;
  bool operator==(const NetShape&) const = default;
};

struct SolveConfig {
  int iterations = 20000;  // J; 0 records the initial state only
  int inner_steps = 2;     // J_eta
  double tau_theta = 0.01;
  double tau_eta = 0.008;
  double beta = 10000.0;
  double beta_prime = 10.0;
  std::size_t n_interior = 100000;
  std::size_t n_boundary = 500;
  std::size_t n_initial = 0;  // t = 0 slab points; 0 means n_boundary
  std::array<OptimizerKind, 4> optimizers{OptimizerKind::adagrad, OptimizerKind::adagrad, OptimizerKind::adagrad,
                                          OptimizerKind::adagrad};  // indexed by Role
  double ball_bound = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 1;
  int eval_cadence = 50;
  UpdateOrder order = UpdateOrder::interleaved;
  NetShape u_shape;
  NetShape gamma_shape;
  NetShape test_shape;  // phi and phibar
  Density density = Density::uniform();
  double penalty_theta = 0.0;
  double penalty_eta = 0.0;
  int grid_per_axis = kGridPerAxis;

  /// Throws std::invalid_argument naming the offending field.
  void validate(const ProblemSpec& problem) const;
  std::size_t initial_points() const { return n_initial == 0 ? n_boundary : n_initial; }
};

/// One row of history.csv. Losses are measured on the iteration's batch
/// right before the u update; the error and gradient mapping are taken
/// after the iteration completes (iteration 0 is the initial state).
struct HistoryRecord {
  int iteration = 0;
  double e_value = 0.0;
  double l_bdry = 0.0;
  double total = 0.0;
  double rel_error = 0.0;      // gamma against the truth on the test grid
  double grad_mapping = 0.0;   // |(G_u, G_gamma)| at the theta updates
  double elapsed = 0.0;        // seconds since the start of the run
};

struct SolveHistory {
  std::vector<HistoryRecord> records;
  /// |(G_u, G_gamma)|^2 for every completed iteration 1..j.
  std::vector<double> grad_mapping_sq;
};

/// Columns iteration,e_value,l_bdry,total,rel_error_gamma,grad_mapping_norm.
/// Wall time is kept out so repeated runs produce identical files.
void write_history_csv(std::ostream& out, const SolveHistory& history);
/// Columns iteration,elapsed_seconds.
void write_timing_csv(std::ostream& out, const SolveHistory& history);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// FNV-1a over every setting that shapes a trajectory except the iteration
/// count, so a checkpoint can be resumed with a larger J.
std::uint64_t config_hash(const ProblemSpec& problem, const SolveConfig& config);

class IwanSolver {
 public:
  IwanSolver(const ProblemSpec& problem, SolveConfig config);

  /// Runs up to `count` further outer iterations, stopping at J.
  void advance(int count);
  void run() { advance(config_.iterations - iteration_); }

  int iteration() const { return iteration_; }
  bool finished() const { return iteration_ >= config_.iterations; }
  const NetworkQuad& nets() const { return nets_; }
  const SolveHistory& history() const { return history_; }
  const SolveConfig& config() const { return config_; }
  const ProblemSpec& problem() const { return problem_; }
  const TestGrid& grid() const { return grid_; }
  const OptimizerState& optimizer(Role role) const { return opt_[static_cast<int>(role)]; }

  /// Relative L2 error of the current gamma network on the test grid.
  double gamma_error() const;
  FieldEvaluator gamma_field() const;

  /// Little-endian, versioned snapshot of everything a resumed run needs.
  std::vector<std::uint8_t> checkpoint() const;
  /// Throws CheckpointError on a malformed blob, a version mismatch or a
  /// blob written under a different configuration.
  void restore(std::span<const std::uint8_t> blob);

  /// Batch of iteration j, drawn from streams keyed by (seed, j).
  TrainingBatch make_batch(int j) const;

 private:
  void iterate();
  double update_theta(LossAssembler& a, Role role, LossBundle* bundle_out);
  void update_eta(LossAssembler& a, Role role);
  void record(int j, const LossBundle& u_bundle, double grad_mapping_sq);
  void record_initial();

  ProblemSpec problem_;
  SolveConfig config_;
  TestGrid grid_;
  Eigen::VectorXd grid_truth_;
  NetworkQuad nets_;
  std::array<OptimizerState, 4> opt_;
  SolveHistory history_;
  int iteration_ = 0;
  double elapsed_offset_ = 0.0;
  std::chrono::steady_clock::time_point start_;
};

struct SolveResult {
  NetworkQuad nets;
  SolveHistory history;
  double final_error = 0.0;
};

SolveResult iwan_solve(const ProblemSpec& problem, const SolveConfig& config);

/// Square root of the minimum over iterations of the run-averaged squared
/// gradient mapping norm, over `runs` solves seeded seed, seed + 1, ...
double g_norm(const ProblemSpec& problem, SolveConfig config, int runs = 5, std::uint64_t seed = 1);

}  // namespace iwan
