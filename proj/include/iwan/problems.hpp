#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iwan/rng.hpp"
#include "iwan/sampling.hpp"

namespace iwan {

enum class PdeKind { elliptic, parabolic };

/// dirichlet_full: u, gamma and du/dn on the boundary.
/// neumann_flux:   only the flux gamma du/dn.
/// thermal_mixed:  u, gamma and du/dn on the lateral boundary plus u at t = 0.
enum class BoundaryKind { dirichlet_full, neumann_flux, thermal_mixed };

/// Closed-form ground truth at one network input point z (x, or (x, t)).
/// Spatial derivatives only; u_t is zero for elliptic problems.
struct TruthPoint {
  double u = 0.0;
  double gamma = 0.0;
  Eigen::VectorXd grad_u;
  Eigen::VectorXd grad_gamma;
  double lap_u = 0.0;
  double u_t = 0.0;
};

class GroundTruth {
 public:
  virtual ~GroundTruth() = default;
  virtual TruthPoint eval(const Eigen::Ref<const Eigen::VectorXd>& z) const = 0;
};

/// Measured boundary values, already passed through the noise model.
struct BoundaryValues {
  double u = 0.0;
  double gamma = 0.0;
  double u_n = 0.0;
  double flux = 0.0;  // gamma du/dn
};

/// value * (1 + sigma * e) with e standard normal clamped to [-100, 100].
double apply_noise(double value, double sigma, Rng& rng);

inline constexpr double kNoiseTruncation = 100.0;

struct ProblemInfo {
  std::string id;
  std::string description;
  int min_dim;
  int max_dim;  // -1 for unbounded
  int default_dim;
};

/// Catalog entries in a stable order.
const std::vector<ProblemInfo>& problem_catalog();

class ProblemSpec {
 public:
  ProblemSpec(std::string id, int dim, double noise_sigma, PdeKind pde, BoundaryKind boundary, BoxDomain spatial,
              double final_time, std::shared_ptr<const GroundTruth> truth);

  const std::string& id() const { return id_; }
  int dim() const { return dim_; }
  bool time_dependent() const { return pde_ == PdeKind::parabolic; }
  PdeKind pde() const { return pde_; }
  BoundaryKind boundary_kind() const { return boundary_; }
  double noise_sigma() const { return noise_sigma_; }
  double final_time() const { return final_time_; }
  const BoxDomain& spatial_domain() const { return spatial_; }
  /// Domain of the network input: the spatial box, times [0, T] when time dependent.
  const BoxDomain& input_domain() const { return input_; }
  int input_dim() const { return input_.dim(); }

  /// Throws std::out_of_range outside the closed input domain.
  TruthPoint eval_truth(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  /// u_t - div(gamma grad u) evaluated from the closed-form derivatives.
  double source(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  Eigen::VectorXd source_batch(const Eigen::Ref<const Eigen::MatrixXd>& points) const;
  Eigen::VectorXd gamma_batch(const Eigen::Ref<const Eigen::MatrixXd>& points) const;

  /// Noisy measurements at a point on the (lateral) boundary with outward normal.
  /// Throws std::invalid_argument when z is not on a spatial face.
  BoundaryValues boundary_data(const Eigen::Ref<const Eigen::VectorXd>& z,
                               const Eigen::Ref<const Eigen::VectorXd>& normal, Rng& rng) const;
  /// Noisy initial temperature at (x, 0). Parabolic problems only.
  double initial_data(const Eigen::Ref<const Eigen::VectorXd>& z, Rng& rng) const;

  /// |u_t - div(gamma grad u) - f| with the divergence (and u_t) taken by
  /// central differences of step h on the closed-form gamma grad u.
  double consistency_residual(const Eigen::Ref<const Eigen::VectorXd>& z, double h) const;

  /// Largest residual / (1 + |f|) over `count` seeded interior points.
  double max_consistency_error(int count, std::uint64_t seed, double h = 1e-4) const;

 private:
  std::string id_;
  int dim_;
  double noise_sigma_;
  PdeKind pde_;
  BoundaryKind boundary_;
  BoxDomain spatial_;
  BoxDomain input_;
  double final_time_;
  std::shared_ptr<const GroundTruth> truth_;
};

inline constexpr double kConsistencyTolerance = 1e-3;

/// Builds a catalog problem. Throws std::invalid_argument for an unknown id,
/// an unsupported dimension or a noise level outside [0, 1], and
/// std::logic_error if the instance fails its consistency check.
ProblemSpec make_problem(const std::string& id, int dim, double noise_sigma = 0.0);

std::string to_string(PdeKind kind);
std::string to_string(BoundaryKind kind);

}  // namespace iwan
