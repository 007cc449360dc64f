#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "iwan/rng.hpp"

namespace iwan {

/// Axis-aligned box prod_i (lower_i, upper_i).
class BoxDomain {
 public:
  BoxDomain(Eigen::VectorXd lower, Eigen::VectorXd upper);
  static BoxDomain cube(int dim, double lower, double upper);

  int dim() const { return static_cast<int>(lower_.size()); }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  double volume() const;
  /// Measure of the face x_axis = const.
  double face_area(int axis) const;
  /// Total measure of the faces normal to the first `face_axes` axes
  /// (all axes when face_axes < 0).
  double boundary_area(int face_axes = -1) const;
  bool contains(const Eigen::Ref<const Eigen::VectorXd>& x, double tol = 0.0) const;
  /// Distance to the nearest face normal to one of the first `face_axes` axes.
  double distance_to_boundary(const Eigen::Ref<const Eigen::VectorXd>& x, int face_axes = -1) const;
  Eigen::VectorXd center() const { return 0.5 * (lower_ + upper_); }

 private:
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
};

/// Interior sampling density. gaussian_restricted draws the first two
/// coordinates from an axis-aligned normal truncated to the box and the rest
/// uniformly.
struct Density {
  enum class Kind { uniform, gaussian_restricted };
  Kind kind = Kind::uniform;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d inverse_covariance_diag = Eigen::Vector2d::Ones();

  static Density uniform() { return {}; }
  static Density gaussian(Eigen::Vector2d mean, Eigen::Vector2d inverse_covariance_diag);
  void validate(const BoxDomain& domain) const;
  /// Normalized density of the restricted distribution at x.
  double pdf(const BoxDomain& domain, const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

enum class Region { interior, boundary };

/// Collocation points stored column-wise. weights[i] is the inverse density
/// 1/rho(x_i), so that mc_integral is (1/n) sum_i psi(x_i) weights[i] for
/// both regions.
struct SampleBatch {
  Region region = Region::interior;
  Eigen::MatrixXd points;   // dim x n
  Eigen::VectorXd weights;  // n
  Eigen::MatrixXd normals;  // dim x n, boundary only

  std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
};

/// Thrown when rejection sampling cannot land inside the box.
class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kRejectionCap = 1'000'000;

SampleBatch sample_interior(const BoxDomain& domain, std::size_t n, const Density& density, Rng& rng);
SampleBatch sample_interior(const BoxDomain& domain, std::size_t n, const Density& density, std::uint64_t seed);

/// Points split evenly across the faces normal to the first `face_axes` axes
/// (all axes when negative), remainder assigned round-robin. Within a face the
/// free coordinates are uniform. The weight of a point on face f holding n_f
/// of the n points is n * area_f / n_f.
SampleBatch sample_boundary(const BoxDomain& domain, std::size_t n, Rng& rng, int face_axes = -1);
SampleBatch sample_boundary(const BoxDomain& domain, std::size_t n, std::uint64_t seed, int face_axes = -1);

/// Uniform points on the single face x_axis = value.
SampleBatch sample_face(const BoxDomain& domain, int axis, double value, std::size_t n, Rng& rng);

/// (1/n) sum_i values[i] * weights[i]. Throws on a length mismatch.
double mc_integral(const SampleBatch& batch, std::span<const double> values);
double mc_integral(const SampleBatch& batch, const Eigen::Ref<const Eigen::VectorXd>& values);

}  // namespace iwan
