#include "iwan/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace iwan {
namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

int resolve_face_axes(const BoxDomain& domain, int face_axes) {
  if (face_axes < 0) {
    return domain.dim();
  }
  if (face_axes == 0 || face_axes > domain.dim()) {
    throw std::invalid_argument("face_axes out of range");
  }
  return face_axes;
}

}  // namespace

BoxDomain::BoxDomain(Eigen::VectorXd lower, Eigen::VectorXd upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() == 0 || lower_.size() != upper_.size()) {
    throw std::invalid_argument("BoxDomain: bounds must be non-empty and of equal length");
  }
  for (Eigen::Index i = 0; i < lower_.size(); ++i) {
    if (!(lower_[i] < upper_[i])) {
      throw std::invalid_argument("BoxDomain: lower bound must be below upper bound on axis " + std::to_string(i));
    }
  }
}

BoxDomain BoxDomain::cube(int dim, double lower, double upper) {
  if (dim < 1) {
    throw std::invalid_argument("BoxDomain: dimension must be >= 1");
  }
  return BoxDomain(Eigen::VectorXd::Constant(dim, lower), Eigen::VectorXd::Constant(dim, upper));
}

double BoxDomain::volume() const { return (upper_ - lower_).prod(); }

double BoxDomain::face_area(int axis) const {
  double area = 1.0;
  for (int i = 0; i < dim(); ++i) {
    if (i != axis) {
      area *= upper_[i] - lower_[i];
    }
  }
  return area;
}

double BoxDomain::boundary_area(int face_axes) const {
  const int axes = resolve_face_axes(*this, face_axes);
  double total = 0.0;
  for (int a = 0; a < axes; ++a) {
    total += 2.0 * face_area(a);
  }
  return total;
}

bool BoxDomain::contains(const Eigen::Ref<const Eigen::VectorXd>& x, double tol) const {
  if (x.size() != lower_.size()) {
    return false;
  }
  return ((x.array() >= lower_.array() - tol) && (x.array() <= upper_.array() + tol)).all();
}

double BoxDomain::distance_to_boundary(const Eigen::Ref<const Eigen::VectorXd>& x, int face_axes) const {
  const int axes = resolve_face_axes(*this, face_axes);
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < axes; ++a) {
    best = std::min({best, std::abs(x[a] - lower_[a]), std::abs(upper_[a] - x[a])});
  }
  return best;
}

Density Density::gaussian(Eigen::Vector2d mean, Eigen::Vector2d inverse_covariance_diag) {
  Density d;
  d.kind = Kind::gaussian_restricted;
  d.mean = mean;
  d.inverse_covariance_diag = inverse_covariance_diag;
  return d;
}

void Density::validate(const BoxDomain& domain) const {
  if (kind == Kind::gaussian_restricted) {
    if (domain.dim() < 2) {
      throw std::invalid_argument("gaussian_restricted density needs at least two coordinates");
    }
    if (!(inverse_covariance_diag.array() > 0.0).all()) {
      throw std::invalid_argument("gaussian_restricted inverse covariances must be positive");
    }
  }
}

double Density::pdf(const BoxDomain& domain, const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (!domain.contains(x)) {
    return 0.0;
  }
  if (kind == Kind::uniform) {
    return 1.0 / domain.volume();
  }
  double value = 1.0;
  for (int i = 0; i < 2; ++i) {
    const double sd = 1.0 / std::sqrt(inverse_covariance_diag[i]);
    const double mass = normal_cdf((domain.upper()[i] - mean[i]) / sd) - normal_cdf((domain.lower()[i] - mean[i]) / sd);
    const double z = (x[i] - mean[i]) / sd;
    value *= std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi) * mass);
  }
  for (int i = 2; i < domain.dim(); ++i) {
    value /= domain.upper()[i] - domain.lower()[i];
  }
  return value;
}

SampleBatch sample_interior(const BoxDomain& domain, std::size_t n, const Density& density, Rng& rng) {
  if (n == 0) {
    throw std::invalid_argument("sample_interior: n must be >= 1");
  }
  density.validate(domain);
  const int dim = domain.dim();
  SampleBatch batch;
  batch.region = Region::interior;
  batch.points.resize(dim, static_cast<Eigen::Index>(n));
  batch.weights.resize(static_cast<Eigen::Index>(n));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int first_uniform = density.kind == Density::Kind::uniform ? 0 : 2;
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(n); ++c) {
    if (density.kind == Density::Kind::gaussian_restricted) {
      std::size_t attempts = 0;
      for (;;) {
        bool inside = true;
        for (int i = 0; i < 2; ++i) {
          const double sd = 1.0 / std::sqrt(density.inverse_covariance_diag[i]);
          const double v = density.mean[i] + sd * normal(rng);
          batch.points(i, c) = v;
          inside = inside && v > domain.lower()[i] && v < domain.upper()[i];
        }
        if (inside) {
          break;
        }
        if (++attempts >= kRejectionCap) {
          throw SamplingError("sample_interior: rejection sampling exceeded the retry cap");
        }
      }
    }
    for (int i = first_uniform; i < dim; ++i) {
      double u = unit(rng);
      while (u == 0.0) {
        u = unit(rng);
      }
      batch.points(i, c) = domain.lower()[i] + u * (domain.upper()[i] - domain.lower()[i]);
    }
  }
  if (density.kind == Density::Kind::uniform) {
    batch.weights.setConstant(domain.volume());
  } else {
    for (Eigen::Index c = 0; c < batch.points.cols(); ++c) {
      batch.weights[c] = 1.0 / density.pdf(domain, batch.points.col(c));
    }
  }
  return batch;
}

SampleBatch sample_interior(const BoxDomain& domain, std::size_t n, const Density& density, std::uint64_t seed) {
  Rng rng(seed);
  return sample_interior(domain, n, density, rng);
}

SampleBatch sample_boundary(const BoxDomain& domain, std::size_t n, Rng& rng, int face_axes) {
  if (n == 0) {
    throw std::invalid_argument("sample_boundary: n must be >= 1");
  }
  const int axes = resolve_face_axes(domain, face_axes);
  const int dim = domain.dim();
  const std::size_t faces = 2 * static_cast<std::size_t>(axes);
  std::vector<std::size_t> counts(faces, n / faces);
  for (std::size_t f = 0; f < n % faces; ++f) {
    ++counts[f];
  }

  SampleBatch batch;
  batch.region = Region::boundary;
  batch.points.resize(dim, static_cast<Eigen::Index>(n));
  batch.normals = Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(n));
  batch.weights.resize(static_cast<Eigen::Index>(n));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::Index c = 0;
  for (std::size_t f = 0; f < faces; ++f) {
    const int axis = static_cast<int>(f / 2);
    const bool upper_side = (f % 2) == 1;
    const double weight = counts[f] == 0 ? 0.0
                                         : static_cast<double>(n) * domain.face_area(axis) /
                                               static_cast<double>(counts[f]);
    for (std::size_t k = 0; k < counts[f]; ++k, ++c) {
      for (int i = 0; i < dim; ++i) {
        batch.points(i, c) = domain.lower()[i] + unit(rng) * (domain.upper()[i] - domain.lower()[i]);
      }
      batch.points(axis, c) = upper_side ? domain.upper()[axis] : domain.lower()[axis];
      batch.normals(axis, c) = upper_side ? 1.0 : -1.0;
      batch.weights[c] = weight;
    }
  }
  return batch;
}

SampleBatch sample_boundary(const BoxDomain& domain, std::size_t n, std::uint64_t seed, int face_axes) {
  Rng rng(seed);
  return sample_boundary(domain, n, rng, face_axes);
}

SampleBatch sample_face(const BoxDomain& domain, int axis, double value, std::size_t n, Rng& rng) {
  if (n == 0) {
    throw std::invalid_argument("sample_face: n must be >= 1");
  }
  if (axis < 0 || axis >= domain.dim()) {
    throw std::invalid_argument("sample_face: axis out of range");
  }
  const int dim = domain.dim();
  SampleBatch batch;
  batch.region = Region::boundary;
  batch.points.resize(dim, static_cast<Eigen::Index>(n));
  batch.normals = Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(n));
  batch.weights.setConstant(static_cast<Eigen::Index>(n), domain.face_area(axis));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double sign = value <= domain.lower()[axis] ? -1.0 : 1.0;
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(n); ++c) {
    for (int i = 0; i < dim; ++i) {
      batch.points(i, c) = domain.lower()[i] + unit(rng) * (domain.upper()[i] - domain.lower()[i]);
    }
    batch.points(axis, c) = value;
    batch.normals(axis, c) = sign;
  }
  return batch;
}

double mc_integral(const SampleBatch& batch, std::span<const double> values) {
  if (values.size() != batch.size()) {
    throw std::invalid_argument("mc_integral: " + std::to_string(values.size()) + " values for " +
                                std::to_string(batch.size()) + " points");
  }
  if (values.empty()) {
    throw std::invalid_argument("mc_integral: empty batch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i] * batch.weights[static_cast<Eigen::Index>(i)];
  }
  return sum / static_cast<double>(values.size());
}

double mc_integral(const SampleBatch& batch, const Eigen::Ref<const Eigen::VectorXd>& values) {
  return mc_integral(batch, std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

}  // namespace iwan
