#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iwan/sampling.hpp"

namespace iwan {

/// Maps input_dim x n points to n values.
using FieldEvaluator = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

inline constexpr int kGridPerAxis = 100;

/// Fixed evaluation points: a regular per_axis x per_axis mesh over the first
/// two input coordinates (endpoints included), remaining coordinates drawn
/// uniformly once from the grid stream of `seed`. A one-dimensional domain
/// gets per_axis^2 regular points instead.
class TestGrid {
 public:
  TestGrid(const BoxDomain& domain, std::uint64_t seed, int per_axis = kGridPerAxis);

  const Eigen::MatrixXd& points() const { return points_; }
  Eigen::Index size() const { return points_.cols(); }
  std::uint64_t seed() const { return seed_; }

 private:
  Eigen::MatrixXd points_;
  std::uint64_t seed_;
};

/// |candidate - truth|_2 / |truth|_2. Throws when truth is identically zero
/// or the lengths differ.
double relative_l2(const Eigen::VectorXd& candidate, const Eigen::VectorXd& truth);
double relative_l2(const FieldEvaluator& candidate, const FieldEvaluator& truth, const TestGrid& grid);

/// Trailing mean over the last `window` entries (fewer at the head).
std::vector<double> moving_average(const std::vector<double>& trace, std::size_t window = 7);

/// Values on the (x1, x2) plane with the other coordinates at the domain
/// midpoint. values(i, j) sits at (x1[i], x2[j]). For a one-dimensional
/// domain x2 holds a single 0 and x1 the per_axis^2 points.
struct SliceTable {
  Eigen::VectorXd x1;
  Eigen::VectorXd x2;
  Eigen::MatrixXd values;
};

Eigen::MatrixXd slice_points(const BoxDomain& domain, int per_axis = kGridPerAxis);
SliceTable export_field(const FieldEvaluator& field, const BoxDomain& domain, int per_axis = kGridPerAxis);
/// Pointwise |a - b| on identical slices.
SliceTable abs_difference(const SliceTable& a, const SliceTable& b);

/// Shortest round-trip decimal form, independent of the locale.
std::string format_double(double value);

/// Header "x1,x2,<column>", one row per cell in row-major (i, j) order.
void write_slice_csv(std::ostream& out, const SliceTable& table, const std::string& column = "value");
/// Inverse of write_slice_csv. Throws std::runtime_error on malformed input.
SliceTable read_slice_csv(std::istream& in);

}  // namespace iwan
