#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "iwan/eval.hpp"
#include "iwan/problems.hpp"

namespace iwan {

/// Nodal values on an n x n grid over a square. values(i, j) sits at
/// (x0 + i h, y0 + j h).
struct GridField {
  int n = 0;
  double h = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;
  Eigen::MatrixXd values;

  /// Zero field on the nodes of a square box. Throws unless the box is a
  /// two-dimensional square and n >= 3.
  static GridField on(const BoxDomain& box, int n);
  static GridField sample(const BoxDomain& box, int n, const std::function<double(double, double)>& field);

  double x(int i) const { return x0 + h * i; }
  double y(int j) const { return y0 + h * j; }
  /// Bilinear interpolation, clamped to the grid.
  double interpolate(double px, double py) const;
};

inline constexpr double kTvSmoothing = 1e-8;
inline constexpr int kFdmDivergenceWindow = 100;

/// -div(gamma grad u) - f at interior nodes in flux form with face-averaged
/// gamma; boundary nodes are zero.
GridField fd_residual(const GridField& u, const GridField& gamma, const GridField& f);

/// sum over interior nodes of sqrt(Dx^2 + Dy^2 + eps^2), forward difference
/// quotients.
double tv(const GridField& gamma);

struct FdmObjective {
  double value = 0.0;
  double mse = 0.0;
  double tv = 0.0;
  Eigen::MatrixXd grad_u;      // with respect to every node
  Eigen::MatrixXd grad_gamma;
};

/// mean over interior nodes of the squared residual plus lambda tv(gamma).
FdmObjective fdm_objective(const GridField& u, const GridField& gamma, const GridField& f, double lambda);

class FdmDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FdmConfig {
  int n = 31;
  double lambda = 0.1;
  int iterations = 20000;
  double step = 1e-4;       // first trial step
  bool backtracking = true; // Barzilai-Borwein trial steps halved until Armijo holds
};

struct FdmResult {
  GridField u;
  GridField gamma;
  std::vector<double> trace;  // objective before each iteration and at the end
};

/// Boundary nodes of u and gamma pinned to measurements drawn from `noise`;
/// gradient descent over the interior nodes. Starts from the transfinite
/// interpolation of the boundary data for u and the mean boundary gamma.
/// Throws std::invalid_argument unless the problem is elliptic with d = 2,
/// and FdmDivergence if the objective rises kFdmDivergenceWindow times in a row.
FdmResult fdm_solve(const ProblemSpec& problem, const FdmConfig& config, Rng& noise);

/// As above, from caller-supplied starting fields whose boundary rows are
/// taken as the pinned data.
FdmResult fdm_solve(const GridField& u0, const GridField& gamma0, const GridField& f, const FdmConfig& config);

FieldEvaluator grid_evaluator(const GridField& field);

}  // namespace iwan
