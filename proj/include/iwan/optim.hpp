#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iwan/mlp.hpp"

namespace iwan {

enum class OptimizerKind { sgd, adagrad, adam };

std::string to_string(OptimizerKind kind);
/// Throws std::invalid_argument for an unknown name.
OptimizerKind parse_optimizer_kind(const std::string& name);

inline constexpr double kOptimizerEpsilon = 1e-8;
inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;

/// Raised when a gradient holds NaN or inf. The state and parameters are
/// left as they were before the call.
class OptimizerAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adagrad;
  double step_size = 0.01;
  double ball_bound = std::numeric_limits<double>::infinity();  // |theta| <= sqrt(2 B)
  /// AdaGrad: running sum of squared gradients. Adam: first moment.
  Eigen::VectorXd first;
  /// Adam second moment, empty otherwise.
  Eigen::VectorXd second;
  std::int64_t steps = 0;

  static OptimizerState make(OptimizerKind kind, double step_size, double ball_bound, Eigen::Index size);
};

/// One projected update. Returns the new parameters and advances `state`.
/// Throws std::invalid_argument on a shape mismatch and OptimizerAbort on
/// non-finite gradient entries.
ParamVector step(OptimizerState& state, const ParamVector& params, const ParamVector& grad);

/// tau^{-1} (theta - Pi(theta - tau grad)).
ParamVector gradient_mapping(const ParamVector& params, const ParamVector& grad, double step_size, double ball_bound);

/// sqrt(min_j mean_r sq[r][j]) over runs r of per-iteration squared
/// gradient-mapping norms. Runs are truncated to the shortest one.
double g_norm_from_traces(const std::vector<std::vector<double>>& squared_norms);

}  // namespace iwan
