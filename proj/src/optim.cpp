#include "iwan/optim.hpp"

#include <algorithm>
#include <cmath>

namespace iwan {

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adagrad: return "adagrad";
    case OptimizerKind::adam: return "adam";
  }
  return "unknown";
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adagrad") return OptimizerKind::adagrad;
  if (name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + name + "' (expected sgd, adagrad or adam)");
}

OptimizerState OptimizerState::make(OptimizerKind kind, double step_size, double ball_bound, Eigen::Index size) {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw std::invalid_argument("optimizer step size must be positive and finite");
  }
  if (!(ball_bound > 0.0)) {
    throw std::invalid_argument("optimizer ball bound must be positive");
  }
  OptimizerState s;
  s.kind = kind;
  s.step_size = step_size;
  s.ball_bound = ball_bound;
  if (kind != OptimizerKind::sgd) s.first = Eigen::VectorXd::Zero(size);
  if (kind == OptimizerKind::adam) s.second = Eigen::VectorXd::Zero(size);
  return s;
}

ParamVector step(OptimizerState& state, const ParamVector& params, const ParamVector& grad) {
  if (grad.size() != params.size()) {
    throw std::invalid_argument("optimizer step: gradient has " + std::to_string(grad.size()) + " entries, parameters " +
                                std::to_string(params.size()));
  }
  if (state.kind != OptimizerKind::sgd && state.first.size() != params.size()) {
    throw std::invalid_argument("optimizer step: accumulator shape does not match the parameters");
  }
  if (!grad.allFinite()) {
    const Eigen::Index bad = std::distance(grad.data(), std::find_if(grad.data(), grad.data() + grad.size(),
                                                                     [](double g) { return !std::isfinite(g); }));
    throw OptimizerAbort("non-finite gradient entry " + std::to_string(bad) + " at optimizer step " +
                         std::to_string(state.steps + 1));
  }
  const double tau = state.step_size;
  ParamVector next;
  switch (state.kind) {
    case OptimizerKind::sgd:
      next = params - tau * grad;
      break;
    case OptimizerKind::adagrad:
      state.first.array() += grad.array().square();
      next = params.array() - tau * grad.array() / (state.first.array() + kOptimizerEpsilon).sqrt();
      break;
    case OptimizerKind::adam: {
      state.first = kAdamBeta1 * state.first + (1.0 - kAdamBeta1) * grad;
      state.second = kAdamBeta2 * state.second + (1.0 - kAdamBeta2) * grad.cwiseAbs2();
      const double t = static_cast<double>(state.steps + 1);
      const double c1 = 1.0 - std::pow(kAdamBeta1, t);
      const double c2 = 1.0 - std::pow(kAdamBeta2, t);
      next = params.array() -
             tau * (state.first.array() / c1) / ((state.second.array() / c2).sqrt() + kOptimizerEpsilon);
      break;
    }
  }
  ++state.steps;
  return project_ball(next, state.ball_bound);
}

ParamVector gradient_mapping(const ParamVector& params, const ParamVector& grad, double step_size, double ball_bound) {
  if (!(step_size > 0.0)) {
    throw std::invalid_argument("gradient_mapping: step size must be positive");
  }
  if (std::isinf(ball_bound)) return grad;
  return (params - project_ball(params - step_size * grad, ball_bound)) / step_size;
}

double g_norm_from_traces(const std::vector<std::vector<double>>& squared_norms) {
  if (squared_norms.empty()) {
    throw std::invalid_argument("g_norm: no runs");
  }
  std::size_t len = squared_norms.front().size();
  for (const auto& run : squared_norms) len = std::min(len, run.size());
  if (len == 0) {
    throw std::invalid_argument("g_norm: empty trace");
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < len; ++j) {
    double mean = 0.0;
    for (const auto& run : squared_norms) mean += run[j];
    best = std::min(best, mean / static_cast<double>(squared_norms.size()));
  }
  return std::sqrt(best);
}

}  // namespace iwan
