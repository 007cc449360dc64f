#pragma once

#include <optional>

#include <Eigen/Dense>

#include "iwan/mlp.hpp"
#include "iwan/problems.hpp"
#include "iwan/sampling.hpp"

namespace iwan {

struct Network {
  Mlp mlp;
  ParamVector params;
};

enum class Role { u = 0, gamma = 1, phi = 2, phibar = 3 };

const char* to_string(Role role);

/// u and gamma are the primal networks, phi and phibar the two test networks.
struct NetworkQuad {
  Network u;
  Network gamma;
  Network phi;
  Network phibar;

  Network& get(Role role);
  const Network& get(Role role) const;
};

struct CutoffValue {
  double value = 0.0;
  Eigen::VectorXd grad;
};

/// prod_i (x_i - l_i)(u_i - x_i) / ((u_i - l_i)/2)^2 over the first `axes`
/// coordinates (all when negative). Zero on those faces, one at the center.
/// grad has one entry per point coordinate; excluded axes get zero.
CutoffValue cutoff_phi0(const BoxDomain& domain, const Eigen::Ref<const Eigen::VectorXd>& x, int axes = -1);

/// Collocation points for one outer iteration together with everything that
/// does not depend on the networks: the source, the cutoff and the (noisy)
/// boundary measurements.
struct TrainingBatch {
  SampleBatch interior;
  Eigen::VectorXd source;
  Eigen::VectorXd phi0;
  Eigen::MatrixXd phi0_grad;  // spatial dim x n

  SampleBatch boundary;
  Eigen::VectorXd u_b;
  Eigen::VectorXd gamma_b;
  Eigen::VectorXd u_n;
  Eigen::VectorXd flux;

  std::optional<SampleBatch> initial;  // t = 0 slab, parabolic problems
  Eigen::VectorXd u_i;
};

/// Measurements are drawn from `noise` in point order: boundary first, then
/// the initial slab.
TrainingBatch make_training_batch(const ProblemSpec& problem, SampleBatch interior, SampleBatch boundary,
                                  std::optional<SampleBatch> initial, Rng& noise);

struct LossWeights {
  double beta = 10000.0;   // boundary term
  double beta_prime = 1.0; // interior term
  double penalty_theta = 0.0;  // mu |theta|^2 added to the u and gamma objectives
  double penalty_eta = 0.0;    // mu |eta|^2 subtracted from the test objectives
};

inline constexpr double kDegenerateNorm = 1e-12;

struct WeakResidual {
  double e_value = 0.0;  // I^2 / N_phi
  double integral = 0.0; // I
  double norm = 0.0;     // N_phi = MC estimate of |phi|^2
  bool degenerate = false;
};

struct LossBundle {
  Role role = Role::u;
  double e_value = 0.0;
  double l_int = 0.0;
  double l_bdry = 0.0;
  double total = 0.0;  // beta' l_int + beta l_bdry
  bool degenerate = false;
  /// Descent direction for `role`: d/dtheta of the total for u and gamma,
  /// -d/deta of E for the test networks (plus penalties when enabled).
  ParamVector grad;
};

/// Weak residual from precomputed fields at the interior points: u values
/// with input gradients, gamma values, and the raw test network with input
/// gradients (the cutoff is applied here). Lets closed-form fields stand in
/// for networks. `integrand`, when given, receives w_i h(x_i) per point.
WeakResidual weak_residual_from_fields(const ProblemSpec& problem, const TrainingBatch& batch, const BatchEval& u,
                                       const Eigen::VectorXd& gamma, const BatchEval& test,
                                       Eigen::VectorXd* integrand = nullptr);

/// Boundary loss from u (with input gradients) and gamma at the boundary
/// points, plus u on the initial slab when the problem has one.
double boundary_loss_from_fields(const ProblemSpec& problem, const TrainingBatch& batch, const BatchEval& u,
                                 const Eigen::VectorXd& gamma, const Eigen::VectorXd* u_initial = nullptr);

/// Evaluates losses on one TrainingBatch. Network forward passes are cached
/// by parameter value, so repeated queries within an iteration only redo the
/// networks that changed.
class LossAssembler {
 public:
  LossAssembler(const ProblemSpec& problem, const TrainingBatch& batch, LossWeights weights);

  WeakResidual weak_residual(const Network& u, const Network& gamma, const Network& test);
  double boundary_loss(const Network& u, const Network& gamma);
  /// u pairs with phi and gamma with phibar; the test roles use their own network.
  LossBundle loss_and_grads(const NetworkQuad& nets, Role which);

  const LossWeights& weights() const { return weights_; }

 private:
  struct Cache {
    const Mlp* mlp = nullptr;
    bool with_grad = false;
    Mlp::Recording rec;
  };
  enum Slot { u_in, gamma_in, test_in, test2_in, u_bd, gamma_bd, u_init, slot_count };

  const Mlp::Recording& recording(Slot slot, const Network& net, const Eigen::MatrixXd& points, bool with_grad);
  const BatchEval& fields(Slot slot, const Network& net, const Eigen::MatrixXd& points, bool with_grad) {
    return recording(slot, net, points, with_grad).eval;
  }
  struct Interior {
    WeakResidual residual;
    Eigen::VectorXd phi;
    Eigen::MatrixXd grad_phi;  // spatial dim x n
  };
  Interior interior(const Network& u, const Network& gamma, const Network& test, Slot test_slot);
  double boundary_terms(const Network& u, const Network& gamma, Eigen::VectorXd* u_value_seed,
                        Eigen::MatrixXd* u_grad_seed, Eigen::VectorXd* u_init_seed, Eigen::VectorXd* gamma_seed);

  const ProblemSpec& problem_;
  const TrainingBatch& batch_;
  LossWeights weights_;
  int dim_;
  Cache cache_[slot_count];
};

/// One-shot helpers over a fresh assembler.
WeakResidual weak_residual(const NetworkQuad& nets, const TrainingBatch& batch, const ProblemSpec& problem);
double boundary_loss(const NetworkQuad& nets, const TrainingBatch& batch, const ProblemSpec& problem);
LossBundle loss_and_grads(const NetworkQuad& nets, Role which, const TrainingBatch& batch, const ProblemSpec& problem,
                          const LossWeights& weights);

}  // namespace iwan
