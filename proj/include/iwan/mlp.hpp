#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "iwan/activation.hpp"

namespace iwan {

/// Which of the four networks a spec is built for.
enum class NetworkRole { solution, coefficient, test };

/// Flat network parameters. The layout is given by ParamLayout.
using ParamVector = Eigen::VectorXd;

/// Fixed feed-forward architecture: input -> hidden layers -> scalar output.
struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_widths;
  std::vector<Activation> activations;  // one per hidden layer
  Activation output_activation = Activation::identity;

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
  std::size_t hidden_layers() const { return hidden_widths.size(); }
  std::size_t param_count() const;

  bool operator==(const MlpSpec&) const = default;
};

/// Activation schedule used throughout the experiments: `depth` layers
/// (depth - 1 hidden layers of `width` units), hidden layer k = 1, 2, ...
///   solution:    tanh for k <= 2, then sinc (odd k) and softplus (even k)
///   coefficient: tanh for k in {1,2,4,6}, elu for k in {3,5}, sigmoid from
///                k = 7 on, elu on the output
///   test:        tanh for k <= 2, sinc after
MlpSpec schedule_spec(NetworkRole role, int input_dim, int depth, int width);

/// Position of every weight matrix and bias vector inside a ParamVector.
///
/// Layer index k runs over 0..K, where k < K are the hidden layers and k == K
/// is the scalar output layer. The flat order is output layer first
/// (w_K, b_K, W_{K-1}, b_{K-1}, ..., W_0, b_0); matrices are column-major.
class ParamLayout {
 public:
  struct Block {
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const { return rows * cols; }
  };

  explicit ParamLayout(const MlpSpec& spec);

  std::size_t layers() const { return weights_.size(); }
  const Block& weight(std::size_t layer) const { return weights_.at(layer); }
  const Block& bias(std::size_t layer) const { return biases_.at(layer); }
  std::size_t size() const { return size_; }

 private:
  std::vector<Block> weights_;
  std::vector<Block> biases_;
  std::size_t size_ = 0;
};

struct LayerParams {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

std::vector<LayerParams> unflatten(const ParamLayout& layout, const ParamVector& params);
ParamVector flatten(const ParamLayout& layout, const std::vector<LayerParams>& layers);

/// Network output and its gradient with respect to the input point.
struct DualEval {
  double value = 0.0;
  Eigen::VectorXd input_grad;
};

/// Exact parameter derivatives at one point. Row i of the jacobian is the
/// parameter gradient of the i-th input derivative of the output.
struct ParamGrads {
  ParamVector value_grad;
  Eigen::MatrixXd input_grad_jacobian;  // input_dim x param_count
};

/// Outputs for a batch of points stored column-wise.
struct BatchEval {
  Eigen::VectorXd values;
  Eigen::MatrixXd input_grads;  // input_dim x n, empty unless requested
};

class Mlp {
  struct Tape;

 public:
  /// Forward pass over a batch with its tape kept for reverse passes.
  struct Recording {
    BatchEval eval;
    ParamVector params;
    bool tangents = false;
    std::shared_ptr<const std::vector<Tape>> tapes;
  };

  explicit Mlp(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t param_count() const { return layout_.size(); }
  int input_dim() const { return spec_.input_dim; }

  /// Glorot-uniform weights, zero biases.
  ParamVector init_params(std::uint64_t seed) const;

  DualEval forward(const ParamVector& params, const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// points is input_dim x n.
  BatchEval forward_batch(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& points,
                          bool with_input_grad = true) const;

  /// Parameter gradient of
  ///   sum_i value_seed[i] * y(x_i) + sum_i sum_j grad_seed(j, i) * dy/dx_j(x_i).
  /// Pass an empty grad_seed to skip the tangent channels entirely.
  ParamVector vjp(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& points,
                  const Eigen::Ref<const Eigen::VectorXd>& value_seed, const Eigen::MatrixXd& grad_seed) const;

  /// forward_batch that also keeps what vjp needs, so a later reverse pass
  /// over the same points and parameters skips the forward sweep.
  Recording record_batch(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& points,
                         bool with_input_grad = true) const;
  /// vjp against a recording. grad_seed must be empty when the recording has
  /// no tangent channels.
  ParamVector vjp(const Recording& recording, const Eigen::Ref<const Eigen::VectorXd>& value_seed,
                  const Eigen::MatrixXd& grad_seed) const;

  ParamGrads param_grads(const ParamVector& params, const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:

  void check(const ParamVector& params, Eigen::Index rows) const;
  /// order: highest activation derivative kept on the tape (0, 1 or 2).
  void record(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& points, int channels, int order,
              Tape& tape) const;
  void backprop(const ParamVector& params, const Tape& tape, const Eigen::Ref<const Eigen::VectorXd>& value_seed,
                const Eigen::MatrixXd& grad_seed, Eigen::Ref<ParamVector> grad) const;

  MlpSpec spec_;
  ParamLayout layout_;
};

/// Radial projection onto the ball |theta| <= sqrt(2 B). B may be +inf.
ParamVector project_ball(const ParamVector& params, double bound);

}  // namespace iwan
