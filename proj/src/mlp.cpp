#include "iwan/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace iwan {
namespace {

// Columns processed per tape; bounds tape memory independently of batch size.
constexpr Eigen::Index kChunk = 1024;

using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using MatMap = Eigen::Map<Eigen::MatrixXd>;

}  // namespace

void MlpSpec::validate() const {
  if (input_dim < 1) {
    throw std::invalid_argument("MlpSpec: input_dim must be >= 1");
  }
  if (activations.size() != hidden_widths.size()) {
    throw std::invalid_argument("MlpSpec: " + std::to_string(activations.size()) + " activations for " +
                                std::to_string(hidden_widths.size()) + " hidden layers");
  }
  for (int w : hidden_widths) {
    if (w < 1) {
      throw std::invalid_argument("MlpSpec: hidden widths must be >= 1");
    }
  }
}

MlpSpec schedule_spec(NetworkRole role, int input_dim, int depth, int width) {
  if (depth < 2) {
    throw std::invalid_argument("schedule_spec: depth must be >= 2");
  }
  MlpSpec spec;
  spec.input_dim = input_dim;
  for (int k = 1; k < depth; ++k) {
    spec.hidden_widths.push_back(width);
    Activation act = Activation::tanh;
    switch (role) {
      case NetworkRole::solution:
        act = k <= 2 ? Activation::tanh : (k % 2 == 1 ? Activation::sinc : Activation::softplus);
        break;
      case NetworkRole::coefficient:
        if (k >= 7) {
          act = Activation::sigmoid;
        } else if (k == 3 || k == 5) {
          act = Activation::elu;
        }
        break;
      case NetworkRole::test:
        act = k <= 2 ? Activation::tanh : Activation::sinc;
        break;
    }
    spec.activations.push_back(act);
  }
  if (role == NetworkRole::coefficient) {
    spec.output_activation = Activation::elu;
  }
  spec.validate();
  return spec;
}

std::size_t MlpSpec::param_count() const { return ParamLayout(*this).size(); }

ParamLayout::ParamLayout(const MlpSpec& spec) {
  spec.validate();
  const std::size_t hidden = spec.hidden_widths.size();
  weights_.resize(hidden + 1);
  biases_.resize(hidden + 1);
  auto fan_in = [&](std::size_t layer) -> std::size_t {
    return layer == 0 ? static_cast<std::size_t>(spec.input_dim)
                      : static_cast<std::size_t>(spec.hidden_widths[layer - 1]);
  };
  auto fan_out = [&](std::size_t layer) -> std::size_t {
    return layer == hidden ? 1 : static_cast<std::size_t>(spec.hidden_widths[layer]);
  };
  std::size_t offset = 0;
  for (std::size_t k = hidden + 1; k-- > 0;) {
    weights_[k] = Block{offset, fan_out(k), fan_in(k)};
    offset += weights_[k].size();
    biases_[k] = Block{offset, fan_out(k), 1};
    offset += biases_[k].size();
  }
  size_ = offset;
}

std::vector<LayerParams> unflatten(const ParamLayout& layout, const ParamVector& params) {
  if (static_cast<std::size_t>(params.size()) != layout.size()) {
    throw std::invalid_argument("unflatten: parameter vector does not match layout");
  }
  std::vector<LayerParams> layers(layout.layers());
  for (std::size_t k = 0; k < layout.layers(); ++k) {
    const auto& w = layout.weight(k);
    const auto& b = layout.bias(k);
    layers[k].weight = ConstMatMap(params.data() + w.offset, w.rows, w.cols);
    layers[k].bias = params.segment(b.offset, b.rows);
  }
  return layers;
}

ParamVector flatten(const ParamLayout& layout, const std::vector<LayerParams>& layers) {
  if (layers.size() != layout.layers()) {
    throw std::invalid_argument("flatten: layer count does not match layout");
  }
  ParamVector params(layout.size());
  for (std::size_t k = 0; k < layout.layers(); ++k) {
    const auto& w = layout.weight(k);
    const auto& b = layout.bias(k);
    if (static_cast<std::size_t>(layers[k].weight.rows()) != w.rows ||
        static_cast<std::size_t>(layers[k].weight.cols()) != w.cols ||
        static_cast<std::size_t>(layers[k].bias.size()) != b.rows) {
      throw std::invalid_argument("flatten: layer " + std::to_string(k) + " has the wrong shape");
    }
    MatMap(params.data() + w.offset, w.rows, w.cols) = layers[k].weight;
    params.segment(b.offset, b.rows) = layers[k].bias;
  }
  return params;
}

// Forward record for one chunk. Every stacked matrix holds the value channel
// in its first n columns followed by one n-column block per input direction.
struct Mlp::Tape {
  Eigen::Index n = 0;
  int channels = 1;
  std::vector<Eigen::MatrixXd> inputs;  // inputs[k] feeds layer k
  std::vector<Eigen::MatrixXd> preact;  // W_k * inputs[k], bias excluded
  std::vector<Eigen::ArrayXXd> d1;
  std::vector<Eigen::ArrayXXd> d2;
  Eigen::RowVectorXd out;  // w_K^T * inputs[K]
  Eigen::ArrayXd o0;
  Eigen::ArrayXd o1;
  Eigen::ArrayXd o2;
};

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)), layout_(spec_) {}

void Mlp::check(const ParamVector& params, Eigen::Index rows) const {
  if (static_cast<std::size_t>(params.size()) != layout_.size()) {
    throw std::invalid_argument("Mlp: expected " + std::to_string(layout_.size()) + " parameters, got " +
                                std::to_string(params.size()));
  }
  if (rows != spec_.input_dim) {
    throw std::invalid_argument("Mlp: expected input dimension " + std::to_string(spec_.input_dim) + ", got " +
                                std::to_string(rows));
  }
}

ParamVector Mlp::init_params(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  ParamVector params = ParamVector::Zero(static_cast<Eigen::Index>(layout_.size()));
  for (std::size_t k = 0; k < layout_.layers(); ++k) {
    const auto& w = layout_.weight(k);
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < w.size(); ++i) {
      params[static_cast<Eigen::Index>(w.offset + i)] = dist(rng);
    }
  }
  return params;
}

void Mlp::record(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& points, int channels,
                 int order, Tape& tape) const {
  const Eigen::Index n = points.cols();
  const std::size_t hidden = spec_.hidden_layers();
  tape.n = n;
  tape.channels = channels;
  tape.inputs.resize(hidden + 1);
  tape.preact.resize(hidden);
  tape.d1.resize(hidden);
  tape.d2.resize(hidden);

  Eigen::MatrixXd& in0 = tape.inputs[0];
  in0.setZero(spec_.input_dim, n * channels);
  in0.leftCols(n) = points;
  for (int j = 1; j < channels; ++j) {
    in0.row(j - 1).segment(j * n, n).setOnes();
  }

  for (std::size_t k = 0; k < hidden; ++k) {
    const auto& wb = layout_.weight(k);
    const auto& bb = layout_.bias(k);
    const ConstMatMap weight(params.data() + wb.offset, wb.rows, wb.cols);
    const auto bias = params.segment(bb.offset, bb.rows);
    Eigen::MatrixXd& pre = tape.preact[k];
    pre.noalias() = weight * tape.inputs[k];
    const Eigen::Index width = pre.rows();
    Eigen::MatrixXd& next = tape.inputs[k + 1];
    next.resize(width, n * channels);
    Eigen::ArrayXXd& d1 = tape.d1[k];
    Eigen::ArrayXXd& d2 = tape.d2[k];
    next.leftCols(n) = pre.leftCols(n).colwise() + bias;
    if (order >= 1) d1.resize(width, n);
    if (order >= 2) d2.resize(width, n);
    activation_apply(spec_.activations[k], static_cast<std::size_t>(width * n), next.data(), next.data(),
                     order >= 1 ? d1.data() : nullptr, order >= 2 ? d2.data() : nullptr);
    for (int j = 1; j < channels; ++j) {
      next.middleCols(j * n, n) = (d1 * pre.middleCols(j * n, n).array()).matrix();
    }
  }

  const auto& wb = layout_.weight(hidden);
  const double out_bias = params[static_cast<Eigen::Index>(layout_.bias(hidden).offset)];
  const ConstMatMap w_out(params.data() + wb.offset, 1, wb.cols);
  tape.out.noalias() = w_out * tape.inputs[hidden];
  tape.o0.resize(n);
  tape.o1.resize(n);
  tape.o2.resize(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const ActivationValue a = activation_eval(spec_.output_activation, tape.out[c] + out_bias);
    tape.o0[c] = a.value;
    tape.o1[c] = a.d1;
    tape.o2[c] = a.d2;
  }
}

void Mlp::backprop(const ParamVector& params, const Tape& tape, const Eigen::Ref<const Eigen::VectorXd>& value_seed,
                   const Eigen::MatrixXd& grad_seed, Eigen::Ref<ParamVector> grad) const {
  const Eigen::Index n = tape.n;
  const int channels = tape.channels;
  const std::size_t hidden = spec_.hidden_layers();
  const bool tangents = grad_seed.size() > 0;

  // Seeds at the pre-activation of the output unit, stacked by channel.
  Eigen::RowVectorXd seed = Eigen::RowVectorXd::Zero(n * channels);
  Eigen::ArrayXd s_bar = value_seed.array() * tape.o1;
  if (tangents) {
    for (int j = 1; j < channels; ++j) {
      const Eigen::ArrayXd g = grad_seed.row(j - 1).transpose().array();
      s_bar += g * tape.o2 * tape.out.segment(j * n, n).transpose().array();
      seed.segment(j * n, n) = (g * tape.o1).matrix().transpose();
    }
  }
  seed.head(n) = s_bar.matrix().transpose();

  const auto& wb_out = layout_.weight(hidden);
  const ConstMatMap w_out(params.data() + wb_out.offset, 1, wb_out.cols);
  MatMap(grad.data() + wb_out.offset, 1, wb_out.cols).noalias() += seed * tape.inputs[hidden].transpose();
  grad[static_cast<Eigen::Index>(layout_.bias(hidden).offset)] += s_bar.sum();

  Eigen::MatrixXd upstream = w_out.transpose() * seed;
  Eigen::MatrixXd q;
  for (std::size_t k = hidden; k-- > 0;) {
    const auto& wb = layout_.weight(k);
    const auto& bb = layout_.bias(k);
    const Eigen::ArrayXXd& d1 = tape.d1[k];
    const Eigen::ArrayXXd& d2 = tape.d2[k];
    const Eigen::MatrixXd& pre = tape.preact[k];
    q.resize(upstream.rows(), n * channels);
    Eigen::ArrayXXd z_bar = upstream.leftCols(n).array() * d1;
    for (int j = 1; j < channels; ++j) {
      const auto up = upstream.middleCols(j * n, n).array();
      z_bar += up * d2 * pre.middleCols(j * n, n).array();
      q.middleCols(j * n, n) = (up * d1).matrix();
    }
    q.leftCols(n) = z_bar.matrix();
    MatMap(grad.data() + wb.offset, wb.rows, wb.cols).noalias() += q * tape.inputs[k].transpose();
    grad.segment(bb.offset, bb.rows) += z_bar.rowwise().sum().matrix();
    if (k > 0) {
      const ConstMatMap weight(params.data() + wb.offset, wb.rows, wb.cols);
      upstream.noalias() = weight.transpose() * q;
    }
  }
}

BatchEval Mlp::forward_batch(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& points,
                             bool with_input_grad) const {
  check(params, points.rows());
  const Eigen::Index n = points.cols();
  const int channels = with_input_grad ? spec_.input_dim + 1 : 1;
  BatchEval result;
  result.values.resize(n);
  if (with_input_grad) {
    result.input_grads.resize(spec_.input_dim, n);
  }
  Tape tape;
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, n - start);
    record(params, points.middleCols(start, len), channels, channels > 1 ? 1 : 0, tape);
    result.values.segment(start, len) = tape.o0.matrix();
    for (int j = 1; j < channels; ++j) {
      result.input_grads.row(j - 1).segment(start, len) =
          (tape.o1 * tape.out.segment(j * len, len).transpose().array()).matrix().transpose();
    }
  }
  return result;
}

DualEval Mlp::forward(const ParamVector& params, const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const BatchEval eval = forward_batch(params, x, true);
  return DualEval{eval.values[0], eval.input_grads.col(0)};
}

ParamVector Mlp::vjp(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& points,
                     const Eigen::Ref<const Eigen::VectorXd>& value_seed, const Eigen::MatrixXd& grad_seed) const {
  check(params, points.rows());
  const Eigen::Index n = points.cols();
  if (value_seed.size() != n) {
    throw std::invalid_argument("Mlp::vjp: value seed length does not match point count");
  }
  const bool tangents = grad_seed.size() > 0;
  if (tangents && (grad_seed.rows() != spec_.input_dim || grad_seed.cols() != n)) {
    throw std::invalid_argument("Mlp::vjp: gradient seed must be input_dim x n");
  }
  const int channels = tangents ? spec_.input_dim + 1 : 1;
  ParamVector grad = ParamVector::Zero(static_cast<Eigen::Index>(layout_.size()));
  Tape tape;
  const Eigen::MatrixXd none;
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, n - start);
    record(params, points.middleCols(start, len), channels, tangents ? 2 : 1, tape);
    if (tangents) {
      const Eigen::MatrixXd chunk_seed = grad_seed.middleCols(start, len);
      backprop(params, tape, value_seed.segment(start, len), chunk_seed, grad);
    } else {
      backprop(params, tape, value_seed.segment(start, len), none, grad);
    }
  }
  return grad;
}

Mlp::Recording Mlp::record_batch(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& points,
                                 bool with_input_grad) const {
  check(params, points.rows());
  const Eigen::Index n = points.cols();
  const int channels = with_input_grad ? spec_.input_dim + 1 : 1;
  Recording rec;
  rec.params = params;
  rec.tangents = with_input_grad;
  rec.eval.values.resize(n);
  if (with_input_grad) {
    rec.eval.input_grads.resize(spec_.input_dim, n);
  }
  auto tapes = std::make_shared<std::vector<Tape>>();
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, n - start);
    Tape& tape = tapes->emplace_back();
    record(params, points.middleCols(start, len), channels, with_input_grad ? 2 : 1, tape);
    rec.eval.values.segment(start, len) = tape.o0.matrix();
    for (int j = 1; j < channels; ++j) {
      rec.eval.input_grads.row(j - 1).segment(start, len) =
          (tape.o1 * tape.out.segment(j * len, len).transpose().array()).matrix().transpose();
    }
  }
  rec.tapes = std::move(tapes);
  return rec;
}

ParamVector Mlp::vjp(const Recording& recording, const Eigen::Ref<const Eigen::VectorXd>& value_seed,
                     const Eigen::MatrixXd& grad_seed) const {
  check(recording.params, spec_.input_dim);
  const Eigen::Index n = recording.eval.values.size();
  if (value_seed.size() != n) {
    throw std::invalid_argument("Mlp::vjp: value seed length does not match point count");
  }
  const bool tangents = grad_seed.size() > 0;
  if (tangents && (!recording.tangents || grad_seed.rows() != spec_.input_dim || grad_seed.cols() != n)) {
    throw std::invalid_argument("Mlp::vjp: gradient seed needs a recording with input gradients, input_dim x n");
  }
  ParamVector grad = ParamVector::Zero(static_cast<Eigen::Index>(layout_.size()));
  const Eigen::MatrixXd none;
  Eigen::Index start = 0;
  for (const Tape& tape : *recording.tapes) {
    const Eigen::Index len = tape.n;
    if (tangents) {
      const Eigen::MatrixXd chunk_seed = grad_seed.middleCols(start, len);
      backprop(recording.params, tape, value_seed.segment(start, len), chunk_seed, grad);
    } else {
      backprop(recording.params, tape, value_seed.segment(start, len), none, grad);
    }
    start += len;
  }
  return grad;
}

ParamGrads Mlp::param_grads(const ParamVector& params, const Eigen::Ref<const Eigen::VectorXd>& x) const {
  check(params, x.rows());
  const int dim = spec_.input_dim;
  Tape tape;
  record(params, x, dim + 1, 2, tape);
  const Eigen::Index count = static_cast<Eigen::Index>(layout_.size());
  ParamGrads out;
  out.value_grad = ParamVector::Zero(count);
  out.input_grad_jacobian = Eigen::MatrixXd::Zero(dim, count);

  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd seed = Eigen::MatrixXd::Zero(dim, 1);
  backprop(params, tape, one, seed, out.value_grad);
  ParamVector row(count);
  for (int i = 0; i < dim; ++i) {
    seed.setZero();
    seed(i, 0) = 1.0;
    row.setZero();
    backprop(params, tape, zero, seed, row);
    out.input_grad_jacobian.row(i) = row.transpose();
  }
  return out;
}

ParamVector project_ball(const ParamVector& params, double bound) {
  if (!(bound > 0.0)) {
    throw std::invalid_argument("project_ball: bound must be positive");
  }
  if (std::isinf(bound)) {
    return params;
  }
  const double radius = std::sqrt(2.0 * bound);
  const double norm = params.norm();
  // A few ulps of slack so that projecting an already projected vector is a no-op.
  if (norm <= radius * (1.0 + 8.0 * std::numeric_limits<double>::epsilon())) {
    return params;
  }
  return params * (radius / norm);
}

}  // namespace iwan
