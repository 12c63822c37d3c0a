#pragma once

// Dense feed-forward stacks with exact backpropagation and Adam.
//
// Batches are row-major in the sense of "one sample per row": a layer maps an
// (n x in_dim) batch X to X * W^T + 1 * b^T, with W stored out_dim x in_dim.

#include "feattrans/common.hpp"

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace feattrans::nn {

enum class Activation : std::uint8_t { Linear = 0, Relu = 1 };

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weights;  // out_dim x in_dim
  VectorX<Scalar> bias;     // out_dim
  Activation activation = Activation::Linear;

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
};

template <typename Scalar>
struct LayerStack {
  std::vector<DenseLayer<Scalar>> layers;
  bool final_l2_normalize = false;

  bool empty() const { return layers.empty(); }
  Eigen::Index in_dim() const { return layers.front().in_dim(); }
  Eigen::Index out_dim() const { return layers.back().out_dim(); }
};

/// Activations cached by forward() for a matching backward() call.
template <typename Scalar>
struct Tape {
  std::vector<MatrixX<Scalar>> inputs;       // input batch seen by each layer
  std::vector<MatrixX<Scalar>> activations;  // post-activation output of each layer
  VectorX<Scalar> row_norms;                 // pre-normalization row norms (final_l2_normalize only)
};

template <typename Scalar>
struct ForwardResult {
  MatrixX<Scalar> output;
  Tape<Scalar> tape;
};

template <typename Scalar>
struct StackGradients {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> bias;
  MatrixX<Scalar> input;  // d loss / d batch
};

template <typename Scalar>
struct Loss {
  Scalar value;
  MatrixX<Scalar> grad;
};

// Norm floor for the L2 output layer; rows shorter than this are scaled by 1/floor.
inline constexpr double kNormFloor = 1e-12;

/// Widths (d0, d1, ..., dk) become k layers. `activations` has one entry per layer.
template <typename Scalar, typename Rng>
LayerStack<Scalar> make_stack(std::span<const Eigen::Index> widths,
                              std::span<const Activation> activations, bool final_l2_normalize,
                              Rng& rng) {
  if (widths.size() < 2 || activations.size() != widths.size() - 1) {
    throw Error(ErrorCode::InvalidArgument, "make_stack: need k+1 widths and k activations");
  }
  LayerStack<Scalar> stack;
  stack.final_l2_normalize = final_l2_normalize;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (widths[l] < 1 || widths[l + 1] < 1) throw Error(ErrorCode::InvalidArgument, "make_stack: width < 1");
    // He-uniform over fan-in.
    const double limit = std::sqrt(6.0 / double(widths[l]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer<Scalar> layer;
    layer.weights.resize(widths[l + 1], widths[l]);
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = Scalar(dist(rng));
    layer.bias = VectorX<Scalar>::Zero(widths[l + 1]);
    layer.activation = activations[l];
    stack.layers.push_back(std::move(layer));
  }
  return stack;
}

template <typename Scalar>
ForwardResult<Scalar> forward(const LayerStack<Scalar>& stack, const MatrixX<Scalar>& batch) {
  if (stack.empty()) throw Error(ErrorCode::InvalidArgument, "forward on empty stack");
  if (batch.cols() != stack.in_dim()) {
    throw Error(ErrorCode::DimMismatch, "batch has " + std::to_string(batch.cols()) +
                                            " columns, stack expects " + std::to_string(stack.in_dim()));
  }
  ForwardResult<Scalar> result;
  auto& tape = result.tape;
  tape.inputs.reserve(stack.layers.size());
  tape.activations.reserve(stack.layers.size());

  const MatrixX<Scalar>* x = &batch;
  for (const auto& layer : stack.layers) {
    tape.inputs.push_back(*x);
    MatrixX<Scalar> y = (*x) * layer.weights.transpose();
    y.rowwise() += layer.bias.transpose();
    if (layer.activation == Activation::Relu) y = y.cwiseMax(Scalar(0));
    tape.activations.push_back(std::move(y));
    x = &tape.activations.back();
  }

  result.output = tape.activations.back();
  if (stack.final_l2_normalize) {
    tape.row_norms = result.output.rowwise().norm().cwiseMax(Scalar(kNormFloor));
    result.output.array().colwise() /= tape.row_norms.array();
  }
  return result;
}

template <typename Scalar>
MatrixX<Scalar> predict(const LayerStack<Scalar>& stack, const MatrixX<Scalar>& batch) {
  return forward(stack, batch).output;
}

/// Gradients of sum(upstream .* output) with respect to every parameter and the input batch.
template <typename Scalar>
StackGradients<Scalar> backward(const LayerStack<Scalar>& stack, const Tape<Scalar>& tape,
                                const MatrixX<Scalar>& upstream) {
  const std::size_t n_layers = stack.layers.size();
  if (tape.inputs.size() != n_layers || tape.activations.size() != n_layers) {
    throw Error(ErrorCode::DimMismatch, "stale tape: layer count differs");
  }
  const MatrixX<Scalar>& out = tape.activations.back();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols()) {
    throw Error(ErrorCode::DimMismatch, "upstream gradient shape differs from forward output");
  }
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (tape.inputs[l].cols() != stack.layers[l].in_dim() ||
        tape.activations[l].cols() != stack.layers[l].out_dim()) {
      throw Error(ErrorCode::DimMismatch, "stale tape: layer " + std::to_string(l) + " shape differs");
    }
  }

  MatrixX<Scalar> grad = upstream;
  if (stack.final_l2_normalize) {
    // y = x / |x|  =>  dx = (g - y (y . g)) / |x|
    if (tape.row_norms.size() != out.rows()) throw Error(ErrorCode::DimMismatch, "stale tape: row norms");
    MatrixX<Scalar> y = out;
    y.array().colwise() /= tape.row_norms.array();
    const VectorX<Scalar> proj = (y.array() * grad.array()).rowwise().sum();
    grad = grad - y.cwiseProduct(proj.replicate(1, y.cols()));
    grad.array().colwise() /= tape.row_norms.array();
  }

  StackGradients<Scalar> grads;
  grads.weights.resize(n_layers);
  grads.bias.resize(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = stack.layers[l];
    if (layer.activation == Activation::Relu) {
      grad = (tape.activations[l].array() > Scalar(0)).select(grad, Scalar(0));
    }
    grads.weights[l] = grad.transpose() * tape.inputs[l];
    grads.bias[l] = grad.colwise().sum().transpose();
    grad = grad * layer.weights;
  }
  grads.input = std::move(grad);
  return grads;
}

/// Mean over rows of the (non-squared) Euclidean distance, with its gradient w.r.t. `pred`.
/// The gradient at coincident rows is 0.
template <typename Scalar>
Loss<Scalar> euclid_loss(const MatrixX<Scalar>& pred, const MatrixX<Scalar>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw Error(ErrorCode::DimMismatch, "euclid_loss: shapes differ");
  }
  if (pred.rows() == 0) throw Error(ErrorCode::EmptyInput, "euclid_loss: empty batch");
  const Scalar n = Scalar(pred.rows());
  MatrixX<Scalar> diff = pred - target;
  const VectorX<Scalar> dist = diff.rowwise().norm();
  Loss<Scalar> loss{dist.sum() / n, {}};
  diff.array().colwise() /= (dist.array() + Scalar(1e-12)) * n;
  loss.grad = std::move(diff);
  return loss;
}

// Flat views over every parameter block of a stack, in layer order (weights, then bias).
template <typename Scalar>
using ParamView = Eigen::Map<VectorX<Scalar>>;
template <typename Scalar>
using GradView = Eigen::Map<const VectorX<Scalar>>;

template <typename Scalar>
void append_params(LayerStack<Scalar>& stack, std::vector<ParamView<Scalar>>& out) {
  for (auto& layer : stack.layers) {
    out.emplace_back(layer.weights.data(), layer.weights.size());
    out.emplace_back(layer.bias.data(), layer.bias.size());
  }
}

template <typename Scalar>
void append_grads(const StackGradients<Scalar>& grads, std::vector<GradView<Scalar>>& out) {
  for (std::size_t l = 0; l < grads.weights.size(); ++l) {
    out.emplace_back(grads.weights[l].data(), grads.weights[l].size());
    out.emplace_back(grads.bias[l].data(), grads.bias[l].size());
  }
}

struct AdamParams {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  AdamParams params;
  std::size_t step = 0;
  std::vector<VectorX<Scalar>> m;
  std::vector<VectorX<Scalar>> v;
};

/// One bias-corrected Adam update. Moments are created lazily on the first call and must
/// keep the same block layout afterwards.
template <typename Scalar>
void adam_step(std::span<ParamView<Scalar>> params, std::span<const GradView<Scalar>> grads,
               AdamState<Scalar>& state) {
  if (params.size() != grads.size()) throw Error(ErrorCode::DimMismatch, "adam_step: block count");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(VectorX<Scalar>::Zero(p.size()));
      state.v.push_back(VectorX<Scalar>::Zero(p.size()));
    }
  }
  if (state.m.size() != params.size()) throw Error(ErrorCode::DimMismatch, "adam_step: state layout");

  ++state.step;
  const auto& hp = state.params;
  const Scalar c1 = Scalar(1) - Scalar(std::pow(hp.beta1, double(state.step)));
  const Scalar c2 = Scalar(1) - Scalar(std::pow(hp.beta2, double(state.step)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || state.m[i].size() != params[i].size()) {
      throw Error(ErrorCode::DimMismatch, "adam_step: block " + std::to_string(i) + " size");
    }
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = Scalar(hp.beta1) * m + Scalar(1 - hp.beta1) * grads[i];
    v = Scalar(hp.beta2) * v + Scalar(1 - hp.beta2) * grads[i].cwiseAbs2();
    params[i].array() -= Scalar(hp.lr) * (m.array() / c1) /
                         ((v.array() / c2).sqrt() + Scalar(hp.epsilon));
  }
}

}  // namespace feattrans::nn
