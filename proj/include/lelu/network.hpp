#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lelu/activations.hpp"

namespace lelu {

struct NetworkSpec {
  std::size_t input_dim = 1;
  std::size_t depth = 1;
  std::size_t width = 1;
  ActivationSpec activation;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

inline void validate(const NetworkSpec& spec) {
  if (spec.input_dim < 1 || spec.depth < 1 || spec.width < 1) {
    throw std::invalid_argument("network input_dim, depth and width must all be >= 1");
  }
  validate(spec.activation);
}

/// Every trainable tensor of a dense network, in a fixed order.
///
/// The same layout holds network parameters, their gradients and the Adam
/// moment accumulators. `activation_params` has one entry per hidden layer
/// when the activation parameter is trainable and is empty otherwise.
struct ParameterSet {
  std::vector<Eigen::MatrixXd> weights;  // layer l: width x fan_in
  std::vector<Eigen::VectorXd> biases;
  Eigen::RowVectorXd output_weight;
  Eigen::VectorXd output_bias;  // size 1
  Eigen::VectorXd activation_params;

  enum class Role { Weight, Bias, ActivationParam };

  /// Calls f(role, data, size) on every tensor in storage order.
  template <class F>
  void for_each_tensor(F&& f) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      f(Role::Weight, weights[l].data(), static_cast<std::size_t>(weights[l].size()));
      f(Role::Bias, biases[l].data(), static_cast<std::size_t>(biases[l].size()));
    }
    f(Role::Weight, output_weight.data(), static_cast<std::size_t>(output_weight.size()));
    f(Role::Bias, output_bias.data(), std::size_t{1});
    if (activation_params.size() > 0) {
      f(Role::ActivationParam, activation_params.data(), static_cast<std::size_t>(activation_params.size()));
    }
  }

  template <class F>
  void for_each_tensor(F&& f) const {
    const_cast<ParameterSet*>(this)->for_each_tensor(
        [&](Role role, double* data, std::size_t n) { f(role, static_cast<const double*>(data), n); });
  }

  std::size_t size() const {
    std::size_t n = 0;
    for_each_tensor([&](Role, const double*, std::size_t count) { n += count; });
    return n;
  }

  /// Zero-filled set with the same shapes as `like`.
  static ParameterSet zeros_like(const ParameterSet& like) {
    ParameterSet out;
    for (const auto& w : like.weights) out.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : like.biases) out.biases.push_back(Eigen::VectorXd::Zero(b.size()));
    out.output_weight = Eigen::RowVectorXd::Zero(like.output_weight.size());
    out.output_bias = Eigen::VectorXd::Zero(1);
    out.activation_params = Eigen::VectorXd::Zero(like.activation_params.size());
    return out;
  }

  bool same_shape(const ParameterSet& other) const {
    if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].rows() != other.weights[l].rows() || weights[l].cols() != other.weights[l].cols()) return false;
      if (biases[l].size() != other.biases[l].size()) return false;
    }
    return output_weight.size() == other.output_weight.size() && output_bias.size() == other.output_bias.size() &&
           activation_params.size() == other.activation_params.size();
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
      if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
    }
    return a.output_weight == b.output_weight && a.output_bias == b.output_bias &&
           a.activation_params == b.activation_params;
  }
};

using GradientSet = ParameterSet;

/// Dense feedforward network: `depth` hidden layers of `width` neurons
/// sharing one activation kind, followed by a linear single-neuron output.
struct Network {
  NetworkSpec spec;
  ParameterSet params;

  /// Activation used by hidden layer `layer`, with its current parameter.
  ActivationSpec layer_activation(std::size_t layer) const {
    ActivationSpec act = spec.activation;
    if (params.activation_params.size() > 0) act.param = params.activation_params[static_cast<Eigen::Index>(layer)];
    return act;
  }

  bool trainable_activation() const { return params.activation_params.size() > 0; }

  /// Checks that layer shapes chain input_dim -> width -> ... -> 1.
  void check_shapes() const {
    const auto& p = params;
    if (p.weights.size() != spec.depth || p.biases.size() != spec.depth) {
      throw std::logic_error("network layer count does not match depth");
    }
    auto fan_in = static_cast<Eigen::Index>(spec.input_dim);
    const auto width = static_cast<Eigen::Index>(spec.width);
    for (std::size_t l = 0; l < spec.depth; ++l) {
      if (p.weights[l].rows() != width || p.weights[l].cols() != fan_in || p.biases[l].size() != width) {
        throw std::logic_error("hidden layer " + std::to_string(l) + " has inconsistent shape");
      }
      fan_in = width;
    }
    if (p.output_weight.size() != width || p.output_bias.size() != 1) {
      throw std::logic_error("output layer has inconsistent shape");
    }
    const auto expected_params = spec.activation.trainable ? static_cast<Eigen::Index>(spec.depth) : 0;
    if (p.activation_params.size() != expected_params) {
      throw std::logic_error("activation parameter count does not match depth");
    }
  }
};

/// Network with every parameter zero (biases, weights) and the spec's
/// activation parameter replicated per layer when trainable.
inline Network make_zero_network(const NetworkSpec& spec) {
  validate(spec);
  Network net{spec, {}};
  auto fan_in = static_cast<Eigen::Index>(spec.input_dim);
  const auto width = static_cast<Eigen::Index>(spec.width);
  for (std::size_t l = 0; l < spec.depth; ++l) {
    net.params.weights.push_back(Eigen::MatrixXd::Zero(width, fan_in));
    net.params.biases.push_back(Eigen::VectorXd::Zero(width));
    fan_in = width;
  }
  net.params.output_weight = Eigen::RowVectorXd::Zero(width);
  net.params.output_bias = Eigen::VectorXd::Zero(1);
  if (spec.activation.trainable) {
    net.params.activation_params = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(spec.depth), spec.activation.param);
  }
  return net;
}

/// He-normal initialization: weights ~ N(0, 2 / fan_in), untruncated; biases 0.
///
/// Weight tensor t draws from its own generator seeded with (seed, t), so a
/// layer's initial weights do not depend on the shapes of the other layers.
inline Network init_he_normal(const NetworkSpec& spec, std::uint64_t seed) {
  Network net = make_zero_network(spec);
  std::uint32_t tensor = 0;
  auto fill = [&](auto& matrix) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tensor++};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(matrix.cols())));
    // Row-major draw order so the stream maps onto the checkpoint layout.
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
      for (Eigen::Index c = 0; c < matrix.cols(); ++c) matrix(r, c) = normal(rng);
    }
  };
  for (auto& w : net.params.weights) fill(w);
  fill(net.params.output_weight);
  return net;
}

/// Intermediate values of a forward pass over a batch (one column per sample).
///
/// `pre_activations` has depth + 1 entries, the last one being the 1 x batch
/// output row; `activations[l]` is phi(pre_activations[l]) for hidden layers.
struct ForwardCache {
  Eigen::MatrixXd inputs;
  std::vector<Eigen::MatrixXd> pre_activations;
  std::vector<Eigen::MatrixXd> activations;

  Eigen::Index batch_size() const { return inputs.cols(); }
};

namespace detail {

template <class Op>
Eigen::MatrixXd map_elementwise(const Eigen::MatrixXd& z, Op op) {
  Eigen::MatrixXd out(z.rows(), z.cols());
  const double* src = z.data();
  double* dst = out.data();
  for (Eigen::Index i = 0; i < z.size(); ++i) dst[i] = op(src[i]);
  return out;
}

}  // namespace detail

/// Batched forward pass; `inputs` is input_dim x batch.
inline Eigen::RowVectorXd forward_batch(const Network& net, const Eigen::MatrixXd& inputs, ForwardCache* cache) {
  if (inputs.rows() != static_cast<Eigen::Index>(net.spec.input_dim)) {
    throw std::invalid_argument("input dimension " + std::to_string(inputs.rows()) + " does not match network input_dim " +
                                std::to_string(net.spec.input_dim));
  }
  const auto& p = net.params;
  Eigen::MatrixXd a = inputs;
  if (cache) {
    cache->inputs = inputs;
    cache->pre_activations.clear();
    cache->activations.clear();
  }
  for (std::size_t l = 0; l < net.spec.depth; ++l) {
    Eigen::MatrixXd z = p.weights[l] * a;
    z.colwise() += p.biases[l];
    const ActivationSpec act = net.layer_activation(l);
    a = detail::map_elementwise(z, [&act](double v) { return eval(act, v); });
    if (cache) {
      cache->pre_activations.push_back(std::move(z));
      cache->activations.push_back(a);
    }
  }
  Eigen::RowVectorXd out = p.output_weight * a;
  out.array() += p.output_bias[0];
  if (cache) cache->pre_activations.push_back(out);
  return out;
}

struct ForwardResult {
  double prediction = 0.0;
  ForwardCache cache;
};

inline ForwardResult forward(const Network& net, std::span<const double> x) {
  ForwardResult result;
  const Eigen::Map<const Eigen::MatrixXd> column(x.data(), static_cast<Eigen::Index>(x.size()), 1);
  result.prediction = forward_batch(net, column, &result.cache)[0];
  return result;
}

/// Predictions for a batch of points stored column-wise, without a cache.
inline std::vector<double> predict_batch(const Network& net, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() == 0) return {};
  const Eigen::RowVectorXd out = forward_batch(net, inputs, nullptr);
  return {out.data(), out.data() + out.size()};
}

inline std::vector<double> predict_batch(const Network& net, std::span<const std::vector<double>> xs) {
  Eigen::MatrixXd inputs(static_cast<Eigen::Index>(net.spec.input_dim), static_cast<Eigen::Index>(xs.size()));
  for (std::size_t j = 0; j < xs.size(); ++j) {
    if (xs[j].size() != net.spec.input_dim) throw std::invalid_argument("input point has wrong dimension");
    for (std::size_t i = 0; i < xs[j].size(); ++i) inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs[j][i];
  }
  return predict_batch(net, inputs);
}

/// Reverse-mode gradients of sum_j upstream[j] * output_j with respect to
/// every parameter. The activation-parameter gradient of a layer sums
/// dphi/dparam over that layer's neurons and the batch.
inline GradientSet backward_batch(const Network& net, const ForwardCache& cache, const Eigen::RowVectorXd& upstream) {
  const auto& p = net.params;
  const std::size_t depth = net.spec.depth;
  if (cache.pre_activations.size() != depth + 1 || cache.activations.size() != depth ||
      upstream.size() != cache.batch_size() || cache.inputs.rows() != static_cast<Eigen::Index>(net.spec.input_dim)) {
    throw std::invalid_argument("forward cache does not match network");
  }
  for (std::size_t l = 0; l < depth; ++l) {
    if (cache.pre_activations[l].rows() != p.weights[l].rows() || cache.pre_activations[l].cols() != upstream.size()) {
      throw std::invalid_argument("forward cache layer " + std::to_string(l) + " does not match network");
    }
  }

  GradientSet grad = ParameterSet::zeros_like(p);
  grad.output_weight = upstream * cache.activations.back().transpose();
  grad.output_bias[0] = upstream.sum();
  Eigen::MatrixXd d_act = p.output_weight.transpose() * upstream;

  for (std::size_t l = depth; l-- > 0;) {
    const Eigen::MatrixXd& z = cache.pre_activations[l];
    const ActivationSpec act = net.layer_activation(l);
    if (net.trainable_activation()) {
      const Eigen::MatrixXd dparam = detail::map_elementwise(z, [&act](double v) { return eval_param_derivative(act, v); });
      grad.activation_params[static_cast<Eigen::Index>(l)] = d_act.cwiseProduct(dparam).sum();
    }
    const Eigen::MatrixXd d_pre =
        d_act.cwiseProduct(detail::map_elementwise(z, [&act](double v) { return eval_derivative(act, v); }));
    const Eigen::MatrixXd& below = l == 0 ? cache.inputs : cache.activations[l - 1];
    grad.weights[l] = d_pre * below.transpose();
    grad.biases[l] = d_pre.rowwise().sum();
    if (l > 0) d_act = p.weights[l].transpose() * d_pre;
  }
  return grad;
}

inline GradientSet backward(const Network& net, const ForwardCache& cache, double upstream_grad) {
  if (cache.batch_size() != 1) throw std::invalid_argument("scalar backward expects a single-sample cache");
  return backward_batch(net, cache, Eigen::RowVectorXd::Constant(1, upstream_grad));
}

}  // namespace lelu
