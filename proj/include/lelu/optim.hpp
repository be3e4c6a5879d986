#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lelu/network.hpp"

namespace lelu {

enum class LossKind { MAE, MSE };

inline std::string_view to_string(LossKind kind) noexcept { return kind == LossKind::MAE ? "mae" : "mse"; }

inline LossKind loss_kind_from_string(std::string_view name) {
  if (name == "mae") return LossKind::MAE;
  if (name == "mse") return LossKind::MSE;
  throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

struct LossResult {
  double loss = 0.0;
  std::vector<double> grads;  // d loss / d prediction_j
};

/// Mean absolute or mean squared error with per-sample gradients.
/// The MAE subgradient at a zero residual is 0.
inline LossResult loss_and_grad(LossKind kind, std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.empty() || predictions.size() != targets.size()) {
    throw std::invalid_argument("loss needs equal-length, non-empty prediction and target lists");
  }
  const double n = static_cast<double>(predictions.size());
  LossResult out;
  out.grads.resize(predictions.size());
  double total = 0.0;
  for (std::size_t j = 0; j < predictions.size(); ++j) {
    const double r = predictions[j] - targets[j];
    if (kind == LossKind::MAE) {
      total += std::abs(r);
      out.grads[j] = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) / n;
    } else {
      total += r * r;
      out.grads[j] = 2.0 * r / n;
    }
  }
  out.loss = total / n;
  return out;
}

enum class RegularizationKind { None, L1, L2 };

inline std::string_view to_string(RegularizationKind kind) noexcept {
  switch (kind) {
    case RegularizationKind::None: return "none";
    case RegularizationKind::L1: return "l1";
    case RegularizationKind::L2: return "l2";
  }
  return "?";
}

inline RegularizationKind regularization_kind_from_string(std::string_view name) {
  if (name == "none") return RegularizationKind::None;
  if (name == "l1") return RegularizationKind::L1;
  if (name == "l2") return RegularizationKind::L2;
  throw std::invalid_argument("unknown regularization '" + std::string(name) + "'");
}

struct Regularization {
  RegularizationKind kind = RegularizationKind::None;
  double strength = 0.0;

  friend bool operator==(const Regularization&, const Regularization&) = default;
};

inline void validate(const Regularization& reg) {
  if (reg.strength < 0.0) throw std::invalid_argument("regularization strength must be >= 0");
  if ((reg.kind == RegularizationKind::None) != (reg.strength == 0.0)) {
    throw std::invalid_argument("regularization strength must be 0 exactly when the kind is none");
  }
}

/// Adds the penalty gradient (lambda * sign(w) for L1, 2 * lambda * w for
/// L2) to weight tensors only.
inline void add_regularization_grad(const Regularization& reg, const ParameterSet& params, GradientSet& grads) {
  if (reg.kind == RegularizationKind::None) return;
  std::vector<const double*> weight_data;
  params.for_each_tensor([&](ParameterSet::Role role, const double* data, std::size_t) {
    if (role == ParameterSet::Role::Weight) weight_data.push_back(data);
  });
  std::size_t k = 0;
  grads.for_each_tensor([&](ParameterSet::Role role, double* g, std::size_t n) {
    if (role != ParameterSet::Role::Weight) return;
    const double* w = weight_data[k++];
    for (std::size_t i = 0; i < n; ++i) {
      if (reg.kind == RegularizationKind::L1) {
        g[i] += reg.strength * (w[i] > 0.0 ? 1.0 : (w[i] < 0.0 ? -1.0 : 0.0));
      } else {
        g[i] += 2.0 * reg.strength * w[i];
      }
    }
  });
}

/// Penalty value lambda * sum|w| or lambda * sum w^2 over weights.
inline double regularization_penalty(const Regularization& reg, const ParameterSet& params) {
  if (reg.kind == RegularizationKind::None) return 0.0;
  double total = 0.0;
  params.for_each_tensor([&](ParameterSet::Role role, const double* w, std::size_t n) {
    if (role != ParameterSet::Role::Weight) return;
    for (std::size_t i = 0; i < n; ++i) total += reg.kind == RegularizationKind::L1 ? std::abs(w[i]) : w[i] * w[i];
  });
  return reg.strength * total;
}

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

struct AdamState {
  AdamHyper hyper;
  ParameterSet first_moment;
  ParameterSet second_moment;
  std::uint64_t step = 0;

  static AdamState for_params(const ParameterSet& params, AdamHyper hyper = {}) {
    return {hyper, ParameterSet::zeros_like(params), ParameterSet::zeros_like(params), 0};
  }
};

/// One bias-corrected Adam update:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps).
inline void adam_step(AdamState& state, ParameterSet& params, const GradientSet& grads, double learning_rate) {
  if (!params.same_shape(grads) || !params.same_shape(state.first_moment) || !params.same_shape(state.second_moment)) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment shapes differ");
  }
  state.step += 1;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);

  std::vector<const double*> g_data;
  grads.for_each_tensor([&](ParameterSet::Role, const double* d, std::size_t) { g_data.push_back(d); });
  std::vector<double*> m_mut, v_mut;
  state.first_moment.for_each_tensor([&](ParameterSet::Role, double* d, std::size_t) { m_mut.push_back(d); });
  state.second_moment.for_each_tensor([&](ParameterSet::Role, double* d, std::size_t) { v_mut.push_back(d); });

  std::size_t k = 0;
  params.for_each_tensor([&](ParameterSet::Role, double* p, std::size_t n) {
    const double* g = g_data[k];
    double* m = m_mut[k];
    double* v = v_mut[k];
    ++k;
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      // Moments of dead units decay geometrically into subnormals, which
      // are very slow on x86. Flush them; the update is zero either way.
      if (std::abs(m[i]) < std::numeric_limits<double>::min()) m[i] = 0.0;
      if (v[i] < std::numeric_limits<double>::min()) v[i] = 0.0;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
  });
}

/// Reduce-on-plateau learning-rate schedule parameters.
struct LRSchedule {
  double initial = 1e-3;
  double minimum = 1e-6;
  double factor = 0.5;
  std::size_t patience = 500;
  std::size_t cooldown = 100;

  friend bool operator==(const LRSchedule&, const LRSchedule&) = default;
};

inline void validate(const LRSchedule& s) {
  if (!(s.initial > 0.0) || !(s.minimum > 0.0) || s.minimum > s.initial) {
    throw std::invalid_argument("learning rate bounds must satisfy 0 < min <= initial");
  }
  if (!(s.factor > 0.0 && s.factor < 1.0)) throw std::invalid_argument("learning rate factor must lie in (0, 1)");
}

struct ScheduleState {
  double rate = 0.0;
  double best = std::numeric_limits<double>::infinity();
  std::size_t wait = 0;
  std::size_t cooldown_left = 0;

  static ScheduleState start(const LRSchedule& s) { return {s.initial}; }
};

/// Feeds one epoch loss to the schedule and returns the rate for the next
/// epoch. Any strictly lower loss is an improvement. After `patience`
/// epochs without one the rate is multiplied by `factor` (floored at
/// `minimum`) and the patience counter is held at zero for `cooldown`
/// epochs.
inline double schedule_update(const LRSchedule& sched, ScheduleState& state, double epoch_loss) {
  const bool cooling = state.cooldown_left > 0;
  if (cooling) --state.cooldown_left;
  if (epoch_loss < state.best) {
    state.best = epoch_loss;
    state.wait = 0;
  } else if (!cooling) {
    ++state.wait;
    if (state.wait >= sched.patience) {
      state.rate = std::max(state.rate * sched.factor, sched.minimum);
      state.cooldown_left = sched.cooldown;
      state.wait = 0;
    }
  }
  return state.rate;
}

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 1;
  LossKind loss = LossKind::MAE;
  LRSchedule schedule;
  Regularization regularization;
  std::uint64_t seed = 0;
  AdamHyper adam;

  friend bool operator==(const TrainConfig& a, const TrainConfig& b) {
    return a.epochs == b.epochs && a.batch_size == b.batch_size && a.loss == b.loss && a.schedule == b.schedule &&
           a.regularization == b.regularization && a.seed == b.seed;
  }
};

inline void validate(const TrainConfig& c) {
  if (c.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (c.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  validate(c.schedule);
  validate(c.regularization);
}

/// Training pairs stored column-wise: inputs is input_dim x N.
struct TrainingSet {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd targets;

  std::size_t size() const { return static_cast<std::size_t>(targets.size()); }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;           // mean data loss over the epoch, penalty excluded
  double learning_rate = 0.0;  // rate used for this epoch's updates
  std::vector<double> activation_params;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

using TrainingHistory = std::vector<EpochRecord>;

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t epoch, double loss)
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + " (loss " + std::to_string(loss) + ")"),
        epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

inline constexpr double kActivationParamMin = 0.0;
inline constexpr double kActivationParamMax = 0.99;

/// Mini-batch Adam training.
///
/// Each epoch shuffles the training set with a generator seeded from
/// `config.seed`, walks it in batches (the last one may be short), adds the
/// regularization gradient to weights, steps Adam, clamps trainable
/// activation parameters to [0, 0.99], and finally feeds the epoch's mean
/// data loss to the plateau schedule. Throws TrainingDiverged on a
/// non-finite epoch loss.
inline TrainingHistory fit(Network& net, const TrainingSet& data, const TrainConfig& config) {
  validate(config);
  if (data.size() == 0) throw std::invalid_argument("training set is empty");
  if (data.inputs.cols() != data.targets.size() || data.inputs.rows() != static_cast<Eigen::Index>(net.spec.input_dim)) {
    throw std::invalid_argument("training set shape does not match network");
  }
  net.check_shapes();

  AdamState adam = AdamState::for_params(net.params, config.adam);
  ScheduleState schedule = ScheduleState::start(config.schedule);
  std::mt19937_64 shuffle_rng(config.seed);

  const std::size_t n = data.size();
  const auto dim = data.inputs.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainingHistory history;
  history.reserve(config.epochs);
  ForwardCache cache;
  Eigen::MatrixXd batch_inputs;
  std::vector<double> batch_targets;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double rate = schedule.rate;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - start);
      batch_inputs.resize(dim, static_cast<Eigen::Index>(count));
      batch_targets.resize(count);
      for (std::size_t j = 0; j < count; ++j) {
        const auto idx = static_cast<Eigen::Index>(order[start + j]);
        batch_inputs.col(static_cast<Eigen::Index>(j)) = data.inputs.col(idx);
        batch_targets[j] = data.targets[idx];
      }
      const Eigen::RowVectorXd pred = forward_batch(net, batch_inputs, &cache);
      const LossResult loss = loss_and_grad(config.loss, {pred.data(), count}, batch_targets);
      loss_sum += loss.loss * static_cast<double>(count);

      GradientSet grads =
          backward_batch(net, cache, Eigen::Map<const Eigen::RowVectorXd>(loss.grads.data(), static_cast<Eigen::Index>(count)));
      add_regularization_grad(config.regularization, net.params, grads);
      adam_step(adam, net.params, grads, rate);
      auto& beta = net.params.activation_params;
      for (Eigen::Index l = 0; l < beta.size(); ++l) beta[l] = std::clamp(beta[l], kActivationParamMin, kActivationParamMax);
    }
    const double epoch_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) throw TrainingDiverged(epoch, epoch_loss);

    EpochRecord record{epoch, epoch_loss, rate, {}};
    const auto& beta = net.params.activation_params;
    record.activation_params.assign(beta.data(), beta.data() + beta.size());
    history.push_back(std::move(record));
    schedule_update(config.schedule, schedule, epoch_loss);
  }
  return history;
}

/// Loss of the network over the whole training set (no penalty).
inline double evaluate_loss(const Network& net, const TrainingSet& data, LossKind kind = LossKind::MAE) {
  const std::vector<double> pred = predict_batch(net, data.inputs);
  return loss_and_grad(kind, pred, {data.targets.data(), data.size()}).loss;
}

}  // namespace lelu
