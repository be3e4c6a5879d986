#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lelu {

enum class ActivationKind { LU, Tanh, ReLU, LeakyReLU, ELU, SiLU, Softplus, LELU };

inline constexpr std::array<ActivationKind, 8> kAllActivationKinds = {
    ActivationKind::LU,  ActivationKind::Tanh, ActivationKind::ReLU,     ActivationKind::LeakyReLU,
    ActivationKind::ELU, ActivationKind::SiLU, ActivationKind::Softplus, ActivationKind::LELU};

inline constexpr bool has_shape_param(ActivationKind kind) noexcept {
  return kind == ActivationKind::LeakyReLU || kind == ActivationKind::LELU;
}

inline std::string_view to_string(ActivationKind kind) noexcept {
  switch (kind) {
    case ActivationKind::LU: return "lu";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::LeakyReLU: return "leaky_relu";
    case ActivationKind::ELU: return "elu";
    case ActivationKind::SiLU: return "silu";
    case ActivationKind::Softplus: return "softplus";
    case ActivationKind::LELU: return "lelu";
  }
  return "?";
}

inline ActivationKind activation_kind_from_string(std::string_view name) {
  for (auto kind : kAllActivationKinds) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

/// Activation kind plus its shape parameter.
///
/// `param` is the negative slope alpha for LeakyReLU and the negative-side
/// asymptotic slope beta for LELU; it is ignored by every other kind.
struct ActivationSpec {
  ActivationKind kind = ActivationKind::ReLU;
  double param = 0.0;
  bool trainable = false;

  static ActivationSpec lelu(double beta, bool trainable = false) {
    return {ActivationKind::LELU, beta, trainable};
  }
  static ActivationSpec leaky_relu(double alpha, bool trainable = false) {
    return {ActivationKind::LeakyReLU, alpha, trainable};
  }
  static ActivationSpec plain(ActivationKind kind) { return {kind, 0.0, false}; }

  friend bool operator==(const ActivationSpec&, const ActivationSpec&) = default;
};

inline void validate(const ActivationSpec& spec) {
  if (has_shape_param(spec.kind)) {
    if (!(spec.param >= 0.0 && spec.param < 1.0)) {
      throw std::invalid_argument(std::string(to_string(spec.kind)) +
                                  " parameter must lie in [0, 1), got " + std::to_string(spec.param));
    }
  } else if (spec.trainable) {
    throw std::invalid_argument(std::string(to_string(spec.kind)) + " has no trainable parameter");
  }
}

/// Human-readable label such as "lelu(0.3)".
inline std::string label(const ActivationSpec& spec) {
  std::string out(to_string(spec.kind));
  if (has_shape_param(spec.kind)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "(%g)", spec.param);
    out += buf;
  }
  return out;
}

namespace detail {

inline double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

inline double eval(const ActivationSpec& spec, double x) noexcept {
  const double p = spec.param;
  switch (spec.kind) {
    case ActivationKind::LU: return x;
    case ActivationKind::Tanh: return std::tanh(x);
    case ActivationKind::ReLU: return x > 0.0 ? x : 0.0;
    case ActivationKind::LeakyReLU: return x > 0.0 ? x : p * x;
    case ActivationKind::ELU: return x > 0.0 ? x : std::expm1(x);
    case ActivationKind::SiLU: return x * detail::sigmoid(x);
    case ActivationKind::Softplus: return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    case ActivationKind::LELU: return x > 0.0 ? x : std::expm1((1.0 - p) * x) + p * x;
  }
  return x;
}

/// d(phi)/dx. ReLU and LeakyReLU return the right-hand slope at x = 0.
inline double eval_derivative(const ActivationSpec& spec, double x) noexcept {
  const double p = spec.param;
  switch (spec.kind) {
    case ActivationKind::LU: return 1.0;
    case ActivationKind::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case ActivationKind::ReLU: return x >= 0.0 ? 1.0 : 0.0;
    case ActivationKind::LeakyReLU: return x >= 0.0 ? 1.0 : p;
    case ActivationKind::ELU: return x > 0.0 ? 1.0 : std::exp(x);
    case ActivationKind::SiLU: {
      const double s = detail::sigmoid(x);
      return s * (1.0 + x * (1.0 - s));
    }
    case ActivationKind::Softplus: return detail::sigmoid(x);
    // p + nonnegative term never rounds below p; at x = 0 the sum rounds to exactly 1.
    case ActivationKind::LELU: return x > 0.0 ? 1.0 : p + (1.0 - p) * std::exp((1.0 - p) * x);
  }
  return 1.0;
}

/// d(phi)/d(param) for the two kinds that carry a shape parameter.
inline double eval_param_derivative(const ActivationSpec& spec, double x) {
  switch (spec.kind) {
    case ActivationKind::LeakyReLU: return x > 0.0 ? 0.0 : x;
    case ActivationKind::LELU:
      return x > 0.0 ? 0.0 : -x * std::expm1((1.0 - spec.param) * x);
    default:
      throw std::invalid_argument(std::string(to_string(spec.kind)) + " has no shape parameter");
  }
}

struct FlexibilityScore {
  double eta = 0.0;
  double min_slope = 0.0;
  double max_slope = 1.0;
};

struct Interval {
  double lo = -10.0;
  double hi = 10.0;
};

inline constexpr Interval kDefaultFlexDomain{-10.0, 10.0};
inline constexpr std::size_t kDefaultFlexSamples = 100001;

/// eta = 1 - min(phi') / max(phi').
///
/// Slopes are the extrema over the whole real line (infimum/supremum) for
/// every kind that has them in closed form; SiLU is scanned numerically
/// over `domain` with `samples` equally spaced points.
inline FlexibilityScore flexibility_score(const ActivationSpec& spec, Interval domain = kDefaultFlexDomain,
                                          std::size_t samples = kDefaultFlexSamples) {
  if (!(domain.hi > domain.lo)) throw std::invalid_argument("flexibility domain is degenerate");
  if (samples < 2) throw std::invalid_argument("flexibility scan needs at least 2 samples");

  double lo = 0.0, hi = 1.0;
  switch (spec.kind) {
    case ActivationKind::LU: lo = 1.0; hi = 1.0; break;
    case ActivationKind::Tanh:
    case ActivationKind::ReLU:
    case ActivationKind::ELU:
    case ActivationKind::Softplus: lo = 0.0; hi = 1.0; break;
    case ActivationKind::LeakyReLU:
    case ActivationKind::LELU: lo = spec.param; hi = 1.0; break;
    case ActivationKind::SiLU: {
      lo = eval_derivative(spec, domain.lo);
      hi = lo;
      const double step = (domain.hi - domain.lo) / static_cast<double>(samples - 1);
      for (std::size_t i = 1; i < samples; ++i) {
        const double slope = eval_derivative(spec, domain.lo + step * static_cast<double>(i));
        lo = std::min(lo, slope);
        hi = std::max(hi, slope);
      }
      break;
    }
  }
  return {1.0 - lo / hi, lo, hi};
}

}  // namespace lelu
