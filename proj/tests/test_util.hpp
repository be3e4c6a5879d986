#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

namespace lelu::testing {

/// |a - b| relative to the larger magnitude; magnitudes below `floor` are
/// compared against `floor` so values near zero are checked absolutely.
inline double rel_error(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central difference (f(x + h) - f(x - h)) / 2h.
inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace lelu::testing
