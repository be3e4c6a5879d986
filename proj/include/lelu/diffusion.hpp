#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lelu {

/// Values sampled on a d-dimensional tensor-product lattice.
///
/// `values` is row-major over the lattice (the last axis varies fastest).
/// Each axis must be uniformly spaced.
struct StructuredGrid {
  std::vector<std::vector<double>> axes;
  std::vector<double> values;

  std::size_t dims() const { return axes.size(); }

  std::vector<std::size_t> shape() const {
    std::vector<std::size_t> s;
    for (const auto& a : axes) s.push_back(a.size());
    return s;
  }

  std::size_t node_count() const {
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.size();
    return axes.empty() ? 0 : n;
  }

  double spacing(std::size_t dim) const {
    const auto& a = axes.at(dim);
    return (a.back() - a.front()) / static_cast<double>(a.size() - 1);
  }

  std::size_t flat_index(std::span<const std::size_t> idx) const {
    std::size_t flat = 0;
    for (std::size_t d = 0; d < axes.size(); ++d) flat = flat * axes[d].size() + idx[d];
    return flat;
  }

  std::vector<std::size_t> unravel(std::size_t flat) const {
    std::vector<std::size_t> idx(axes.size());
    for (std::size_t d = axes.size(); d-- > 0;) {
      idx[d] = flat % axes[d].size();
      flat /= axes[d].size();
    }
    return idx;
  }

  double at(std::span<const std::size_t> idx) const { return values[flat_index(idx)]; }

  friend bool operator==(const StructuredGrid&, const StructuredGrid&) = default;
};

inline constexpr double kSpacingTolerance = 1e-9;

/// Throws unless every axis has >= `min_points` uniformly spaced,
/// increasing coordinates and the value count matches the lattice.
inline void validate_lattice(const StructuredGrid& grid, std::size_t min_points = 2) {
  if (grid.axes.empty()) throw std::invalid_argument("grid has no dimensions");
  for (std::size_t d = 0; d < grid.dims(); ++d) {
    const auto& a = grid.axes[d];
    if (a.size() < min_points) {
      throw std::invalid_argument("grid axis " + std::to_string(d) + " has " + std::to_string(a.size()) +
                                  " points, need at least " + std::to_string(min_points));
    }
    const double h = grid.spacing(d);
    if (!(h > 0.0)) throw std::invalid_argument("grid axis " + std::to_string(d) + " is not increasing");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double expected = a.front() + h * static_cast<double>(i);
      if (std::abs(a[i] - expected) > kSpacingTolerance * std::max(1.0, std::abs(h) * static_cast<double>(a.size()))) {
        throw std::invalid_argument("grid axis " + std::to_string(d) + " is not uniformly spaced");
      }
    }
  }
  if (grid.values.size() != grid.node_count()) throw std::invalid_argument("grid value count does not match its shape");
}

inline void require_positive(const StructuredGrid& grid) {
  for (std::size_t k = 0; k < grid.values.size(); ++k) {
    if (!(grid.values[k] > 0.0)) {
      throw std::invalid_argument("grid value at node " + std::to_string(k) + " is not strictly positive");
    }
  }
}

/// Maps a column-wise batch of points (dims x N) to N predictions.
using BatchPredictor = std::function<std::vector<double>(const Eigen::MatrixXd&)>;

/// Adapts a scalar function of one point into a BatchPredictor.
template <class F>
BatchPredictor pointwise(F f) {
  return [f](const Eigen::MatrixXd& points) {
    std::vector<double> out(static_cast<std::size_t>(points.cols()));
    std::vector<double> x(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      for (Eigen::Index i = 0; i < points.rows(); ++i) x[static_cast<std::size_t>(i)] = points(i, j);
      out[static_cast<std::size_t>(j)] = f(std::span<const double>(x));
    }
    return out;
  };
}

/// Cell-centroid lattice interleaving a grid; `points` is dims x count,
/// enumerated row-major over the (shape - 1) cell lattice.
struct StaggeredMesh {
  std::vector<std::size_t> shape;
  Eigen::MatrixXd points;
};

namespace detail {

/// Coordinate of half-index `h` along `axis`: even h is node h/2, odd h is
/// the midpoint between nodes (h-1)/2 and (h+1)/2.
inline double half_index_coordinate(const std::vector<double>& axis, long h) {
  const auto k = static_cast<std::size_t>(h / 2);
  if (h % 2 == 0) return axis[k];
  return 0.5 * (axis[k] + axis[k + 1]);
}

inline double true_term(double dx, double minus, double centre, double plus) {
  const double prefactor = 1.0 / (dx * dx);
  return prefactor * std::abs(plus - 2.0 * centre + minus) / (plus + 2.0 * centre + minus);
}

/// Four-point staggered term; NaN when any stencil value is not positive.
inline double staggered_term(double dx, double minus, double half_minus, double half_plus, double plus) {
  if (!(minus > 0.0 && half_minus > 0.0 && half_plus > 0.0 && plus > 0.0)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double half = 0.5 * dx;
  const double prefactor = 1.0 / (3.0 * half * half);
  return prefactor * std::abs(plus - half_plus - half_minus + minus) / (plus + half_plus + half_minus + minus);
}

inline std::vector<std::size_t> interior_shape(const StructuredGrid& grid) {
  std::vector<std::size_t> s;
  for (const auto& a : grid.axes) s.push_back(a.size() - 2);
  return s;
}

inline std::size_t product(const std::vector<std::size_t>& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

/// Increments a row-major multi-index bounded by `shape`; false on wrap.
inline bool next_index(std::vector<std::size_t>& idx, const std::vector<std::size_t>& shape) {
  for (std::size_t d = idx.size(); d-- > 0;) {
    if (++idx[d] < shape[d]) return true;
    idx[d] = 0;
  }
  return false;
}

/// Common axis spacing of a multi-dimensional grid.
inline double common_spacing(const StructuredGrid& grid) {
  const double dx = grid.spacing(0);
  for (std::size_t d = 1; d < grid.dims(); ++d) {
    if (std::abs(grid.spacing(d) - dx) > kSpacingTolerance * dx) {
      throw std::invalid_argument("multi-dimensional diffusion sensors need equal spacing on every axis; normalize first");
    }
  }
  return dx;
}

}  // namespace detail

/// Sensor values over interior nodes, row-major over the (shape - 2) lattice.
struct InteriorField {
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

/// Predictor-based sensor over interior nodes; nodes whose stencil holds a
/// non-positive prediction carry NaN and are marked in `flagged`.
struct StaggeredField {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<bool> flagged;

  std::size_t flagged_count() const { return static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), true)); }
};

/// 1D true-label sensor |y+ - 2y + y-| / (y+ + 2y + y-) / dx^2 at nodes 1..N-2.
inline InteriorField true_sensor_1d(const StructuredGrid& grid) {
  if (grid.dims() != 1) throw std::invalid_argument("true_sensor_1d needs a one-dimensional grid");
  validate_lattice(grid, 3);
  require_positive(grid);
  const double dx = grid.spacing(0);
  const auto& y = grid.values;
  InteriorField out{{y.size() - 2}, {}};
  out.values.reserve(y.size() - 2);
  for (std::size_t i = 1; i + 1 < y.size(); ++i) out.values.push_back(detail::true_term(dx, y[i - 1], y[i], y[i + 1]));
  return out;
}

/// 1D staggered sensor using predictions at x[i-1], x[i-1/2], x[i+1/2], x[i+1].
inline StaggeredField staggered_sensor_1d(const StructuredGrid& grid, const BatchPredictor& predictor) {
  if (grid.dims() != 1) throw std::invalid_argument("staggered_sensor_1d needs a one-dimensional grid");
  validate_lattice(grid, 3);
  const auto& axis = grid.axes[0];
  const long halves = 2 * static_cast<long>(axis.size()) - 1;
  Eigen::MatrixXd points(1, halves);
  for (long h = 0; h < halves; ++h) points(0, h) = detail::half_index_coordinate(axis, h);
  const std::vector<double> yhat = predictor(points);
  if (yhat.size() != static_cast<std::size_t>(halves)) throw std::runtime_error("predictor returned wrong number of values");

  const double dx = grid.spacing(0);
  const std::size_t interior = axis.size() - 2;
  StaggeredField out{{interior}, std::vector<double>(interior), std::vector<bool>(interior, false)};
  for (std::size_t i = 1; i + 1 < axis.size(); ++i) {
    const std::size_t c = 2 * i;
    const double v = detail::staggered_term(dx, yhat[c - 2], yhat[c - 1], yhat[c + 1], yhat[c + 2]);
    out.values[i - 1] = v;
    out.flagged[i - 1] = std::isnan(v);
  }
  return out;
}

inline StaggeredMesh build_staggered_points(const StructuredGrid& grid) {
  validate_lattice(grid, 2);
  StaggeredMesh mesh;
  for (const auto& a : grid.axes) mesh.shape.push_back(a.size() - 1);
  const std::size_t count = detail::product(mesh.shape);
  mesh.points.resize(static_cast<Eigen::Index>(grid.dims()), static_cast<Eigen::Index>(count));
  std::vector<std::size_t> idx(grid.dims(), 0);
  for (std::size_t k = 0; k < count; ++k) {
    for (std::size_t d = 0; d < grid.dims(); ++d) {
      mesh.points(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) =
          detail::half_index_coordinate(grid.axes[d], 2 * static_cast<long>(idx[d]) + 1);
    }
    detail::next_index(idx, mesh.shape);
  }
  return mesh;
}

/// The 2^(d-1) centre-crossing diagonal directions in {-1, +1}^d, first
/// component fixed at +1 so antipodal pairs appear once.
inline std::vector<std::vector<int>> enumerate_diagonals(std::size_t dims) {
  if (dims < 1) throw std::invalid_argument("diagonals need at least one dimension");
  if (dims > 30) throw std::invalid_argument("too many dimensions");
  const std::size_t count = std::size_t{1} << (dims - 1);
  std::vector<std::vector<int>> out;
  out.reserve(count);
  for (std::size_t bits = 0; bits < count; ++bits) {
    std::vector<int> dir(dims, 1);
    for (std::size_t d = 1; d < dims; ++d) {
      if (bits & (std::size_t{1} << (dims - 1 - d))) dir[d] = -1;
    }
    out.push_back(std::move(dir));
  }
  return out;
}

/// True-label sensor summed over all centre-crossing diagonals.
inline InteriorField true_sensor_nd(const StructuredGrid& grid) {
  validate_lattice(grid, 3);
  require_positive(grid);
  const double dx = detail::common_spacing(grid);
  const auto diagonals = enumerate_diagonals(grid.dims());
  InteriorField out{detail::interior_shape(grid), {}};
  const std::size_t count = detail::product(out.shape);
  out.values.reserve(count);

  std::vector<std::size_t> inner(grid.dims(), 0), node(grid.dims()), plus(grid.dims()), minus(grid.dims());
  for (std::size_t k = 0; k < count; ++k) {
    for (std::size_t d = 0; d < grid.dims(); ++d) node[d] = inner[d] + 1;
    double sum = 0.0;
    for (const auto& dir : diagonals) {
      for (std::size_t d = 0; d < grid.dims(); ++d) {
        plus[d] = static_cast<std::size_t>(static_cast<long>(node[d]) + dir[d]);
        minus[d] = static_cast<std::size_t>(static_cast<long>(node[d]) - dir[d]);
      }
      sum += detail::true_term(dx, grid.at(minus), grid.at(node), grid.at(plus));
    }
    out.values.push_back(sum);
    detail::next_index(inner, out.shape);
  }
  return out;
}

/// Staggered sensor summed over all centre-crossing diagonals.
///
/// Every distinct stencil coordinate (corner nodes and cell centroids) is
/// gathered first and passed to the predictor in a single batch.
inline StaggeredField staggered_sensor_nd(const StructuredGrid& grid, const BatchPredictor& predictor) {
  validate_lattice(grid, 3);
  const double dx = detail::common_spacing(grid);
  const std::size_t dims = grid.dims();
  const auto diagonals = enumerate_diagonals(dims);

  // Half-index lattice: 2n - 1 slots per axis.
  std::vector<std::size_t> half_shape;
  for (const auto& a : grid.axes) half_shape.push_back(2 * a.size() - 1);
  auto half_flat = [&](const std::vector<long>& h) {
    std::size_t flat = 0;
    for (std::size_t d = 0; d < dims; ++d) flat = flat * half_shape[d] + static_cast<std::size_t>(h[d]);
    return flat;
  };

  const std::vector<std::size_t> interior = detail::interior_shape(grid);
  const std::size_t count = detail::product(interior);

  // Pass 1: assign a batch column to every half-index the stencils touch.
  constexpr std::size_t kUnused = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> slot(detail::product(half_shape), kUnused);
  std::vector<std::vector<long>> unique_points;
  std::vector<long> h(dims);
  auto visit_stencils = [&](auto&& on_node) {
    std::vector<std::size_t> inner(dims, 0);
    std::array<std::vector<long>, 4> stencil;
    for (auto& s : stencil) s.resize(dims);
    for (std::size_t k = 0; k < count; ++k) {
      for (std::size_t p = 0; p < diagonals.size(); ++p) {
        for (std::size_t d = 0; d < dims; ++d) {
          const long centre = 2 * static_cast<long>(inner[d] + 1);
          stencil[0][d] = centre - 2 * diagonals[p][d];
          stencil[1][d] = centre - diagonals[p][d];
          stencil[2][d] = centre + diagonals[p][d];
          stencil[3][d] = centre + 2 * diagonals[p][d];
        }
        on_node(k, p, stencil);
      }
      detail::next_index(inner, interior);
    }
  };
  visit_stencils([&](std::size_t, std::size_t, const std::array<std::vector<long>, 4>& stencil) {
    for (const auto& pt : stencil) {
      std::size_t& s = slot[half_flat(pt)];
      if (s == kUnused) {
        s = unique_points.size();
        unique_points.push_back(pt);
      }
    }
  });

  Eigen::MatrixXd points(static_cast<Eigen::Index>(dims), static_cast<Eigen::Index>(unique_points.size()));
  for (std::size_t j = 0; j < unique_points.size(); ++j) {
    for (std::size_t d = 0; d < dims; ++d) {
      points(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(j)) =
          detail::half_index_coordinate(grid.axes[d], unique_points[j][d]);
    }
  }
  const std::vector<double> yhat = predictor(points);
  if (yhat.size() != unique_points.size()) throw std::runtime_error("predictor returned wrong number of values");

  // Pass 2: evaluate the stencils from the cached predictions.
  StaggeredField out{interior, std::vector<double>(count, 0.0), std::vector<bool>(count, false)};
  visit_stencils([&](std::size_t k, std::size_t, const std::array<std::vector<long>, 4>& stencil) {
    const double term = detail::staggered_term(dx, yhat[slot[half_flat(stencil[0])]], yhat[slot[half_flat(stencil[1])]],
                                               yhat[slot[half_flat(stencil[2])]], yhat[slot[half_flat(stencil[3])]]);
    out.values[k] += term;
  });
  for (std::size_t k = 0; k < count; ++k) out.flagged[k] = std::isnan(out.values[k]);
  return out;
}

struct DiffusionReport {
  std::vector<std::size_t> interior_shape;
  std::vector<double> true_sensor;
  std::vector<double> test_sensor;
  std::vector<bool> flagged;
  std::size_t flagged_nodes = 0;
  double mse = 0.0;  // NaN when every node is flagged
};

/// Mean over unflagged interior nodes of (staggered - true)^2.
inline DiffusionReport diffusion_mse(const StructuredGrid& grid, const BatchPredictor& predictor) {
  const InteriorField truth = grid.dims() == 1 ? true_sensor_1d(grid) : true_sensor_nd(grid);
  StaggeredField test = grid.dims() == 1 ? staggered_sensor_1d(grid, predictor) : staggered_sensor_nd(grid, predictor);

  DiffusionReport report;
  report.interior_shape = truth.shape;
  report.true_sensor = truth.values;
  report.test_sensor = std::move(test.values);
  report.flagged = std::move(test.flagged);
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < report.true_sensor.size(); ++k) {
    if (report.flagged[k]) {
      ++report.flagged_nodes;
      continue;
    }
    const double e = report.test_sensor[k] - report.true_sensor[k];
    sum += e * e;
    ++used;
  }
  report.mse = used > 0 ? sum / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
  return report;
}

}  // namespace lelu
