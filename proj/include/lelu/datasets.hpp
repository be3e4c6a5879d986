#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lelu/diffusion.hpp"
#include "lelu/optim.hpp"

namespace lelu {

enum class DatasetKind { Tanh1D, Exp1D, ExpShifted1D, TanhShifted1D, MotorSurrogate3D, CsvFile };

inline std::string_view to_string(DatasetKind kind) noexcept {
  switch (kind) {
    case DatasetKind::Tanh1D: return "tanh";
    case DatasetKind::Exp1D: return "exp";
    case DatasetKind::TanhShifted1D: return "tanh_shifted";
    case DatasetKind::ExpShifted1D: return "exp_shifted";
    case DatasetKind::MotorSurrogate3D: return "motor_surrogate";
    case DatasetKind::CsvFile: return "csv";
  }
  return "?";
}

inline DatasetKind dataset_kind_from_string(std::string_view name) {
  for (auto kind : {DatasetKind::Tanh1D, DatasetKind::Exp1D, DatasetKind::TanhShifted1D, DatasetKind::ExpShifted1D,
                    DatasetKind::MotorSurrogate3D, DatasetKind::CsvFile}) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown dataset kind '" + std::string(name) + "'");
}

/// How normalize() places each input axis once its spacing is 1.
enum class AxisPlacement {
  ZeroBased,   // node i -> i
  KeepOrigin,  // x -> x / spacing, so the sign of every coordinate is preserved
};

inline std::string_view to_string(AxisPlacement p) noexcept {
  return p == AxisPlacement::ZeroBased ? "zero_based" : "keep_origin";
}

inline AxisPlacement axis_placement_from_string(std::string_view name) {
  if (name == "zero_based") return AxisPlacement::ZeroBased;
  if (name == "keep_origin") return AxisPlacement::KeepOrigin;
  throw std::invalid_argument("unknown axis placement '" + std::string(name) + "'");
}

struct DatasetSpec {
  DatasetKind kind = DatasetKind::Tanh1D;
  std::vector<std::size_t> points{7};
  double shift = 2.0;
  std::string path;
  double power_exponent = 1.0;
  AxisPlacement placement = AxisPlacement::ZeroBased;
};

/// raw = offset + scale * normalized
struct AxisMap {
  double offset = 0.0;
  double scale = 1.0;
};

struct TargetTransform {
  enum class Kind { Shift, Power } kind = Kind::Shift;
  double value = 0.0;  // additive shift, or exponent
};

/// Affine input maps per axis plus the ordered target transforms applied
/// since the raw data was generated or loaded.
struct Normalization {
  std::vector<AxisMap> axes;
  std::vector<TargetTransform> targets;

  double raw_coordinate(std::size_t dim, double normalized) const {
    const AxisMap& m = axes.at(dim);
    return m.offset + m.scale * normalized;
  }

  /// Undoes every target transform, newest first.
  std::vector<double> raw_targets(std::vector<double> values) const {
    for (auto it = targets.rbegin(); it != targets.rend(); ++it) {
      for (double& v : values) v = it->kind == TargetTransform::Kind::Shift ? v - it->value : std::pow(v, 1.0 / it->value);
    }
    return values;
  }
};

struct RegressionDataset {
  StructuredGrid grid;
  Normalization normalization;
  std::string label;
};

inline Normalization identity_normalization(std::size_t dims) {
  return {std::vector<AxisMap>(dims), {}};
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = i + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

namespace detail {

template <class F>
RegressionDataset sample_1d(std::size_t n, double lo, double hi, F f, std::string label) {
  if (n < 2) throw std::invalid_argument("a 1D dataset needs at least 2 points");
  RegressionDataset ds;
  ds.grid.axes = {linspace(lo, hi, n)};
  for (double x : ds.grid.axes[0]) ds.grid.values.push_back(f(x));
  ds.normalization = identity_normalization(1);
  ds.label = std::move(label);
  return ds;
}

}  // namespace detail

/// f(x) = 0.5 + 0.5 tanh(5x) on n equally spaced points over [-1, 1].
inline RegressionDataset gen_tanh(std::size_t n_points) {
  return detail::sample_1d(n_points, -1.0, 1.0, [](double x) { return 0.5 + 0.5 * std::tanh(5.0 * x); }, "tanh");
}

/// f(x) = 0.1^x on n equally spaced points over [-1, 1].
inline RegressionDataset gen_exp(std::size_t n_points) {
  return detail::sample_1d(n_points, -1.0, 1.0, [](double x) { return std::pow(0.1, x); }, "exp");
}

/// Translates the input coordinates of a 1D dataset; targets are untouched.
inline RegressionDataset gen_shifted(RegressionDataset base, double shift) {
  if (base.grid.dims() != 1) throw std::invalid_argument("gen_shifted expects a one-dimensional dataset");
  if (shift != 0.0) {
    for (double& x : base.grid.axes[0]) x += shift;
    base.label += "_shifted";
  }
  return base;
}

inline constexpr std::size_t kMotorShape[3] = {19, 15, 5};

/// Synthetic stand-in for a 3D motor-efficiency map. Not real motor data.
///
/// Axes: p1 in [0, 36], p2 in [0, 14], p3 in [0, 1.6]; with u = p1/36,
/// v = p2/14, w = p3/1.6 the field is
///
///   y = 0.05 + (1 - e^{-3u}) (1 - e^{-8v}) + 0.4 u v (w - 0.5)
///       + 0.3 v exp(-((1 - u) / 0.1)^2)
///
/// The second term rises quickly along p1 and faster along p2, the third
/// is the p3 spread (zero on the u = 0 and v = 0 borders) and the last adds
/// a bump near the top of the p1 range. Since (1 - e^{-3u})(1 - e^{-8v}) >=
/// 0.95 u v > 0.2 u v, the field stays >= 0.05.
inline RegressionDataset gen_motor_surrogate(std::vector<std::size_t> shape = {19, 15, 5}) {
  if (shape.size() != 3) throw std::invalid_argument("motor surrogate shape needs three dimensions");
  for (std::size_t n : shape) {
    if (n < 3) throw std::invalid_argument("motor surrogate needs at least 3 points per dimension");
  }
  RegressionDataset ds;
  ds.grid.axes = {linspace(0.0, 36.0, shape[0]), linspace(0.0, 14.0, shape[1]), linspace(0.0, 1.6, shape[2])};
  ds.grid.values.reserve(shape[0] * shape[1] * shape[2]);
  for (std::size_t i = 0; i < shape[0]; ++i) {
    const double u = ds.grid.axes[0][i] / 36.0;
    for (std::size_t j = 0; j < shape[1]; ++j) {
      const double v = ds.grid.axes[1][j] / 14.0;
      for (std::size_t k = 0; k < shape[2]; ++k) {
        const double w = ds.grid.axes[2][k] / 1.6;
        const double bump = (1.0 - u) / 0.1;
        ds.grid.values.push_back(0.05 + (1.0 - std::exp(-3.0 * u)) * (1.0 - std::exp(-8.0 * v)) +
                                 0.4 * u * v * (w - 0.5) + 0.3 * v * std::exp(-bump * bump));
      }
    }
  }
  ds.normalization = identity_normalization(3);
  ds.label = "motor_surrogate (synthetic)";
  return ds;
}

inline constexpr double kTargetMargin = 1e-3;

/// Maps every axis to unit spacing and lifts the targets so their minimum is
/// at least `margin`. The applied maps are appended to the dataset record.
inline RegressionDataset normalize(RegressionDataset ds, AxisPlacement placement = AxisPlacement::ZeroBased,
                                   double margin = kTargetMargin) {
  validate_lattice(ds.grid, 2);
  if (ds.normalization.axes.size() != ds.grid.dims()) ds.normalization = identity_normalization(ds.grid.dims());

  for (std::size_t d = 0; d < ds.grid.dims(); ++d) {
    auto& axis = ds.grid.axes[d];
    const double h = ds.grid.spacing(d);
    const double first = axis.front();
    double start = 0.0;
    AxisMap step{first, h};
    if (placement == AxisPlacement::KeepOrigin) {
      start = first / h;
      const double nearest = std::round(start);
      if (std::abs(start - nearest) < kSpacingTolerance) start = nearest;
      step = {first - h * start, h};
    }
    for (std::size_t i = 0; i < axis.size(); ++i) axis[i] = start + static_cast<double>(i);
    AxisMap& rec = ds.normalization.axes[d];
    rec = {rec.offset + rec.scale * step.offset, rec.scale * step.scale};
  }

  const double lowest = *std::min_element(ds.grid.values.begin(), ds.grid.values.end());
  if (lowest < margin) {
    const double lift = margin - lowest;
    for (double& y : ds.grid.values) y = y - lowest + margin;
    ds.normalization.targets.push_back({TargetTransform::Kind::Shift, lift});
  }
  return ds;
}

/// y -> y^exponent on strictly positive targets.
inline RegressionDataset power_transform(RegressionDataset ds, double exponent) {
  if (!(exponent > 0.0)) throw std::invalid_argument("power exponent must be positive");
  require_positive(ds.grid);
  for (double& y : ds.grid.values) y = std::pow(y, exponent);
  ds.normalization.targets.push_back({TargetTransform::Kind::Power, exponent});
  return ds;
}

inline std::vector<double> inverse_power_transform(std::vector<double> predictions, double exponent) {
  for (double& y : predictions) y = std::pow(y, 1.0 / exponent);
  return predictions;
}

/// All lattice nodes as columns (dims x node_count), row-major order.
inline Eigen::MatrixXd lattice_points(const StructuredGrid& grid) {
  const std::size_t n = grid.node_count();
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(grid.dims()), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const auto idx = grid.unravel(k);
    for (std::size_t d = 0; d < grid.dims(); ++d) {
      pts(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) = grid.axes[d][idx[d]];
    }
  }
  return pts;
}

inline TrainingSet to_training_set(const StructuredGrid& grid) {
  TrainingSet set;
  set.inputs = lattice_points(grid);
  set.targets = Eigen::Map<const Eigen::VectorXd>(grid.values.data(), static_cast<Eigen::Index>(grid.values.size()));
  return set;
}

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes `x1,...,xd,y` rows in lattice row-major order with 17 significant digits.
inline void save_csv(const RegressionDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CsvError("cannot open '" + path + "' for writing");
  for (std::size_t d = 0; d < ds.grid.dims(); ++d) out << 'x' << (d + 1) << ',';
  out << "y\n";
  char buf[40];
  for (std::size_t k = 0; k < ds.grid.node_count(); ++k) {
    const auto idx = ds.grid.unravel(k);
    for (std::size_t d = 0; d < ds.grid.dims(); ++d) {
      std::snprintf(buf, sizeof buf, "%.17g,", ds.grid.axes[d][idx[d]]);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g\n", ds.grid.values[k]);
    out << buf;
  }
  if (!out) throw CsvError("failed writing '" + path + "'");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_double(const std::string& text, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
  if (used == 0 || used != text.size()) throw CsvError("line " + std::to_string(line_no) + ": '" + text + "' is not a number");
  return v;
}

}  // namespace detail

/// Reads a CSV holding one coordinate column per dimension plus a trailing
/// target column. The rows must cover a complete lattice exactly once.
inline RegressionDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) {
      header = detail::split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw CsvError("'" + path + "' is empty");
  if (header.size() < 2) throw CsvError("'" + path + "' needs at least one coordinate column and a target column");
  const std::size_t dims = header.size() - 1;

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw CsvError("line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) + " fields, expected " +
                     std::to_string(header.size()));
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(detail::parse_double(c, line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw CsvError("'" + path + "' has no data rows");

  RegressionDataset ds;
  ds.grid.axes.resize(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    auto& axis = ds.grid.axes[d];
    for (const auto& r : rows) axis.push_back(r[d]);
    std::sort(axis.begin(), axis.end());
    axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
  }
  const std::size_t nodes = ds.grid.node_count();
  std::vector<bool> seen(nodes, false);
  ds.grid.values.assign(nodes, 0.0);
  std::vector<std::size_t> idx(dims);
  for (const auto& r : rows) {
    for (std::size_t d = 0; d < dims; ++d) {
      const auto& axis = ds.grid.axes[d];
      idx[d] = static_cast<std::size_t>(std::lower_bound(axis.begin(), axis.end(), r[d]) - axis.begin());
    }
    const std::size_t flat = ds.grid.flat_index(idx);
    if (seen[flat]) {
      std::string where;
      for (std::size_t d = 0; d < dims; ++d) where += (d ? "," : "") + std::to_string(idx[d]);
      throw CsvError("duplicate lattice node (" + where + ") in '" + path + "'");
    }
    seen[flat] = true;
    ds.grid.values[flat] = r[dims];
  }
  for (std::size_t k = 0; k < nodes; ++k) {
    if (!seen[k]) {
      const auto missing = ds.grid.unravel(k);
      std::string where;
      for (std::size_t d = 0; d < dims; ++d) where += (d ? "," : "") + std::to_string(missing[d]);
      throw CsvError("incomplete lattice in '" + path + "': node (" + where + ") is missing");
    }
  }
  ds.normalization = identity_normalization(dims);
  ds.label = path;
  return ds;
}

/// Builds the raw (un-normalized) dataset a spec describes.
inline RegressionDataset make_dataset(const DatasetSpec& spec) {
  auto one_d_points = [&spec]() {
    if (spec.points.size() != 1) throw std::invalid_argument("1D datasets take a single point count");
    return spec.points[0];
  };
  switch (spec.kind) {
    case DatasetKind::Tanh1D: return gen_tanh(one_d_points());
    case DatasetKind::Exp1D: return gen_exp(one_d_points());
    case DatasetKind::TanhShifted1D: return gen_shifted(gen_tanh(one_d_points()), spec.shift);
    case DatasetKind::ExpShifted1D: return gen_shifted(gen_exp(one_d_points()), spec.shift);
    case DatasetKind::MotorSurrogate3D:
      return gen_motor_surrogate(spec.points.empty() ? std::vector<std::size_t>{19, 15, 5} : spec.points);
    case DatasetKind::CsvFile: return load_csv(spec.path);
  }
  throw std::invalid_argument("unhandled dataset kind");
}

/// Raw dataset, optional power transform, then normalization.
inline RegressionDataset prepare_dataset(const DatasetSpec& spec) {
  RegressionDataset ds = make_dataset(spec);
  if (spec.power_exponent != 1.0) ds = power_transform(std::move(ds), spec.power_exponent);
  return normalize(std::move(ds), spec.placement);
}

}  // namespace lelu
