#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "lelu/datasets.hpp"
#include "lelu/experiments.hpp"
#include "lelu/io.hpp"
#include "lelu/network.hpp"

namespace lelu {

// Minimal SVG charts: line/marker series on linear or log axes.

struct Series {
  std::string name;
  std::vector<double> xs;
  std::vector<double> ys;
  bool line = false;
  bool markers = true;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
};

namespace detail {

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt(double v, const char* spec = "%.2f") {
  char buf[32];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

struct AxisRange {
  double lo = 0.0, hi = 1.0;
  bool log = false;

  double map(double v) const { return log ? std::log10(v) : v; }
  double frac(double v) const { return (map(v) - lo) / (hi - lo); }
};

inline AxisRange make_range(const std::vector<const std::vector<double>*>& data, bool log) {
  AxisRange r;
  r.log = log;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* v : data) {
    for (double x : *v) {
      if (!std::isfinite(x) || (log && x <= 0.0)) continue;
      lo = std::min(lo, r.map(x));
      hi = std::max(hi, r.map(x));
    }
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  const double pad = 0.05 * (hi - lo);
  r.lo = lo - pad;
  r.hi = hi + pad;
  return r;
}

}  // namespace detail

inline std::string render_svg(const Chart& chart) {
  const double W = 640, H = 420, left = 70, right = 150, top = 40, bottom = 55;
  const double pw = W - left - right, ph = H - top - bottom;
  std::vector<const std::vector<double>*> xs, ys;
  for (const auto& s : chart.series) xs.push_back(&s.xs), ys.push_back(&s.ys);
  const auto rx = detail::make_range(xs, chart.log_x);
  const auto ry = detail::make_range(ys, chart.log_y);
  const auto px = [&](double v) { return left + rx.frac(v) * pw; };
  const auto py = [&](double v) { return top + (1.0 - ry.frac(v)) * ph; };
  const auto usable = [](double v, bool log) { return std::isfinite(v) && (!log || v > 0.0); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\""
    << " font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << detail::xml_escape(chart.title)
    << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int t = 0; t <= 4; ++t) {
    const double fx = t / 4.0;
    const double vx = rx.lo + fx * (rx.hi - rx.lo), vy = ry.lo + fx * (ry.hi - ry.lo);
    const std::string lx = rx.log ? "1e" + detail::fmt(vx, "%.1f") : detail::fmt(vx, "%.3g");
    const std::string ly = ry.log ? "1e" + detail::fmt(vy, "%.1f") : detail::fmt(vy, "%.3g");
    o << "<text x=\"" << left + fx * pw << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << lx << "</text>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << top + (1 - fx) * ph + 4 << "\" text-anchor=\"end\">" << ly << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
    << detail::xml_escape(chart.x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << top + ph / 2
    << ")\">" << detail::xml_escape(chart.y_label) << "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const Series& s = chart.series[k];
    const char* color = detail::kPalette[k % std::size(detail::kPalette)];
    o << "<g class=\"series\" data-name=\"" << detail::xml_escape(s.name) << "\">\n";
    if (s.line) {
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.xs.size(); ++i) {
        if (usable(s.xs[i], rx.log) && usable(s.ys[i], ry.log))
          o << detail::fmt(px(s.xs[i])) << ',' << detail::fmt(py(s.ys[i])) << ' ';
      }
      o << "\"/>\n";
    }
    if (s.markers) {
      for (std::size_t i = 0; i < s.xs.size(); ++i) {
        if (!usable(s.xs[i], rx.log) || !usable(s.ys[i], ry.log)) continue;
        o << "<circle cx=\"" << detail::fmt(px(s.xs[i])) << "\" cy=\"" << detail::fmt(py(s.ys[i])) << "\" r=\"3.5\" fill=\""
          << color << "\"/>\n";
      }
    }
    o << "</g>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    o << "<rect x=\"" << left + pw + 12 << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"10\" fill=\"" << color << "\"/>\n";
    o << "<text x=\"" << left + pw + 30 << "\" y=\"" << ly << "\">" << detail::xml_escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

// --- run artifacts -----------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IoError("CSV column '" + name + "' missing");
    return static_cast<std::size_t>(it - header.begin());
  }
  std::vector<double> numbers(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(c < r.size() && !r[c].empty() ? std::strtod(r[c].c_str(), nullptr) : NAN);
    return out;
  }
};

/// Comment lines (#) and blank lines are skipped; the first row is the header.
inline CsvTable read_csv_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing artifact '" + path.string() + "'");
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = detail::split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

/// Fixed coordinates of a slice, keyed by 0-based axis; exactly one axis is
/// left free and varies along the plot.
struct SliceSpec {
  std::map<std::size_t, double> fixed;
};

/// Parses "x2=7,x3=2" (or "2=7,3=2"); axes are 1-based in the text.
inline SliceSpec parse_slice(const std::string& text) {
  SliceSpec s;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("slice '" + text + "': expected axis=value");
    std::string axis = item.substr(0, eq);
    if (!axis.empty() && (axis[0] == 'x' || axis[0] == 'p')) axis.erase(0, 1);
    try {
      const std::size_t a = std::stoul(axis);
      if (a < 1) throw ConfigError("slice axes are 1-based");
      s.fixed[a - 1] = std::stod(item.substr(eq + 1));
    } catch (const std::logic_error&) {
      throw ConfigError("slice '" + text + "': cannot parse '" + item + "'");
    }
  }
  return s;
}

inline std::size_t free_axis(const SliceSpec& s, std::size_t dims) {
  std::size_t free = dims;
  for (std::size_t d = 0; d < dims; ++d) {
    if (s.fixed.count(d)) continue;
    if (free != dims) throw ConfigError("slice must fix every axis but one");
    free = d;
  }
  for (const auto& [axis, value] : s.fixed)
    if (axis >= dims) throw ConfigError("slice axis " + std::to_string(axis + 1) + " out of range");
  if (free == dims) throw ConfigError("slice must leave one axis free");
  return free;
}

/// One slice per axis: that axis free, the others at their middle node.
inline std::vector<SliceSpec> default_slices(const StructuredGrid& grid) {
  std::vector<SliceSpec> out;
  for (std::size_t f = 0; f < grid.dims(); ++f) {
    SliceSpec s;
    for (std::size_t d = 0; d < grid.dims(); ++d)
      if (d != f) s.fixed[d] = grid.axes[d][grid.axes[d].size() / 2];
    out.push_back(s);
  }
  return out;
}

inline std::vector<fs::path> plot_single_run(const fs::path& run_dir, const std::vector<SliceSpec>& slices,
                                             const fs::path& out_dir) {
  const CsvTable data = read_csv_table(run_dir / "dataset.csv");
  const std::size_t dims = data.header.size() - 1;
  std::vector<fs::path> written;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "'");

  if (dims == 1) {
    const CsvTable pred = read_csv_table(run_dir / "predictions.csv");
    Chart chart{"prediction: " + run_dir.filename().string(), "x (normalized)", "y (normalized)", false, false, {}};
    chart.series.push_back({"network", pred.numbers("x1"), pred.numbers("prediction"), true, false});
    chart.series.push_back({"training points", data.numbers("x1"), data.numbers("y"), false, true});
    const fs::path path = out_dir / "prediction.svg";
    write_text_file(path.string(), render_svg(chart));
    written.push_back(path);
    return written;
  }

  const Network net = load_checkpoint((run_dir / "checkpoint.json").string());
  RegressionDataset ds;
  try {
    ds = load_csv((run_dir / "dataset.csv").string());
  } catch (const CsvError& e) {
    throw IoError(e.what());
  }
  const auto& grid = ds.grid;
  const std::vector<SliceSpec> specs = slices.empty() ? default_slices(grid) : slices;
  for (const auto& s : specs) {
    const std::size_t f = free_axis(s, dims);
    const std::vector<double> line = linspace(grid.axes[f].front(), grid.axes[f].back(), 201);
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(dims), static_cast<Eigen::Index>(line.size()));
    for (std::size_t i = 0; i < line.size(); ++i)
      for (std::size_t d = 0; d < dims; ++d)
        pts(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) = d == f ? line[i] : s.fixed.at(d);

    Series train{"training points", {}, {}, false, true};
    for (std::size_t k = 0; k < grid.node_count(); ++k) {
      const auto idx = grid.unravel(k);
      bool on = true;
      for (const auto& [axis, value] : s.fixed) on = on && std::abs(grid.axes[axis][idx[axis]] - value) < 1e-9;
      if (!on) continue;
      train.xs.push_back(grid.axes[f][idx[f]]);
      train.ys.push_back(grid.values[k]);
    }

    std::string name = "slice_x" + std::to_string(f + 1);
    std::string title = "x" + std::to_string(f + 1) + " slice at";
    for (const auto& [axis, value] : s.fixed) {
      name += "_x" + std::to_string(axis + 1) + "=" + format_double(value);
      title += " x" + std::to_string(axis + 1) + "=" + format_double(value);
    }
    Chart chart{title, "x" + std::to_string(f + 1) + " (normalized)", "y (normalized)", false, false, {}};
    chart.series.push_back({"network", line, predict_batch(net, pts), true, false});
    chart.series.push_back(std::move(train));
    const fs::path path = out_dir / (name + ".svg");
    write_text_file(path.string(), render_svg(chart));
    written.push_back(path);
  }
  return written;
}

inline std::vector<fs::path> plot_sweep(const fs::path& sweep_dir, const fs::path& out_dir) {
  std::vector<fs::path> written;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "'");
  for (const auto& [file, metric, ylabel] :
       {std::tuple{"scatter_mae.csv", "training_mae", "training MAE"},
        std::tuple{"scatter_diffusion.csv", "diffusion_mse", "diffusion MSE"}}) {
    const CsvTable t = read_csv_table(sweep_dir / file);
    const std::size_t act = t.column("activation");
    const auto xs = t.numbers("size_index");
    const auto ys = t.numbers(metric);
    std::vector<Series> series;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const std::string& name = t.rows[i][act];
      auto it = std::find_if(series.begin(), series.end(), [&](const Series& s) { return s.name == name; });
      if (it == series.end()) it = series.insert(series.end(), Series{name, {}, {}, false, true});
      it->xs.push_back(xs[i]);
      it->ys.push_back(ys[i]);
    }
    Chart chart{std::string(ylabel) + " vs size index", "width^depth / 1e12", ylabel, true, true, std::move(series)};
    const fs::path path = out_dir / (std::string(metric) + ".svg");
    write_text_file(path.string(), render_svg(chart));
    written.push_back(path);
  }
  return written;
}

/// Dispatches on the artifacts found in `dir`: a sweep root (summary.csv),
/// a single run (checkpoint.json), or an experiment root (seed_* dirs).
inline std::vector<fs::path> plot_run(const fs::path& dir, const std::vector<SliceSpec>& slices, const fs::path& out_dir) {
  if (fs::exists(dir / "summary.csv")) return plot_sweep(dir, out_dir);
  if (fs::exists(dir / "checkpoint.json")) return plot_single_run(dir, slices, out_dir);
  std::vector<fs::path> written;
  if (fs::is_directory(dir)) {
    std::vector<fs::path> seeds;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory() && fs::exists(e.path() / "checkpoint.json")) seeds.push_back(e.path());
    std::sort(seeds.begin(), seeds.end());
    for (const auto& s : seeds) {
      auto w = plot_single_run(s, slices, out_dir / s.filename());
      written.insert(written.end(), w.begin(), w.end());
    }
  }
  if (written.empty()) throw IoError("no run artifacts under '" + dir.string() + "'");
  return written;
}

}  // namespace lelu
