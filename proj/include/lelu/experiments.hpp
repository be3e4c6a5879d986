#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Eigenvalues>

#include "lelu/activations.hpp"
#include "lelu/datasets.hpp"
#include "lelu/diffusion.hpp"
#include "lelu/io.hpp"
#include "lelu/network.hpp"
#include "lelu/optim.hpp"

namespace lelu {

namespace fs = std::filesystem;

// --- configuration -------------------------------------------------------------

struct ExperimentConfig {
  DatasetSpec dataset;
  NetworkSpec network;
  TrainConfig training;
  std::vector<std::uint64_t> seeds{0};  // one replicate per seed
  std::size_t dense_eval_points = 0;    // per axis; 0 picks 201 (1D) or 25 (nD)
  std::string output_dir = "runs";
};

inline std::size_t dense_points_per_axis(const ExperimentConfig& c, std::size_t dims) {
  if (c.dense_eval_points > 0) return c.dense_eval_points;
  return dims == 1 ? 201 : 25;
}

inline json to_json(const ExperimentConfig& c) {
  json j{{"dataset", to_json(c.dataset)},
         {"network", to_json(c.network)},
         {"training", to_json(c.training)},
         {"seeds", c.seeds},
         {"output_dir", c.output_dir}};
  if (c.dense_eval_points > 0) j["dense_eval_points"] = c.dense_eval_points;
  return j;
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  try {
    c.dataset = dataset_spec_from_json(j.at("dataset"));
    c.training = train_config_from_json(j.at("training"));
    json net = j.at("network");
    const std::size_t dims = c.dataset.kind == DatasetKind::CsvFile ? 0 : c.dataset.points.size();
    if (!net.contains("input_dim") && dims > 0) net["input_dim"] = dims;
    c.network = network_spec_from_json(net);
    if (dims > 0 && c.network.input_dim != dims) {
      throw ConfigError("network.input_dim (" + std::to_string(c.network.input_dim) + ") does not match dataset dimension (" +
                        std::to_string(dims) + ")");
    }
    if (j.contains("seeds")) {
      c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      if (j.contains("replicates") && j.at("replicates").get<std::size_t>() != c.seeds.size()) {
        throw ConfigError("replicates does not match the length of seeds");
      }
    } else {
      const std::size_t replicates = j.value("replicates", std::size_t{1});
      c.seeds.clear();
      for (std::size_t r = 0; r < replicates; ++r) c.seeds.push_back(c.training.seed + r);
    }
    c.dense_eval_points = j.value("dense_eval_points", std::size_t{0});
    c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.seeds.empty()) throw ConfigError("replicates must be >= 1");
  auto sorted = c.seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw ConfigError("seeds must be distinct");
  if (c.dense_eval_points == 1) throw ConfigError("dense_eval_points must be >= 2");
  return c;
}

/// Per-cell training overrides. Unset match fields match every cell; the
/// `training` object is merged (JSON merge patch) onto the template.
struct SweepOverride {
  std::optional<std::size_t> depth;
  std::optional<std::size_t> width;
  std::optional<ActivationKind> activation;
  json training_patch;

  bool matches(std::size_t d, std::size_t w, const ActivationSpec& a) const {
    return (!depth || *depth == d) && (!width || *width == w) && (!activation || *activation == a.kind);
  }
};

struct SweepConfig {
  ExperimentConfig base;
  std::vector<std::size_t> depths;
  std::vector<std::size_t> widths;
  std::vector<ActivationSpec> activations;
  std::vector<SweepOverride> overrides;
};

inline SweepConfig sweep_config_from_json(const json& j) {
  SweepConfig s;
  json base = j;
  if (!j.contains("sweep")) throw ConfigError("sweep config needs a 'sweep' object");
  const json sweep = j.at("sweep");
  base.erase("sweep");
  try {
    // The template network may omit depth/width; they come from the grid.
    if (base.contains("network")) {
      json& net = base["network"];
      if (!net.contains("depth")) net["depth"] = 1;
      if (!net.contains("width")) net["width"] = 1;
      if (!net.contains("activation")) net["activation"] = {{"kind", "lu"}};
    }
    s.base = experiment_config_from_json(base);
    s.depths = sweep.at("depths").get<std::vector<std::size_t>>();
    s.widths = sweep.at("widths").get<std::vector<std::size_t>>();
    for (const auto& a : sweep.at("activations")) s.activations.push_back(activation_from_json(a));
    for (const auto& o : sweep.value("overrides", json::array())) {
      SweepOverride ov;
      if (o.contains("depth")) ov.depth = o.at("depth").get<std::size_t>();
      if (o.contains("width")) ov.width = o.at("width").get<std::size_t>();
      if (o.contains("activation")) ov.activation = activation_kind_from_string(o.at("activation").get<std::string>());
      ov.training_patch = o.at("training");
      s.overrides.push_back(std::move(ov));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sweep: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("sweep: ") + e.what());
  }
  if (s.depths.empty() || s.widths.empty() || s.activations.empty()) {
    throw ConfigError("sweep: depths, widths and activations must be non-empty");
  }
  for (std::size_t d : s.depths)
    if (d < 1) throw ConfigError("sweep: depths must be >= 1");
  for (std::size_t w : s.widths)
    if (w < 1) throw ConfigError("sweep: widths must be >= 1");
  return s;
}

// --- single runs -----------------------------------------------------------------

enum class RunStatus { Ok, Diverged };

inline std::string_view to_string(RunStatus s) noexcept { return s == RunStatus::Ok ? "ok" : "diverged"; }

struct RunReport {
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::Ok;
  double training_mae = std::numeric_limits<double>::quiet_NaN();
  double diffusion_mse = std::numeric_limits<double>::quiet_NaN();
  std::size_t flagged_nodes = 0;
  std::size_t epochs_run = 0;
  double wall_seconds = 0.0;
  std::string run_dir;
  std::string history_path;
};

/// Everything except wall time, which is the only nondeterministic field.
inline json to_json(const RunReport& r) {
  const auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"seed", r.seed},
          {"status", std::string(to_string(r.status))},
          {"training_mae", num(r.training_mae)},
          {"diffusion_mse", num(r.diffusion_mse)},
          {"flagged_nodes", r.flagged_nodes},
          {"epochs_run", r.epochs_run},
          {"history", r.history_path.empty() ? std::string() : fs::path(r.history_path).filename().string()}};
}

inline BatchPredictor network_predictor(const Network& net) {
  return [&net](const Eigen::MatrixXd& points) { return predict_batch(net, points); };
}

/// Training MAE and diffusion report of a trained network on its (normalized)
/// training grid.
struct Evaluation {
  double training_mae = 0.0;
  DiffusionReport diffusion;
};

inline Evaluation evaluate_network(const Network& net, const StructuredGrid& grid) {
  Evaluation e;
  e.training_mae = evaluate_loss(net, to_training_set(grid), LossKind::MAE);
  e.diffusion = diffusion_mse(grid, network_predictor(net));
  return e;
}

/// x1..xd,prediction,x1_raw..xd_raw,prediction_raw on a dense lattice spanning
/// the training grid, `per_axis` points per axis.
inline std::string dense_prediction_csv(const Network& net, const RegressionDataset& ds, std::size_t per_axis) {
  const std::size_t dims = ds.grid.dims();
  StructuredGrid dense;
  for (std::size_t d = 0; d < dims; ++d) dense.axes.push_back(linspace(ds.grid.axes[d].front(), ds.grid.axes[d].back(), per_axis));
  dense.values.assign(dense.node_count(), 0.0);
  const Eigen::MatrixXd points = lattice_points(dense);
  const std::vector<double> pred = predict_batch(net, points);
  const std::vector<double> raw = ds.normalization.raw_targets(pred);

  std::ostringstream out;
  for (std::size_t d = 0; d < dims; ++d) out << 'x' << (d + 1) << ',';
  out << "prediction";
  for (std::size_t d = 0; d < dims; ++d) out << ",x" << (d + 1) << "_raw";
  out << ",prediction_raw\n";
  for (Eigen::Index k = 0; k < points.cols(); ++k) {
    for (std::size_t d = 0; d < dims; ++d) out << format_double(points(static_cast<Eigen::Index>(d), k)) << ',';
    out << format_double(pred[static_cast<std::size_t>(k)]);
    for (std::size_t d = 0; d < dims; ++d)
      out << ',' << format_double(ds.normalization.raw_coordinate(d, points(static_cast<Eigen::Index>(d), k)));
    out << ',' << format_double(raw[static_cast<std::size_t>(k)]) << '\n';
  }
  return out.str();
}

/// Trains one replicate and persists its artifacts into `run_dir`:
/// config.json (single seed), dataset.csv (normalized training grid),
/// checkpoint.json, history.csv, diffusion.csv, predictions.csv, report.json.
/// A diverged run writes config.json and report.json only.
inline RunReport run_replicate(const ExperimentConfig& config, const RegressionDataset& ds, std::uint64_t seed,
                               const fs::path& run_dir) {
  const auto start = std::chrono::steady_clock::now();
  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) throw IoError("cannot create '" + run_dir.string() + "': " + ec.message());

  ExperimentConfig single = config;
  single.seeds = {seed};
  single.training.seed = seed;
  single.output_dir = run_dir.string();
  write_text_file((run_dir / "config.json").string(), to_json(single).dump(2) + "\n");

  RunReport report;
  report.seed = seed;
  report.run_dir = run_dir.string();

  Network net = init_he_normal(config.network, seed);
  TrainingHistory history;
  try {
    history = fit(net, to_training_set(ds.grid), single.training);
  } catch (const TrainingDiverged& e) {
    report.status = RunStatus::Diverged;
    report.epochs_run = e.epoch() + 1;
  }

  if (report.status == RunStatus::Ok) {
    report.epochs_run = history.size();
    const Evaluation eval = evaluate_network(net, ds.grid);
    report.training_mae = eval.training_mae;
    report.diffusion_mse = eval.diffusion.mse;
    report.flagged_nodes = eval.diffusion.flagged_nodes;
    report.history_path = (run_dir / "history.csv").string();

    save_csv(ds, (run_dir / "dataset.csv").string());
    save_checkpoint(net, (run_dir / "checkpoint.json").string());
    write_text_file(report.history_path, history_csv(history));
    write_text_file((run_dir / "diffusion.csv").string(), diffusion_report_csv(eval.diffusion));
    write_text_file((run_dir / "predictions.csv").string(),
                    dense_prediction_csv(net, ds, dense_points_per_axis(config, ds.grid.dims())));
  }
  write_text_file((run_dir / "report.json").string(), to_json(report).dump(2) + "\n");
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// Re-evaluates a persisted run from checkpoint.json and dataset.csv.
inline Evaluation reevaluate_run(const fs::path& run_dir) {
  const Network net = load_checkpoint((run_dir / "checkpoint.json").string());
  RegressionDataset ds;
  try {
    ds = load_csv((run_dir / "dataset.csv").string());
  } catch (const CsvError& e) {
    throw IoError(e.what());
  }
  return evaluate_network(net, ds.grid);
}

/// Runs `count` independent tasks on at most `jobs` threads.
inline void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

inline double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct ExperimentResult {
  std::vector<RunReport> runs;
  double median_training_mae = 0.0;
  double median_diffusion_mse = 0.0;
};

inline std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

/// One replicate per seed under output_dir/seed_<s>, plus
/// output_dir/replicates.csv with per-seed rows and a trailing median row.
inline ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t jobs = 1) {
  RegressionDataset ds;
  try {
    ds = prepare_dataset(config.dataset);
  } catch (const CsvError& e) {
    throw IoError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
  if (ds.grid.dims() != config.network.input_dim) throw ConfigError("network.input_dim does not match the dataset");

  const fs::path root(config.output_dir);
  ExperimentResult result;
  result.runs.resize(config.seeds.size());
  parallel_for(config.seeds.size(), jobs, [&](std::size_t i) {
    result.runs[i] = run_replicate(config, ds, config.seeds[i], root / seed_dir_name(config.seeds[i]));
  });

  std::vector<double> maes, mses;
  std::ostringstream csv;
  csv << "seed,status,training_mae,diffusion_mse,flagged_nodes,epochs_run,wall_seconds\n";
  for (const auto& r : result.runs) {
    maes.push_back(r.training_mae);
    mses.push_back(r.diffusion_mse);
    csv << r.seed << ',' << to_string(r.status) << ',' << format_double(r.training_mae) << ','
        << format_double(r.diffusion_mse) << ',' << r.flagged_nodes << ',' << r.epochs_run << ','
        << format_double(r.wall_seconds) << '\n';
  }
  result.median_training_mae = median(maes);
  result.median_diffusion_mse = median(mses);
  csv << "median,," << format_double(result.median_training_mae) << ',' << format_double(result.median_diffusion_mse)
      << ",,,\n";
  write_text_file((root / "replicates.csv").string(), csv.str());
  return result;
}

// --- sweeps ------------------------------------------------------------------------

struct SweepCell {
  std::size_t depth = 0;
  std::size_t width = 0;
  ActivationSpec activation;
  double size_index = 0.0;  // width^depth / 1e12
};

struct SweepRow {
  SweepCell cell;
  RunReport report;
};

inline std::string cell_dir_name(const SweepCell& c) {
  std::string act = label(c.activation);
  for (char& ch : act)
    if (ch == '(' || ch == ')' || ch == '=') ch = '_';
  act.erase(std::remove(act.begin(), act.end(), ' '), act.end());
  while (!act.empty() && act.back() == '_') act.pop_back();
  return "d" + std::to_string(c.depth) + "_w" + std::to_string(c.width) + "_" + act;
}

/// The experiment config of one sweep cell, with overrides applied in order.
inline ExperimentConfig cell_config(const SweepConfig& sweep, const SweepCell& cell) {
  ExperimentConfig c = sweep.base;
  c.network.depth = cell.depth;
  c.network.width = cell.width;
  c.network.activation = cell.activation;
  json training = to_json(c.training);
  for (const auto& o : sweep.overrides) {
    if (o.matches(cell.depth, cell.width, cell.activation)) training.merge_patch(o.training_patch);
  }
  c.training = train_config_from_json(training);
  c.output_dir = (fs::path(sweep.base.output_dir) / cell_dir_name(cell)).string();
  return c;
}

inline std::vector<SweepCell> sweep_cells(const SweepConfig& sweep) {
  std::vector<SweepCell> cells;
  for (std::size_t d : sweep.depths)
    for (std::size_t w : sweep.widths)
      for (const auto& a : sweep.activations)
        cells.push_back({d, w, a, std::pow(static_cast<double>(w), static_cast<double>(d)) / 1e12});
  return cells;
}

inline std::string sweep_summary_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "depth,width,activation,size_index,seed,status,training_mae,diffusion_mse,flagged_nodes,epochs_run,wall_seconds\n";
  for (const auto& r : rows) {
    out << r.cell.depth << ',' << r.cell.width << ',' << label(r.cell.activation) << ',' << format_double(r.cell.size_index)
        << ',' << r.report.seed << ',' << to_string(r.report.status) << ',' << format_double(r.report.training_mae) << ','
        << format_double(r.report.diffusion_mse) << ',' << r.report.flagged_nodes << ',' << r.report.epochs_run << ','
        << format_double(r.report.wall_seconds) << '\n';
  }
  return out.str();
}

/// Cartesian product of depths x widths x activations, one run per cell and
/// seed. Writes summary.csv (sorted by size index) and the two scatter files
/// scatter_mae.csv / scatter_diffusion.csv under the template output_dir.
/// Diverged runs are kept with status "diverged".
inline std::vector<SweepRow> run_sweep(const SweepConfig& sweep, std::size_t jobs = 1) {
  RegressionDataset ds;
  try {
    ds = prepare_dataset(sweep.base.dataset);
  } catch (const CsvError& e) {
    throw IoError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
  struct Task {
    SweepCell cell;
    ExperimentConfig config;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const auto& cell : sweep_cells(sweep)) {
    const ExperimentConfig c = cell_config(sweep, cell);
    for (std::uint64_t seed : c.seeds) tasks.push_back({cell, c, seed});
  }

  std::vector<SweepRow> rows(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    const Task& t = tasks[i];
    rows[i] = {t.cell, run_replicate(t.config, ds, t.seed, fs::path(t.config.output_dir) / seed_dir_name(t.seed))};
  });
  std::stable_sort(rows.begin(), rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.cell.size_index < b.cell.size_index; });

  const fs::path root(sweep.base.output_dir);
  write_text_file((root / "summary.csv").string(), sweep_summary_csv(rows));
  std::ostringstream mae, diff;
  mae << "size_index,activation,training_mae\n";
  diff << "size_index,activation,diffusion_mse\n";
  for (const auto& r : rows) {
    if (r.report.status != RunStatus::Ok) continue;
    mae << format_double(r.cell.size_index) << ',' << label(r.cell.activation) << ',' << format_double(r.report.training_mae)
        << '\n';
    diff << format_double(r.cell.size_index) << ',' << label(r.cell.activation) << ','
         << format_double(r.report.diffusion_mse) << '\n';
  }
  write_text_file((root / "scatter_mae.csv").string(), mae.str());
  write_text_file((root / "scatter_diffusion.csv").string(), diff.str());
  return rows;
}

// --- flexibility table -----------------------------------------------------------

inline std::vector<ActivationSpec> flexibility_table_activations() {
  std::vector<ActivationSpec> out{ActivationSpec::plain(ActivationKind::LU),  ActivationSpec::plain(ActivationKind::Tanh),
                                  ActivationSpec::plain(ActivationKind::ReLU), ActivationSpec::plain(ActivationKind::ELU),
                                  ActivationSpec::plain(ActivationKind::SiLU), ActivationSpec::plain(ActivationKind::Softplus)};
  for (double a : {0.2, 0.3, 0.4, 0.6}) out.push_back(ActivationSpec::leaky_relu(a));
  for (double b : {0.2, 0.3, 0.4, 0.6}) out.push_back(ActivationSpec::lelu(b));
  return out;
}

struct FlexibilityRow {
  ActivationSpec activation;
  FlexibilityScore score;
};

inline std::vector<FlexibilityRow> flexibility_table() {
  std::vector<FlexibilityRow> rows;
  for (const auto& a : flexibility_table_activations()) rows.push_back({a, flexibility_score(a)});
  return rows;
}

inline std::string flexibility_table_csv(const std::vector<FlexibilityRow>& rows) {
  std::ostringstream out;
  out << "activation,kind,param,eta,min_slope,max_slope\n";
  for (const auto& r : rows) {
    out << label(r.activation) << ',' << to_string(r.activation.kind) << ','
        << (has_shape_param(r.activation.kind) ? format_double(r.activation.param) : std::string()) << ','
        << format_double(r.score.eta) << ',' << format_double(r.score.min_slope) << ',' << format_double(r.score.max_slope)
        << '\n';
  }
  return out.str();
}

// --- single-neuron study ---------------------------------------------------------

/// y(x) = a * phi(w x + b) + c; parameters ordered (w, b, a, c).
struct NeuronParams {
  double w = 0.0, b = 0.0, a = 0.0, c = 0.0;

  Eigen::Vector4d vec() const { return {w, b, a, c}; }
  static NeuronParams from(const Eigen::Vector4d& v) { return {v[0], v[1], v[2], v[3]}; }
};

struct NeuronStudyConfig {
  double grid_lo = -10.0;
  double grid_hi = 10.0;
  std::size_t grid_points = 201;  // per inner parameter
  double fd_step = 1e-5;
  double vanishing_threshold = 1e-3;
};

struct NeuronStudyRecord {
  ActivationSpec activation;
  bool found = false;
  NeuronParams params;
  double middle_error = std::numeric_limits<double>::quiet_NaN();
  double outer_residual = std::numeric_limits<double>::quiet_NaN();  // max over the two outer points
  double max_outer_residual_any = 0.0;  // over every non-skipped candidate
  std::size_t candidates = 0;
  std::size_t skipped = 0;
  double loss = 0.0;
  Eigen::Vector4d gradient = Eigen::Vector4d::Zero();
  double gradient_norm = 0.0;
  double gradient_richardson_gap = 0.0;  // max |g(h) - g(2h)|
  Eigen::Matrix4d hessian = Eigen::Matrix4d::Zero();
  double hessian_richardson_gap = 0.0;
  double condition_number = std::numeric_limits<double>::quiet_NaN();
  bool vanishing = false;
};

inline double neuron_output(const ActivationSpec& act, const NeuronParams& p, double x) {
  return p.a * eval(act, p.w * x + p.b) + p.c;
}

/// Mean squared error over the points.
inline double neuron_loss(const ActivationSpec& act, const NeuronParams& p, const std::vector<double>& xs,
                          const std::vector<double>& ys) {
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = neuron_output(act, p, xs[i]) - ys[i];
    s += e * e;
  }
  return s / static_cast<double>(xs.size());
}

namespace detail {

inline Eigen::Vector4d fd_gradient(const std::function<double(const Eigen::Vector4d&)>& f, const Eigen::Vector4d& x,
                                   double h) {
  Eigen::Vector4d g;
  for (int i = 0; i < 4; ++i) {
    Eigen::Vector4d up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    g[i] = (f(up) - f(dn)) / (2.0 * h);
  }
  return g;
}

inline Eigen::Matrix4d fd_hessian(const std::function<double(const Eigen::Vector4d&)>& f, const Eigen::Vector4d& x,
                                  double h) {
  Eigen::Matrix4d H;
  const double f0 = f(x);
  for (int i = 0; i < 4; ++i) {
    Eigen::Vector4d up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    H(i, i) = (f(up) - 2.0 * f0 + f(dn)) / (h * h);
    for (int j = i + 1; j < 4; ++j) {
      Eigen::Vector4d pp = x, pm = x, mp = x, mm = x;
      pp[i] += h, pp[j] += h;
      pm[i] += h, pm[j] -= h;
      mp[i] -= h, mp[j] += h;
      mm[i] -= h, mm[j] -= h;
      H(i, j) = H(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
    }
  }
  return H;
}

}  // namespace detail

/// Candidates whose outer activations differ by less than this (relative)
/// are treated as singular: the solved output weight would blow up and the
/// interpolation loses its last digits.
inline constexpr double kNearSingular = 1e-4;

/// Fits the outer points exactly for each (w, b) grid candidate, keeps the
/// one with the smallest middle-point error, then differentiates the MSE
/// loss at that point. xs must hold exactly three points.
inline NeuronStudyRecord single_neuron_study(const ActivationSpec& act, const std::vector<double>& xs,
                                             const std::vector<double>& ys, const NeuronStudyConfig& cfg = {}) {
  if (xs.size() != 3 || ys.size() != 3) throw std::invalid_argument("single_neuron_study needs exactly 3 points");
  validate(act);
  NeuronStudyRecord rec;
  rec.activation = act;
  const std::vector<double> grid = linspace(cfg.grid_lo, cfg.grid_hi, cfg.grid_points);
  double best = std::numeric_limits<double>::infinity();
  for (double w : grid) {
    for (double b : grid) {
      ++rec.candidates;
      const double h0 = eval(act, w * xs[0] + b);
      const double h2 = eval(act, w * xs[2] + b);
      const double det = h0 - h2;
      if (!(std::abs(det) > kNearSingular * std::max({1.0, std::abs(h0), std::abs(h2)}))) {
        ++rec.skipped;
        continue;
      }
      NeuronParams p{w, b, (ys[0] - ys[2]) / det, 0.0};
      p.c = ys[0] - p.a * h0;
      const double residual =
          std::max(std::abs(neuron_output(act, p, xs[0]) - ys[0]), std::abs(neuron_output(act, p, xs[2]) - ys[2]));
      rec.max_outer_residual_any = std::max(rec.max_outer_residual_any, residual);
      const double middle = neuron_output(act, p, xs[1]) - ys[1];
      if (std::abs(middle) < best) {
        best = std::abs(middle);
        rec.found = true;
        rec.params = p;
        rec.middle_error = middle;
        rec.outer_residual = residual;
      }
    }
  }
  if (!rec.found) return rec;

  const auto loss = [&](const Eigen::Vector4d& v) { return neuron_loss(act, NeuronParams::from(v), xs, ys); };
  const Eigen::Vector4d x0 = rec.params.vec();
  const double h = cfg.fd_step;
  rec.loss = loss(x0);
  rec.gradient = detail::fd_gradient(loss, x0, h);
  rec.gradient_richardson_gap = (rec.gradient - detail::fd_gradient(loss, x0, 2.0 * h)).cwiseAbs().maxCoeff();
  rec.gradient_norm = rec.gradient.norm();
  rec.hessian = detail::fd_hessian(loss, x0, h);
  rec.hessian_richardson_gap = (rec.hessian - detail::fd_hessian(loss, x0, 2.0 * h)).cwiseAbs().maxCoeff();

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(rec.hessian, Eigen::EigenvaluesOnly);
  const Eigen::Vector4d mag = eig.eigenvalues().cwiseAbs();
  rec.condition_number = mag.minCoeff() > 0.0 ? mag.maxCoeff() / mag.minCoeff() : std::numeric_limits<double>::infinity();
  rec.vanishing = rec.gradient_norm < cfg.vanishing_threshold;
  return rec;
}

inline std::vector<ActivationSpec> neuron_study_activations() {
  return {ActivationSpec::plain(ActivationKind::LU),   ActivationSpec::plain(ActivationKind::Tanh),
          ActivationSpec::plain(ActivationKind::ReLU), ActivationSpec::leaky_relu(0.2),
          ActivationSpec::plain(ActivationKind::ELU),  ActivationSpec::plain(ActivationKind::SiLU),
          ActivationSpec::plain(ActivationKind::Softplus), ActivationSpec::lelu(0.2),
          ActivationSpec::lelu(0.3),                   ActivationSpec::lelu(0.4),
          ActivationSpec::lelu(0.6)};
}

inline std::string neuron_study_csv(const std::vector<NeuronStudyRecord>& records) {
  std::ostringstream out;
  out << "activation,found,w,b,a,c,middle_error,outer_residual,loss,grad_w,grad_b,grad_a,grad_c,gradient_norm,"
         "gradient_class,condition_number,h_ww,h_wb,h_wa,h_wc,h_bb,h_ba,h_bc,h_aa,h_ac,h_cc\n";
  for (const auto& r : records) {
    out << label(r.activation) << ',' << (r.found ? 1 : 0);
    if (!r.found) {
      out << '\n';
      continue;
    }
    out << ',' << format_double(r.params.w) << ',' << format_double(r.params.b) << ',' << format_double(r.params.a) << ','
        << format_double(r.params.c) << ',' << format_double(r.middle_error) << ',' << format_double(r.outer_residual)
        << ',' << format_double(r.loss);
    for (int i = 0; i < 4; ++i) out << ',' << format_double(r.gradient[i]);
    out << ',' << format_double(r.gradient_norm) << ',' << (r.vanishing ? "vanishing" : "strong") << ','
        << format_double(r.condition_number);
    for (int i = 0; i < 4; ++i)
      for (int j = i; j < 4; ++j) out << ',' << format_double(r.hessian(i, j));
    out << '\n';
  }
  return out.str();
}

}  // namespace lelu
