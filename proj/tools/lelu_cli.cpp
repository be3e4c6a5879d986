// Command-line front end: dataset generation, training runs, sweeps and the
// analysis tables.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lelu/experiments.hpp"
#include "lelu/plot.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kDiverged = 2, kIoError = 3 };

std::vector<std::size_t> parse_points(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v < 2) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw lelu::ConfigError("--points: '" + item + "' is not a count >= 2");
    }
  }
  if (out.empty()) throw lelu::ConfigError("--points is empty");
  return out;
}

lelu::RegressionDataset load_dataset_csv(const std::string& path) {
  try {
    return lelu::load_csv(path);
  } catch (const lelu::CsvError& e) {
    throw lelu::IoError(e.what());
  }
}

int cmd_generate(const std::string& kind, const std::string& points, double shift, const std::string& out) {
  lelu::DatasetSpec spec;
  try {
    spec.kind = lelu::dataset_kind_from_string(kind);
  } catch (const std::invalid_argument& e) {
    throw lelu::ConfigError(e.what());
  }
  if (spec.kind == lelu::DatasetKind::CsvFile) throw lelu::ConfigError("generate cannot produce the csv kind");
  spec.points = parse_points(points);
  spec.shift = shift;
  lelu::RegressionDataset ds;
  try {
    ds = lelu::make_dataset(spec);
  } catch (const std::invalid_argument& e) {
    throw lelu::ConfigError(e.what());
  }
  try {
    lelu::save_csv(ds, out);
  } catch (const lelu::CsvError& e) {
    throw lelu::IoError(e.what());
  }
  std::printf("wrote %zu points to %s\n", ds.grid.node_count(), out.c_str());
  return kOk;
}

int cmd_train(const std::string& config_path, std::size_t jobs) {
  const auto config = lelu::experiment_config_from_json(lelu::read_json_file(config_path));
  const auto result = lelu::run_experiment(config, jobs);
  bool diverged = false;
  for (const auto& r : result.runs) {
    std::printf("seed %llu: %s  training_mae=%s  diffusion_mse=%s  flagged=%zu  (%.1fs)\n",
                static_cast<unsigned long long>(r.seed), std::string(lelu::to_string(r.status)).c_str(),
                lelu::format_double(r.training_mae).c_str(), lelu::format_double(r.diffusion_mse).c_str(), r.flagged_nodes,
                r.wall_seconds);
    diverged = diverged || r.status == lelu::RunStatus::Diverged;
  }
  std::printf("median training_mae=%s  diffusion_mse=%s\n", lelu::format_double(result.median_training_mae).c_str(),
              lelu::format_double(result.median_diffusion_mse).c_str());
  return diverged ? kDiverged : kOk;
}

int cmd_sweep(const std::string& config_path, std::size_t jobs) {
  const auto sweep = lelu::sweep_config_from_json(lelu::read_json_file(config_path));
  const auto rows = lelu::run_sweep(sweep, jobs);
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.report.status != lelu::RunStatus::Ok;
  std::printf("%zu runs (%zu diverged); summary in %s\n", rows.size(), failed,
              (lelu::fs::path(sweep.base.output_dir) / "summary.csv").c_str());
  return kOk;
}

int cmd_diffusion(const std::string& checkpoint, const std::string& dataset, const std::string& out) {
  const lelu::Network net = lelu::load_checkpoint(checkpoint);
  lelu::RegressionDataset ds;
  try {
    ds = lelu::normalize(load_dataset_csv(dataset));
  } catch (const std::invalid_argument& e) {
    throw lelu::ConfigError(e.what());
  }
  if (ds.grid.dims() != net.spec.input_dim) throw lelu::ConfigError("dataset dimension does not match the checkpoint");
  const auto report = lelu::diffusion_mse(ds.grid, lelu::network_predictor(net));
  lelu::write_text_file(out, lelu::diffusion_report_csv(report));
  std::printf("diffusion_mse=%s  flagged=%zu\n", lelu::format_double(report.mse).c_str(), report.flagged_nodes);
  return kOk;
}

int cmd_flex_table(const std::string& out) {
  const auto rows = lelu::flexibility_table();
  const std::string csv = lelu::flexibility_table_csv(rows);
  lelu::write_text_file(out, csv);
  std::cout << csv;
  return kOk;
}

int cmd_neuron_study(const std::string& dataset, const std::string& out) {
  const auto ds = load_dataset_csv(dataset);
  if (ds.grid.dims() != 1 || ds.grid.node_count() != 3) throw lelu::ConfigError("neuron-study needs a 1D dataset with 3 points");
  std::vector<lelu::NeuronStudyRecord> records;
  for (const auto& act : lelu::neuron_study_activations())
    records.push_back(lelu::single_neuron_study(act, ds.grid.axes[0], ds.grid.values));
  lelu::write_text_file(out, lelu::neuron_study_csv(records));
  for (const auto& r : records) {
    std::printf("%-16s grad_norm=%-12s %-9s cond=%s\n", lelu::label(r.activation).c_str(),
                lelu::format_double(r.gradient_norm).c_str(), r.vanishing ? "vanishing" : "strong",
                lelu::format_double(r.condition_number).c_str());
  }
  return kOk;
}

int cmd_plot(const std::string& run, const std::vector<std::string>& slices, const std::string& out) {
  std::vector<lelu::SliceSpec> specs;
  for (const auto& s : slices) specs.push_back(lelu::parse_slice(s));
  for (const auto& p : lelu::plot_run(run, specs, out)) std::printf("wrote %s\n", p.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LELU regression lab: training, diffusion metric and activation studies"};
  app.require_subcommand(1);

  std::string kind, points, out, config, checkpoint, dataset, run;
  double shift = 2.0;
  std::size_t jobs = 1;
  std::vector<std::string> slices;

  auto* generate = app.add_subcommand("generate", "write a canonical dataset as CSV");
  generate->add_option("--dataset", kind, "tanh | exp | tanh_shifted | exp_shifted | motor_surrogate")->required();
  generate->add_option("--points", points, "n or n1,n2,n3")->required();
  generate->add_option("--shift", shift, "x offset for the shifted kinds");
  generate->add_option("--out", out, "output CSV")->required();

  auto* train = app.add_subcommand("train", "train every replicate of an experiment config");
  train->add_option("--config", config, "experiment JSON")->required();
  train->add_option("--jobs", jobs, "replicates trained concurrently")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "run a depth x width x activation grid");
  sweep->add_option("--config", config, "sweep JSON")->required();
  sweep->add_option("--jobs", jobs, "runs trained concurrently")->check(CLI::PositiveNumber);

  auto* diffusion = app.add_subcommand("diffusion", "diffusion report of a checkpoint on a dataset");
  diffusion->add_option("--checkpoint", checkpoint)->required();
  diffusion->add_option("--dataset", dataset, "CSV grid")->required();
  diffusion->add_option("--out", out, "report CSV")->required();

  auto* flex = app.add_subcommand("flex-table", "flexibility score of each activation");
  flex->add_option("--out", out)->required();

  auto* neuron = app.add_subcommand("neuron-study", "one-neuron gradient / Hessian study on a 3-point CSV");
  neuron->add_option("--dataset", dataset)->required();
  neuron->add_option("--out", out)->required();

  auto* plot = app.add_subcommand("plot", "SVG plots of a run, experiment or sweep directory");
  plot->add_option("--run", run)->required();
  plot->add_option("--slice", slices, "axis=value,... fixing all axes but one (3D runs)");
  plot->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*generate) return cmd_generate(kind, points, shift, out);
    if (*train) return cmd_train(config, jobs);
    if (*sweep) return cmd_sweep(config, jobs);
    if (*diffusion) return cmd_diffusion(checkpoint, dataset, out);
    if (*flex) return cmd_flex_table(out);
    if (*neuron) return cmd_neuron_study(dataset, out);
    if (*plot) return cmd_plot(run, slices, out);
  } catch (const lelu::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const lelu::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIoError;
  } catch (const lelu::TrainingDiverged& e) {
    std::cerr << e.what() << '\n';
    return kDiverged;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}
