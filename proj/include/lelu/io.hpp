#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lelu/datasets.hpp"
#include "lelu/diffusion.hpp"
#include "lelu/network.hpp"
#include "lelu/optim.hpp"

namespace lelu {

using json = nlohmann::json;

/// Malformed or inconsistent configuration / checkpoint content.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File-system failures (missing files, unwritable outputs).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// --- activation / network ---------------------------------------------------

inline json to_json(const ActivationSpec& a) {
  json j{{"kind", std::string(to_string(a.kind))}};
  if (has_shape_param(a.kind)) {
    j["param"] = a.param;
    j["trainable"] = a.trainable;
  }
  return j;
}

inline ActivationSpec activation_from_json(const json& j) {
  try {
    ActivationSpec a;
    a.kind = activation_kind_from_string(j.at("kind").get<std::string>());
    a.param = j.value("param", 0.0);
    a.trainable = j.value("trainable", false);
    validate(a);
    return a;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("activation: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("activation: ") + e.what());
  }
}

inline json to_json(const NetworkSpec& s) {
  return {{"input_dim", s.input_dim}, {"depth", s.depth}, {"width", s.width}, {"activation", to_json(s.activation)}};
}

inline NetworkSpec network_spec_from_json(const json& j) {
  try {
    NetworkSpec s;
    s.input_dim = j.value("input_dim", std::size_t{1});
    s.depth = j.at("depth").get<std::size_t>();
    s.width = j.at("width").get<std::size_t>();
    s.activation = activation_from_json(j.at("activation"));
    validate(s);
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("network: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("network: ") + e.what());
  }
}

namespace detail {

inline json row_major(const Eigen::MatrixXd& m) {
  json arr = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  return arr;
}

inline void fill_row_major(const json& arr, Eigen::Ref<Eigen::MatrixXd> m, const std::string& what) {
  if (!arr.is_array() || arr.size() != static_cast<std::size_t>(m.size())) {
    throw ConfigError("checkpoint: " + what + " has " + std::to_string(arr.size()) + " values, expected " +
                      std::to_string(m.size()));
  }
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = arr[k++].get<double>();
}

}  // namespace detail

inline constexpr const char* kCheckpointFormat = "lelu-checkpoint/1";

/// Network checkpoint: spec, row-major weights, biases and activation
/// parameters. Doubles are written in shortest round-trip form, so a save /
/// load cycle is bit-exact.
inline json checkpoint_to_json(const Network& net) {
  json layers = json::array();
  for (std::size_t l = 0; l < net.params.weights.size(); ++l) {
    layers.push_back({{"rows", net.params.weights[l].rows()},
                      {"cols", net.params.weights[l].cols()},
                      {"weights", detail::row_major(net.params.weights[l])},
                      {"bias", detail::row_major(net.params.biases[l])}});
  }
  json params = json::array();
  for (Eigen::Index l = 0; l < net.params.activation_params.size(); ++l) params.push_back(net.params.activation_params[l]);
  return {{"format", kCheckpointFormat},
          {"spec", to_json(net.spec)},
          {"layers", layers},
          {"output", {{"weights", detail::row_major(net.params.output_weight)}, {"bias", net.params.output_bias[0]}}},
          {"activation_params", params}};
}

inline Network checkpoint_from_json(const json& j) {
  try {
    if (j.value("format", std::string()) != kCheckpointFormat) throw ConfigError("checkpoint: unknown format tag");
    Network net = make_zero_network(network_spec_from_json(j.at("spec")));
    const json& layers = j.at("layers");
    if (layers.size() != net.spec.depth) throw ConfigError("checkpoint: layer count does not match depth");
    for (std::size_t l = 0; l < net.spec.depth; ++l) {
      detail::fill_row_major(layers[l].at("weights"), net.params.weights[l], "layer " + std::to_string(l) + " weights");
      detail::fill_row_major(layers[l].at("bias"), net.params.biases[l], "layer " + std::to_string(l) + " bias");
    }
    detail::fill_row_major(j.at("output").at("weights"), net.params.output_weight, "output weights");
    net.params.output_bias[0] = j.at("output").at("bias").get<double>();
    detail::fill_row_major(j.at("activation_params"), net.params.activation_params, "activation_params");
    net.check_shapes();
    return net;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const Network& net, const std::string& path) {
  write_text_file(path, checkpoint_to_json(net).dump(1) + "\n");
}

inline Network load_checkpoint(const std::string& path) { return checkpoint_from_json(read_json_file(path)); }

// --- training config ---------------------------------------------------------

inline json to_json(const TrainConfig& c) {
  json j{{"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"loss", std::string(to_string(c.loss))},
         {"lr",
          {{"initial", c.schedule.initial},
           {"min", c.schedule.minimum},
           {"factor", c.schedule.factor},
           {"patience", c.schedule.patience},
           {"cooldown", c.schedule.cooldown}}},
         {"seed", c.seed}};
  if (c.regularization.kind != RegularizationKind::None) {
    j["regularization"] = {{"kind", std::string(to_string(c.regularization.kind))}, {"strength", c.regularization.strength}};
  }
  return j;
}

inline TrainConfig train_config_from_json(const json& j) {
  try {
    TrainConfig c;
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.loss = loss_kind_from_string(j.value("loss", std::string("mae")));
    if (j.contains("lr")) {
      const json& lr = j.at("lr");
      c.schedule.initial = lr.value("initial", c.schedule.initial);
      c.schedule.minimum = lr.value("min", c.schedule.minimum);
      c.schedule.factor = lr.value("factor", c.schedule.factor);
      c.schedule.patience = lr.value("patience", c.schedule.patience);
      c.schedule.cooldown = lr.value("cooldown", c.schedule.cooldown);
    }
    if (j.contains("regularization") && !j.at("regularization").is_null()) {
      const json& r = j.at("regularization");
      c.regularization.kind = regularization_kind_from_string(r.value("kind", std::string("none")));
      c.regularization.strength = r.value("strength", 0.0);
    }
    c.seed = j.value("seed", std::uint64_t{0});
    validate(c);
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("training: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("training: ") + e.what());
  }
}

inline json to_json(const DatasetSpec& d) {
  json j{{"kind", std::string(to_string(d.kind))}, {"placement", std::string(to_string(d.placement))}};
  if (d.points.size() == 1) {
    j["points"] = d.points[0];
  } else {
    j["points"] = d.points;
  }
  if (d.kind == DatasetKind::TanhShifted1D || d.kind == DatasetKind::ExpShifted1D) j["shift"] = d.shift;
  if (d.kind == DatasetKind::CsvFile) j["path"] = d.path;
  if (d.power_exponent != 1.0) j["power_exponent"] = d.power_exponent;
  return j;
}

inline DatasetSpec dataset_spec_from_json(const json& j) {
  try {
    DatasetSpec d;
    d.kind = dataset_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("points")) {
      const json& p = j.at("points");
      d.points = p.is_array() ? p.get<std::vector<std::size_t>>() : std::vector<std::size_t>{p.get<std::size_t>()};
    } else if (d.kind == DatasetKind::MotorSurrogate3D) {
      d.points = {19, 15, 5};
    } else if (d.kind != DatasetKind::CsvFile) {
      throw ConfigError("dataset: 'points' is required");
    }
    for (std::size_t n : d.points) {
      if (n < 2) throw ConfigError("dataset: every dimension needs at least 2 points");
    }
    d.shift = j.value("shift", 2.0);
    d.path = j.value("path", std::string());
    if (d.kind == DatasetKind::CsvFile && d.path.empty()) throw ConfigError("dataset: csv kind needs 'path'");
    d.power_exponent = j.value("power_exponent", 1.0);
    d.placement = axis_placement_from_string(j.value("placement", std::string("zero_based")));
    return d;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
}

// --- CSV reports -------------------------------------------------------------

/// epoch,loss,learning_rate[,beta,beta_1..beta_n]; `beta` is the layer mean.
inline std::string history_csv(const TrainingHistory& history) {
  std::ostringstream out;
  const std::size_t layers = history.empty() ? 0 : history.front().activation_params.size();
  out << "epoch,loss,learning_rate";
  if (layers > 0) {
    out << ",beta";
    for (std::size_t l = 0; l < layers; ++l) out << ",beta_" << (l + 1);
  }
  out << '\n';
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.loss) << ',' << format_double(r.learning_rate);
    if (layers > 0) {
      double mean = 0.0;
      for (double b : r.activation_params) mean += b;
      out << ',' << format_double(mean / static_cast<double>(layers));
      for (double b : r.activation_params) out << ',' << format_double(b);
    }
    out << '\n';
  }
  return out.str();
}

/// Header comment lines carry the aggregate mse and flagged count, then one
/// row per interior node: i1[,i2,...],true_sensor,test_sensor,squared_error.
/// Indices refer to the full grid (interior nodes start at 1).
inline std::string diffusion_report_csv(const DiffusionReport& report) {
  std::ostringstream out;
  out << "# mse=" << format_double(report.mse) << '\n';
  out << "# flagged_nodes=" << report.flagged_nodes << '\n';
  const std::size_t dims = report.interior_shape.size();
  for (std::size_t d = 0; d < dims; ++d) out << 'i' << (d + 1) << ',';
  out << "true_sensor,test_sensor,squared_error\n";
  std::vector<std::size_t> idx(dims, 0);
  for (std::size_t k = 0; k < report.true_sensor.size(); ++k) {
    for (std::size_t d = 0; d < dims; ++d) out << (idx[d] + 1) << ',';
    const double e = report.test_sensor[k] - report.true_sensor[k];
    out << format_double(report.true_sensor[k]) << ',' << format_double(report.test_sensor[k]) << ','
        << (report.flagged[k] ? std::string("nan") : format_double(e * e)) << '\n';
    detail::next_index(idx, report.interior_shape);
  }
  return out.str();
}

}  // namespace lelu
