// Acceptance suite: one PASS/FAIL line per criterion. The long full-protocol
// check (criterion 7) only runs with --full.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lelu/experiments.hpp"

namespace {

using namespace lelu;

struct Outcome {
  bool pass = false;
  std::string detail;
  bool skipped = false;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

fs::path g_root;

// --- 1 ----------------------------------------------------------------------------

Outcome flexibility() {
  const auto start = std::chrono::steady_clock::now();
  const auto rows = flexibility_table();
  bool ok = true;
  std::string detail;
  double silu = 0.0;
  for (const auto& r : rows) {
    const auto k = r.activation.kind;
    double want = 1.0;
    if (k == ActivationKind::LU) want = 0.0;
    if (k == ActivationKind::LeakyReLU || k == ActivationKind::LELU) want = 1.0 - r.activation.param;
    if (k == ActivationKind::SiLU) {
      silu = r.score.eta;
      ok = ok && std::abs(silu - 1.1) <= 0.01;
      continue;
    }
    if (r.score.eta != want) {
      ok = false;
      detail += label(r.activation) + "=" + format_double(r.score.eta) + " ";
    }
  }
  for (double p : {0.2, 0.3, 0.4, 0.6}) {
    ok = ok && flexibility_score(ActivationSpec::leaky_relu(p)).eta == 1.0 - p;
    ok = ok && flexibility_score(ActivationSpec::lelu(p)).eta == 1.0 - p;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ok = ok && secs < 1.0;
  return {ok, detail + "eta(SiLU)=" + format_double(silu) + ", " + std::to_string(rows.size()) + " rows in " +
                  sci(secs) + " s"};
}

// --- 2 ----------------------------------------------------------------------------

Outcome lelu_smoothness() {
  bool ok = true;
  double worst_below = 0.0, worst_above = 0.0;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> x_dist(-50.0, 50.0);
  for (double beta : {0.0, 0.2, 0.3, 0.4, 0.6, 0.99}) {
    const auto a = ActivationSpec::lelu(beta);
    // Both branch formulas evaluated at the origin.
    const double left_value = std::expm1((1.0 - beta) * 0.0) + beta * 0.0;
    const double left_slope = (1.0 - beta) * std::exp((1.0 - beta) * 0.0) + beta;
    ok = ok && left_value == 0.0 && eval(a, 0.0) == 0.0 && left_slope == 1.0 && eval_derivative(a, 0.0) == 1.0;
    const double tiny = std::numeric_limits<double>::denorm_min();
    ok = ok && eval_derivative(a, -tiny) == 1.0 && eval_derivative(a, tiny) == 1.0;
    ok = ok && std::abs(eval(a, -1e-12) - (-1e-12)) <= 1e-24;
    for (int i = 0; i < 1000000; ++i) {
      const double d = eval_derivative(a, x_dist(rng));
      worst_below = std::max(worst_below, beta - d);
      worst_above = std::max(worst_above, d - 1.0);
    }
  }
  ok = ok && worst_below <= 0.0 && worst_above <= 0.0;
  return {ok, "value/slope at 0 exact; max excursion below beta " + sci(worst_below) + ", above 1 " + sci(worst_above) +
                  " over 1e6 samples per beta"};
}

// --- 3 ----------------------------------------------------------------------------

Outcome gradient_check() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> depth(1, 3), width(1, 8), dim(1, 3);
  std::uniform_real_distribution<double> beta(0.05, 0.95);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  std::size_t checked = 0, resampled = 0;
  for (auto kind : kAllActivationKinds) {
    for (int trial = 0; trial < 20; ++trial) {
      const bool param = has_shape_param(kind);
      const NetworkSpec spec{dim(rng), depth(rng), width(rng), ActivationSpec{kind, param ? beta(rng) : 0.0, param}};
      Network net = init_he_normal(spec, rng());
      for (auto& b : net.params.biases) b = b.unaryExpr([&](double) { return 0.3 * normal(rng); });
      net.params.output_bias[0] = normal(rng);
      for (Eigen::Index l = 0; l < net.params.activation_params.size(); ++l) net.params.activation_params[l] = beta(rng);

      const bool kinked = kind == ActivationKind::ReLU || kind == ActivationKind::LeakyReLU;
      std::vector<double> x(spec.input_dim);
      ForwardResult fw;
      for (;;) {
        for (auto& v : x) v = normal(rng);
        fw = forward(net, x);
        bool near_kink = false;
        for (std::size_t l = 0; kinked && l < spec.depth; ++l)
          near_kink = near_kink || (fw.cache.pre_activations[l].array().abs() < 1e-4).any();
        if (!near_kink) break;
        ++resampled;
      }
      const double upstream = 0.7;
      const GradientSet analytic = backward(net, fw.cache, upstream);
      std::vector<const double*> grads;
      analytic.for_each_tensor([&](ParameterSet::Role, const double* d, std::size_t) { grads.push_back(d); });
      std::size_t k = 0;
      net.params.for_each_tensor([&](ParameterSet::Role, double* p, std::size_t n) {
        const double* g = grads[k++];
        for (std::size_t i = 0; i < n; ++i) {
          const double saved = p[i], h = 1e-6;
          p[i] = saved + h;
          const double up = forward(net, x).prediction;
          p[i] = saved - h;
          const double down = forward(net, x).prediction;
          p[i] = saved;
          const double fd = upstream * (up - down) / (2.0 * h);
          worst = std::max(worst, std::abs(g[i] - fd) / std::max({std::abs(g[i]), std::abs(fd), 1e-3}));
          ++checked;
        }
      });
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst < 1e-6 && secs < 30.0, "160 networks, " + std::to_string(checked) + " partials, max rel err " + sci(worst) +
                                           ", " + std::to_string(resampled) + " kink-adjacent inputs redrawn, " + sci(secs) +
                                           " s"};
}

// --- 4 ----------------------------------------------------------------------------

StructuredGrid grid_of(std::vector<std::vector<double>> axes, const std::function<double(const std::vector<double>&)>& f) {
  StructuredGrid g;
  g.axes = std::move(axes);
  g.values.resize(g.node_count());
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    const auto idx = g.unravel(k);
    std::vector<double> x(g.dims());
    for (std::size_t d = 0; d < g.dims(); ++d) x[d] = g.axes[d][idx[d]];
    g.values[k] = f(x);
  }
  return g;
}

BatchPredictor affine_predictor(std::vector<double> w, double c) {
  return [w, c](const Eigen::MatrixXd& pts) {
    std::vector<double> out(static_cast<std::size_t>(pts.cols()));
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      double v = c;
      for (std::size_t d = 0; d < w.size(); ++d) v += w[d] * pts(static_cast<Eigen::Index>(d), j);
      out[static_cast<std::size_t>(j)] = v;
    }
    return out;
  };
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Outcome diffusion_sensors() {
  bool ok = true;
  std::string detail;

  // Affine fields: true and staggered sensors vanish.
  const auto g1 = grid_of({linspace(0, 9, 10)}, [](const auto& x) { return 2.0 + 0.5 * x[0]; });
  const auto r1 = diffusion_mse(g1, affine_predictor({0.5}, 2.0));
  const auto g3 = grid_of({linspace(0, 5, 6), linspace(0, 4, 5), linspace(0, 3, 4)},
                          [](const auto& x) { return 3.0 + 0.2 * x[0] - 0.1 * x[1] + 0.3 * x[2]; });
  const auto r3 = diffusion_mse(g3, affine_predictor({0.2, -0.1, 0.3}, 3.0));
  const double affine = std::max({max_abs(r1.true_sensor), max_abs(r1.test_sensor), max_abs(r3.true_sensor),
                                  max_abs(r3.test_sensor)});
  ok = ok && affine <= 1e-12;
  detail += "affine max " + sci(affine);

  // Golden values.
  const auto bump = grid_of({{0, 1, 2}}, [](const auto& x) { return x[0] == 1 ? 2.0 : 1.0; });
  const double g_bump = true_sensor_1d(bump).values.at(0);
  const auto spike = grid_of({{0, 1, 2}, {0, 1, 2}, {0, 1, 2}},
                             [](const auto& x) { return x[0] == 1 && x[1] == 1 && x[2] == 1 ? 2.0 : 1.0; });
  const double g_spike = true_sensor_nd(spike).values.at(0);
  ok = ok && std::abs(g_bump - 1.0 / 3.0) <= 1e-12 && std::abs(g_spike - 4.0 / 3.0) <= 1e-12;
  detail += ", [1,2,1] -> " + format_double(g_bump) + ", spike -> " + format_double(g_spike);

  // 1D and nd paths agree bit for bit.
  const auto curved = grid_of({linspace(0, 11, 12)}, [](const auto& x) { return std::exp(-0.3 * x[0]) + 0.1; });
  const BatchPredictor smooth = pointwise([](std::span<const double> x) { return std::exp(-0.29 * x[0]) + 0.1 + 0.01 * std::sin(3 * x[0]); });
  const auto t1 = true_sensor_1d(curved), tn = true_sensor_nd(curved);
  const auto s1 = staggered_sensor_1d(curved, smooth), sn = staggered_sensor_nd(curved, smooth);
  const bool bitwise = t1.values.size() == tn.values.size() &&
                       std::memcmp(t1.values.data(), tn.values.data(), t1.values.size() * sizeof(double)) == 0 &&
                       std::memcmp(s1.values.data(), sn.values.data(), s1.values.size() * sizeof(double)) == 0;
  ok = ok && bitwise;
  detail += bitwise ? ", 1D/nd bitwise equal" : ", 1D/nd differ";

  // Positive scaling leaves both sensors unchanged.
  const auto field = grid_of({linspace(0, 6, 7), linspace(0, 4, 5), linspace(0, 2, 3)},
                             [](const auto& x) { return 1.5 + std::sin(x[0]) * std::cos(0.5 * x[1]) + 0.2 * x[2] * x[2]; });
  auto scaled = field;
  for (double& v : scaled.values) v *= 7.25;
  const BatchPredictor p = pointwise([](std::span<const double> x) { return 1.6 + std::sin(x[0]) * std::cos(0.5 * x[1]); });
  const BatchPredictor ps = [&p](const Eigen::MatrixXd& pts) {
    auto v = p(pts);
    for (double& y : v) y *= 7.25;
    return v;
  };
  const auto a = diffusion_mse(field, p), b = diffusion_mse(scaled, ps);
  double scale_gap = 0.0;
  for (std::size_t k = 0; k < a.true_sensor.size(); ++k) {
    scale_gap = std::max({scale_gap, std::abs(a.true_sensor[k] - b.true_sensor[k]), std::abs(a.test_sensor[k] - b.test_sensor[k])});
  }
  ok = ok && scale_gap <= 1e-12;
  detail += ", scale gap " + sci(scale_gap);
  return {ok, detail};
}

// --- training-based criteria -----------------------------------------------------

ExperimentConfig reduced_protocol(DatasetKind kind, std::size_t points, ActivationSpec act, double lr_min,
                                  const std::string& name) {
  ExperimentConfig c;
  c.dataset.kind = kind;
  c.dataset.points = {points};
  c.network = {1, 7, 120, act};
  c.training.epochs = 5000;
  c.training.batch_size = 3;
  c.training.loss = LossKind::MAE;
  c.training.schedule = {1e-3, lr_min, 0.5, 500, 100};
  c.seeds = {1, 2, 3};
  c.output_dir = (g_root / name).string();
  return c;
}

std::string per_seed(const ExperimentResult& r, bool mae = false) {
  std::string s = "[";
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    s += (i ? " " : "") + sci(mae ? r.runs[i].training_mae : r.runs[i].diffusion_mse);
  }
  return s + "]";
}

Outcome trend(const ExperimentConfig& lelu_cfg, const ExperimentConfig& base_cfg, const std::string& base_name) {
  const auto lelu_run = run_experiment(lelu_cfg);
  const auto base_run = run_experiment(base_cfg);
  const double ml = lelu_run.median_diffusion_mse, mb = base_run.median_diffusion_mse;
  const double ratio = mb / ml;
  const bool ok = std::isfinite(ml) && std::isfinite(mb) && ml < mb && ratio >= 3.0;
  return {ok, "median diffusion " + label(lelu_cfg.network.activation) + " " + sci(ml) + " " + per_seed(lelu_run) + " vs " +
                  base_name + " " + sci(mb) + " " + per_seed(base_run) + ", ratio " + format_double(std::round(ratio * 100) / 100)};
}

Outcome tanh_trend() {
  return trend(reduced_protocol(DatasetKind::Tanh1D, 7, ActivationSpec::lelu(0.3), 1e-6, "c5_lelu"),
               reduced_protocol(DatasetKind::Tanh1D, 7, ActivationSpec::plain(ActivationKind::ReLU), 1e-6, "c5_relu"), "relu");
}

Outcome exp_trend() {
  return trend(reduced_protocol(DatasetKind::Exp1D, 12, ActivationSpec::lelu(0.4), 2e-7, "c6_lelu"),
               reduced_protocol(DatasetKind::Exp1D, 12, ActivationSpec::plain(ActivationKind::Tanh), 2e-7, "c6_tanh"), "tanh");
}

Outcome full_protocol() {
  ExperimentConfig c = reduced_protocol(DatasetKind::Tanh1D, 14, ActivationSpec::lelu(0.3), 1e-6, "c7_full");
  c.network.depth = 8;
  c.network.width = 240;
  c.training.epochs = 15000;
  c.seeds = {1};
  const auto r = run_experiment(c).runs.at(0);
  const bool ok = r.status == RunStatus::Ok && r.training_mae < 1e-4 && r.diffusion_mse < 5e-2;
  return {ok, "8x240, 14 pts, 15000 epochs: training MAE " + sci(r.training_mae) + ", diffusion " + sci(r.diffusion_mse) +
                  ", " + std::to_string(r.flagged_nodes) + " flagged, " + format_double(std::round(r.wall_seconds)) + " s"};
}

Outcome neuron_study() {
  const std::vector<double> xs{-1, 0, 1}, ys{std::pow(0.1, -1.0), 1.0, std::pow(0.1, 1.0)};
  bool ok = true;
  double worst_residual = 0.0;
  std::vector<NeuronStudyRecord> recs;
  for (const auto& a : neuron_study_activations()) {
    recs.push_back(single_neuron_study(a, xs, ys));
    ok = ok && recs.back().found;
    worst_residual = std::max({worst_residual, recs.back().outer_residual, recs.back().max_outer_residual_any});
  }
  ok = ok && worst_residual < 1e-10;
  const auto find = [&](const ActivationSpec& a) -> const NeuronStudyRecord& {
    for (const auto& r : recs)
      if (r.activation == a) return r;
    throw std::logic_error("missing activation " + label(a));
  };
  const auto& lelu4 = find(ActivationSpec::lelu(0.4));
  const auto& elu = find(ActivationSpec::plain(ActivationKind::ELU));
  std::string detail = "outer residual max " + sci(worst_residual) + "; grad norms";
  for (auto k : {ActivationKind::ReLU, ActivationKind::ELU, ActivationKind::SiLU, ActivationKind::Softplus}) {
    const auto& r = find(ActivationSpec::plain(k));
    ok = ok && r.gradient_norm < lelu4.gradient_norm;
    detail += " " + std::string(to_string(k)) + " " + sci(r.gradient_norm);
  }
  ok = ok && lelu4.condition_number < elu.condition_number;
  detail += " < lelu(0.4) " + sci(lelu4.gradient_norm) + "; cond lelu(0.4) " + sci(lelu4.condition_number) + " < elu " +
            sci(elu.condition_number);
  return {ok, detail};
}

Outcome regularization_tradeoff() {
  auto plain = reduced_protocol(DatasetKind::Tanh1D, 7, ActivationSpec::plain(ActivationKind::SiLU), 1e-6, "c9_plain");
  auto l1 = reduced_protocol(DatasetKind::Tanh1D, 7, ActivationSpec::plain(ActivationKind::SiLU), 1e-6, "c9_l1");
  l1.training.regularization = {RegularizationKind::L1, 1e-4};
  const auto a = run_experiment(plain), b = run_experiment(l1);
  const double mae_ratio = b.median_training_mae / a.median_training_mae;
  const bool ok = mae_ratio >= 3.0 && b.median_diffusion_mse <= a.median_diffusion_mse;
  return {ok, "SiLU median MAE " + sci(a.median_training_mae) + " -> " + sci(b.median_training_mae) + " with L1 (x" +
                  format_double(std::round(mae_ratio * 10) / 10) + "), diffusion " + sci(a.median_diffusion_mse) + " -> " +
                  sci(b.median_diffusion_mse)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  auto c = reduced_protocol(DatasetKind::Tanh1D, 7, ActivationSpec::lelu(0.3, true), 1e-6, "c10_a");
  c.training.epochs = 300;
  c.seeds = {5};
  auto d = c;
  d.output_dir = (g_root / "c10_b").string();
  const auto ra = run_experiment(c).runs.at(0);
  const auto rb = run_experiment(d).runs.at(0);
  bool ok = std::memcmp(&ra.training_mae, &rb.training_mae, sizeof(double)) == 0 &&
            std::memcmp(&ra.diffusion_mse, &rb.diffusion_mse, sizeof(double)) == 0;
  std::size_t compared = 0;
  for (const char* f : {"history.csv", "checkpoint.json", "diffusion.csv", "report.json", "predictions.csv"}) {
    const std::string x = slurp(fs::path(ra.run_dir) / f), y = slurp(fs::path(rb.run_dir) / f);
    ok = ok && !x.empty() && x == y;
    compared += x.size();
  }
  return {ok, "two runs, seed 5: " + std::to_string(compared) + " artifact bytes identical=" + (ok ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  bool full = false;
  std::vector<bool> selected(10, true);
  g_root = fs::temp_directory_path() / "lelu_acceptance";
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--full") == 0) {
      full = true;
    } else if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      // comma-separated criterion numbers
      selected.assign(10, false);
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) {
        const int n = std::atoi(item.c_str());
        if (n >= 1 && n <= 10) selected[static_cast<std::size_t>(n - 1)] = true;
      }
    } else if (std::strcmp(argv[i], "--out") == 0 && i + 1 < argc) {
      g_root = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--full] [--only 1,2,...] [--out dir]\n", argv[0]);
      return 2;
    }
  }
  fs::remove_all(g_root);
  fs::create_directories(g_root);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"flexibility table", flexibility},
      {"LELU smoothness", lelu_smoothness},
      {"gradient correctness", gradient_check},
      {"diffusion sensors", diffusion_sensors},
      {"tanh trend LELU(0.3) vs ReLU", tanh_trend},
      {"exp trend LELU(0.4) vs tanh", exp_trend},
      {"full protocol LELU(0.3)", [full] { return full ? full_protocol() : Outcome{true, "run with --full", true}; }},
      {"single-neuron study", neuron_study},
      {"regularization trade-off", regularization_tradeoff},
      {"determinism", determinism},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %2zu %s: %s\n", o.skipped ? "SKIP" : (o.pass ? "PASS" : "FAIL"), i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
