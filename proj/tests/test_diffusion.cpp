#include "lelu/diffusion.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include <gtest/gtest.h>

namespace lelu {
namespace {

StructuredGrid grid_1d(std::vector<double> y, double x0 = 0.0, double dx = 1.0) {
  StructuredGrid g;
  g.axes.emplace_back();
  for (std::size_t i = 0; i < y.size(); ++i) g.axes[0].push_back(x0 + dx * static_cast<double>(i));
  g.values = std::move(y);
  return g;
}

template <class F>
StructuredGrid grid_3d(std::size_t n1, std::size_t n2, std::size_t n3, F f) {
  StructuredGrid g;
  for (std::size_t n : {n1, n2, n3}) {
    std::vector<double> axis;
    for (std::size_t i = 0; i < n; ++i) axis.push_back(static_cast<double>(i));
    g.axes.push_back(axis);
  }
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j)
      for (std::size_t k = 0; k < n3; ++k) g.values.push_back(f(double(i), double(j), double(k)));
  return g;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TEST(TrueSensor1d, Examples) {
  EXPECT_EQ(true_sensor_1d(grid_1d({1, 2, 3})).values, std::vector<double>{0.0});
  EXPECT_NEAR(true_sensor_1d(grid_1d({1, 2, 1})).values[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(true_sensor_1d(grid_1d({2, 4, 2})).values[0], 1.0 / 3.0, 1e-15);
  // Spacing enters as 1 / dx^2.
  EXPECT_NEAR(true_sensor_1d(grid_1d({1, 2, 1}, 0.0, 0.5)).values[0], 4.0 / 3.0, 1e-14);
}

TEST(TrueSensor1d, Errors) {
  EXPECT_THROW(true_sensor_1d(grid_1d({1, 2})), std::invalid_argument);
  EXPECT_THROW(true_sensor_1d(grid_1d({1, 0, 1})), std::invalid_argument);
  EXPECT_THROW(true_sensor_1d(grid_1d({1, -2, 1})), std::invalid_argument);
  StructuredGrid uneven = grid_1d({1, 2, 3});
  uneven.axes[0] = {0.0, 1.0, 3.0};
  EXPECT_THROW(true_sensor_1d(uneven), std::invalid_argument);
}

TEST(StaggeredSensor1d, Examples) {
  const StructuredGrid g = grid_1d({1, 1, 1}, -1.0, 1.0);
  const auto affine = pointwise([](std::span<const double> x) { return 3.0 + 0.5 * x[0]; });
  EXPECT_EQ(staggered_sensor_1d(g, affine).values, std::vector<double>{0.0});

  // yhat(-1) = 1, yhat(-0.5) = 2, yhat(0.5) = 2, yhat(1) = 1 -> (1/0.75) * 2/6 = 4/9.
  const auto bump = pointwise([](std::span<const double> x) { return std::abs(x[0]) == 0.5 ? 2.0 : 1.0; });
  EXPECT_NEAR(staggered_sensor_1d(g, bump).values[0], 4.0 / 9.0, 1e-15);
}

TEST(StaggeredSensor1d, FlagsNonPositivePredictions) {
  const StructuredGrid g = grid_1d({1, 1, 1, 1, 1});
  const auto dip = pointwise([](std::span<const double> x) { return x[0] == 0.5 ? -1.0 : 1.0; });
  const auto field = staggered_sensor_1d(g, dip);
  EXPECT_TRUE(field.flagged[0]);
  EXPECT_FALSE(field.flagged[1]);
  EXPECT_FALSE(field.flagged[2]);
  EXPECT_EQ(field.flagged_count(), 1u);

  const auto report = diffusion_mse(g, dip);
  EXPECT_EQ(report.flagged_nodes, 1u);
  EXPECT_EQ(report.mse, 0.0);  // remaining nodes see a flat prediction on flat data
}

TEST(StaggeredMesh, Centroids) {
  const auto mesh1 = build_staggered_points(grid_1d({1, 1, 1}));
  EXPECT_EQ(mesh1.shape, std::vector<std::size_t>{2});
  EXPECT_EQ(mesh1.points(0, 0), 0.5);
  EXPECT_EQ(mesh1.points(0, 1), 1.5);

  StructuredGrid cell;
  cell.axes = {{0.0, 1.0}, {0.0, 1.0}};
  cell.values = {1, 1, 1, 1};
  const auto mesh2 = build_staggered_points(cell);
  ASSERT_EQ(mesh2.points.cols(), 1);
  EXPECT_EQ(mesh2.points(0, 0), 0.5);
  EXPECT_EQ(mesh2.points(1, 0), 0.5);

  const auto mesh3 = build_staggered_points(grid_3d(19, 15, 5, [](double, double, double) { return 1.0; }));
  EXPECT_EQ(mesh3.shape, (std::vector<std::size_t>{18, 14, 4}));
  EXPECT_EQ(mesh3.points.cols(), 18 * 14 * 4);

  EXPECT_THROW(build_staggered_points(grid_1d({1})), std::invalid_argument);
}

TEST(Diagonals, Enumeration) {
  EXPECT_EQ(enumerate_diagonals(1), (std::vector<std::vector<int>>{{1}}));
  EXPECT_EQ(enumerate_diagonals(2).size(), 2u);
  const auto d3 = enumerate_diagonals(3);
  EXPECT_EQ(d3.size(), 4u);
  for (std::size_t a = 0; a < d3.size(); ++a) {
    EXPECT_EQ(d3[a][0], 1);
    for (std::size_t b = a + 1; b < d3.size(); ++b) {
      std::vector<int> neg(d3[b]);
      for (int& v : neg) v = -v;
      EXPECT_NE(d3[a], d3[b]);
      EXPECT_NE(d3[a], neg);
    }
  }
  EXPECT_THROW(enumerate_diagonals(0), std::invalid_argument);
}

TEST(TrueSensorNd, Examples) {
  const auto linear = grid_3d(4, 5, 3, [](double i, double j, double k) { return 1.0 + i + j + k; });
  for (double v : true_sensor_nd(linear).values) EXPECT_LE(std::abs(v), 1e-12);

  const auto spike = grid_3d(3, 3, 3, [](double i, double j, double k) { return i == 1 && j == 1 && k == 1 ? 2.0 : 1.0; });
  const auto field = true_sensor_nd(spike);
  ASSERT_EQ(field.values.size(), 1u);
  EXPECT_NEAR(field.values[0], 4.0 / 3.0, 1e-12);

  const StructuredGrid g1 = grid_1d({1.0, 2.5, 1.2, 3.0, 0.7});
  EXPECT_TRUE(bitwise_equal(true_sensor_nd(g1).values, true_sensor_1d(g1).values));
}

TEST(StaggeredSensorNd, AffinePredictorGivesZero) {
  const auto g = grid_3d(4, 3, 5, [](double, double, double) { return 1.0; });
  const auto affine = pointwise([](std::span<const double> x) { return 10.0 + 0.3 * x[0] - 0.2 * x[1] + 0.7 * x[2]; });
  for (double v : staggered_sensor_nd(g, affine).values) EXPECT_LE(std::abs(v), 1e-12);
}

TEST(StaggeredSensorNd, OneDimensionalAgreesBitwise) {
  const StructuredGrid g = grid_1d({1.0, 2.0, 1.5, 3.0, 2.0, 1.0}, -2.0, 0.4);
  const auto f = pointwise([](std::span<const double> x) { return 2.0 + std::sin(3.0 * x[0]); });
  EXPECT_TRUE(bitwise_equal(staggered_sensor_nd(g, f).values, staggered_sensor_1d(g, f).values));
}

/// Independent oracle: evaluates every stencil point directly from
/// origin + spacing * offset, one predictor call per point.
double naive_staggered(const StructuredGrid& g, const std::function<double(const std::vector<double>&)>& f,
                       const std::vector<std::size_t>& node) {
  const std::size_t dims = g.dims();
  const double dx = g.spacing(0);
  double total = 0.0;
  for (const auto& dir : enumerate_diagonals(dims)) {
    double v[4];
    const double offsets[4] = {-1.0, -0.5, 0.5, 1.0};
    for (int s = 0; s < 4; ++s) {
      std::vector<double> x(dims);
      for (std::size_t d = 0; d < dims; ++d) x[d] = g.axes[d][node[d]] + offsets[s] * dir[d] * dx;
      v[s] = f(x);
    }
    total += std::abs(v[3] - v[2] - v[1] + v[0]) / (v[3] + v[2] + v[1] + v[0]) / (3.0 * 0.25 * dx * dx);
  }
  return total;
}

TEST(StaggeredSensorNd, MatchesNaiveOracle) {
  const auto g = grid_3d(5, 4, 3, [](double i, double j, double k) { return 1.0 + i * j + k; });
  auto f = [](const std::vector<double>& x) { return 3.0 + std::sin(x[0]) * std::cos(1.3 * x[1]) + 0.2 * x[2] * x[2]; };
  const auto field = staggered_sensor_nd(g, pointwise([&](std::span<const double> x) {
                                           return f(std::vector<double>(x.begin(), x.end()));
                                         }));
  std::size_t k = 0;
  for (std::size_t i = 1; i + 1 < 5; ++i)
    for (std::size_t j = 1; j + 1 < 4; ++j)
      for (std::size_t l = 1; l + 1 < 3; ++l, ++k) {
        EXPECT_NEAR(field.values[k], naive_staggered(g, f, {i, j, l}), 1e-13);
      }
}

TEST(StaggeredSensorNd, DeduplicatesPredictorInputs) {
  const auto g = grid_3d(19, 15, 5, [](double, double, double) { return 1.0; });
  std::size_t calls = 0, points = 0;
  const BatchPredictor counting = [&](const Eigen::MatrixXd& pts) {
    ++calls;
    points += static_cast<std::size_t>(pts.cols());
    return std::vector<double>(static_cast<std::size_t>(pts.cols()), 1.0);
  };
  staggered_sensor_nd(g, counting);
  EXPECT_EQ(calls, 1u);
  // Every node plus every centroid, each evaluated once.
  EXPECT_EQ(points, 19u * 15u * 5u + 18u * 14u * 4u);
}

TEST(DiffusionMse, ScaleInvarianceAndZero) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 3.0);
  const auto g = grid_3d(4, 4, 4, [&](double, double, double) { return u(rng); });
  StructuredGrid scaled = g;
  for (double& v : scaled.values) v *= 7.25;
  const auto a = true_sensor_nd(g).values, b = true_sensor_nd(scaled).values;
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);

  // Affine data, predictor reproducing it exactly and affinely in-between.
  const auto linear = grid_3d(4, 4, 4, [](double i, double j, double k) { return 2.0 + i + 0.5 * j + 0.25 * k; });
  const auto exact = pointwise([](std::span<const double> x) { return 2.0 + x[0] + 0.5 * x[1] + 0.25 * x[2]; });
  const auto report = diffusion_mse(linear, exact);
  EXPECT_LE(report.mse, 1e-24);
  EXPECT_EQ(report.interior_shape, (std::vector<std::size_t>{2, 2, 2}));
  EXPECT_EQ(report.true_sensor.size(), 8u);
}

TEST(DiffusionMse, PositiveForWigglingPredictor) {
  const StructuredGrid g = grid_1d({1, 2, 3, 4, 5, 6});
  const auto wiggle = pointwise([](std::span<const double> x) { return 1.0 + x[0] + 0.3 * std::cos(2.0 * M_PI * x[0]); });
  const auto report = diffusion_mse(g, wiggle);
  EXPECT_GT(report.mse, 0.0);
  EXPECT_EQ(report.flagged_nodes, 0u);
}

TEST(DiffusionMse, RejectsUnequalSpacingInNd) {
  auto g = grid_3d(3, 3, 3, [](double, double, double) { return 1.0; });
  g.axes[1] = {0.0, 2.0, 4.0};
  EXPECT_THROW(true_sensor_nd(g), std::invalid_argument);
}

}  // namespace
}  // namespace lelu
