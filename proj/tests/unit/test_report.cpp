#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ntklab/error.hpp"
#include "ntklab/report.hpp"

using namespace ntklab;
namespace fs = std::filesystem;

namespace {

// Records with lambda values per step; velocity from a parallel list.
std::vector<MetricRecord> records(const std::vector<double>& lambda, const std::vector<std::size_t>& task,
                                  const std::vector<double>& velocity = {}) {
  std::vector<MetricRecord> out;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    MetricRecord r;
    r.global_step = i;
    r.iteration = 10 * i;
    r.task_index = task[i];
    r.lambda_max = lambda[i];
    if (i > 0) {
      const double v = velocity.empty() ? 0.01 : velocity[i];
      r.velocity = v;
      r.kernel_distance_from_prev = v;
    }
    out.push_back(r);
  }
  return out;
}

std::vector<std::size_t> tasks(std::size_t first, std::size_t second) {
  std::vector<std::size_t> t(first, 0);
  t.insert(t.end(), second, 1);
  return t;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ntklab_unit_report";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Reactivation, ConstantLambdaHasNoDrop) {
  const auto r = records(std::vector<double>(21, 5.0), tasks(11, 10));
  ReactivationOptions o;
  o.baseline_span = 5;
  const auto stats = reactivation_stats(r, o);
  ASSERT_EQ(stats.size(), 1u);
  EXPECT_LE(stats[0].drop_depth, 0.0);
  EXPECT_NEAR(stats[0].velocity_spike_ratio, 1.0, 1e-12);
  EXPECT_EQ(stats[0].recovery_steps, std::optional<std::size_t>(0));
}

TEST(Reactivation, HandBuiltCheckMark) {
  // Baseline 10 over steps 1..10 (switch at step 10), then 4, 5, 7, 9, 10, ...
  std::vector<double> lambda{1.0};
  for (int i = 0; i < 10; ++i) lambda.push_back(10.0);
  for (double v : {4.0, 5.0, 7.0, 9.0, 10.0, 10.0, 10.0}) lambda.push_back(v);
  const auto r = records(lambda, tasks(11, 7));
  ReactivationOptions o;
  o.baseline_span = 5;
  o.recovery_tolerance = 0.5;
  const auto s = reactivation_stats(r, o).at(0);
  EXPECT_EQ(s.switch_step, 10u);
  EXPECT_EQ(s.pre_switch_baseline, 10.0);
  EXPECT_EQ(s.drop_depth, 6.0);
  EXPECT_EQ(s.min_step, 11u);
  EXPECT_EQ(s.recovery_steps, std::optional<std::size_t>(5));
  EXPECT_FALSE(s.partial);
}

TEST(Reactivation, UnrecoveredIsFlagged) {
  std::vector<double> lambda(11, 10.0);
  for (int i = 0; i < 6; ++i) lambda.push_back(3.0);
  ReactivationOptions o;
  o.baseline_span = 5;
  const auto s = reactivation_stats(records(lambda, tasks(11, 6)), o).at(0);
  EXPECT_EQ(s.drop_depth, 7.0);
  EXPECT_FALSE(s.recovery_steps.has_value());
}

TEST(Reactivation, RiseGivesNegativeDrop) {
  std::vector<double> lambda(11, 10.0);
  for (int i = 0; i < 6; ++i) lambda.push_back(12.0);
  ReactivationOptions o;
  o.baseline_span = 5;
  EXPECT_EQ(reactivation_stats(records(lambda, tasks(11, 6)), o).at(0).drop_depth, -2.0);
}

TEST(Reactivation, VelocitySpikeRatio) {
  std::vector<double> lambda(17, 1.0), velocity(17, 0.02);
  velocity[11] = 0.2;
  ReactivationOptions o;
  o.baseline_span = 5;
  const auto s = reactivation_stats(records(lambda, tasks(11, 6), velocity), o).at(0);
  EXPECT_NEAR(s.velocity_spike_ratio, 10.0, 1e-12);
  EXPECT_EQ(s.peak_velocity, 0.2);
  EXPECT_EQ(s.peak_distance_jump, 0.2);
}

TEST(Reactivation, TwoSwitchesAreIndependent) {
  std::vector<double> lambda(11, 10.0);
  for (double v : {4.0, 6.0, 8.0, 10.0, 10.0, 10.0}) lambda.push_back(v);
  for (double v : {9.0, 9.5, 10.0, 10.0}) lambda.push_back(v);
  std::vector<std::size_t> task = tasks(11, 6);
  task.insert(task.end(), 4, 2);
  ReactivationOptions o;
  o.baseline_span = 3;
  o.recovery_tolerance = 0.1;
  const auto stats = reactivation_stats(records(lambda, task), o);
  ASSERT_EQ(stats.size(), 2u);
  EXPECT_EQ(stats[0].switch_step, 10u);
  EXPECT_EQ(stats[0].drop_depth, 6.0);
  EXPECT_EQ(stats[0].recovery_steps, std::optional<std::size_t>(4));
  EXPECT_EQ(stats[1].switch_step, 16u);
  EXPECT_EQ(stats[1].from_task, 1u);
  EXPECT_EQ(stats[1].to_task, 2u);
  EXPECT_EQ(stats[1].drop_depth, 1.0);
  EXPECT_EQ(stats[1].recovery_steps, std::optional<std::size_t>(3));
}

TEST(Reactivation, InvariantUnderRescaling) {
  std::vector<double> lambda{2.0};
  for (int i = 0; i < 10; ++i) lambda.push_back(10.0 + 0.1 * i);
  for (double v : {6.0, 4.0, 7.0, 9.0, 10.5, 11.0}) lambda.push_back(v);
  ReactivationOptions o;
  o.baseline_span = 5;
  const auto a = reactivation_stats(records(lambda, tasks(11, 6)), o).at(0);
  for (double& v : lambda) v *= 37.5;
  const auto b = reactivation_stats(records(lambda, tasks(11, 6)), o).at(0);
  EXPECT_NEAR(b.drop_depth, 37.5 * a.drop_depth, 1e-10);
  EXPECT_EQ(b.min_step, a.min_step);
  EXPECT_EQ(b.switch_step, a.switch_step);
  EXPECT_EQ(b.recovery_steps, a.recovery_steps);
}

TEST(Reactivation, PreconditionsAreChecked) {
  ReactivationOptions o;
  o.baseline_span = 5;
  EXPECT_THROW(reactivation_stats(records(std::vector<double>(10, 1.0), tasks(10, 0)), o), ConfigError);
  EXPECT_THROW(reactivation_stats(records(std::vector<double>(10, 1.0), tasks(4, 6)), o), ConfigError);
}

TEST(Reactivation, ShortTailIsPartial) {
  ReactivationOptions o;
  o.baseline_span = 5;
  const auto s = reactivation_stats(records(std::vector<double>(13, 1.0), tasks(11, 2)), o).at(0);
  EXPECT_TRUE(s.partial);
}

TEST(Spearman, PerfectAndTied) {
  const std::vector<double> x{0.0, 0.25, 0.5, 0.75, 1.0};
  const std::vector<double> down{9, 7, 4, 2, 1};
  EXPECT_NEAR(spearman_correlation(x, down), -1.0, 1e-15);
  const std::vector<double> flat(5, 3.0);
  EXPECT_EQ(spearman_correlation(x, flat), 0.0);
  // Ties share the average rank: ranks of y are (1.5, 1.5, 3, 4).
  const std::vector<double> a{1, 2, 3, 4}, b{5, 5, 6, 7};
  EXPECT_NEAR(spearman_correlation(a, b), 0.9486832980505138, 1e-12);
}

TEST(SimilarityTrend, AntiMonotoneAndConstant) {
  std::vector<std::pair<double, ReactivationStats>> in;
  for (int i = 0; i < 5; ++i) {
    ReactivationStats s;
    s.drop_depth = 10.0 - i;
    s.peak_distance_jump = 1.0 - 0.1 * i;
    in.emplace_back(0.25 * i, s);
  }
  const TrendReport r = similarity_trend(in);
  EXPECT_EQ(r.levels, 5u);
  EXPECT_NEAR(r.drop_correlation, -1.0, 1e-15);
  EXPECT_NEAR(r.distance_jump_correlation, -1.0, 1e-15);
  for (auto& [sim, s] : in) s.drop_depth = 2.0;
  EXPECT_EQ(similarity_trend(in).drop_correlation, 0.0);
  in.resize(3);
  EXPECT_THROW(similarity_trend(in), ConfigError);
}

TEST(StatsFile, KeyValueRendering) {
  std::vector<double> lambda(11, 10.0);
  for (int i = 0; i < 6; ++i) lambda.push_back(3.0);
  ReactivationOptions o;
  o.baseline_span = 5;
  const auto kv = stats_to_key_values(reactivation_stats(records(lambda, tasks(11, 6)), o));
  EXPECT_EQ(*find_value(kv, "switches"), "1");
  EXPECT_EQ(*find_value(kv, "switch.0.recovery_steps"), "unrecovered");
  EXPECT_EQ(*find_value(kv, "switch.0.drop_depth"), "7");
  EXPECT_EQ(parse_key_values(format_key_values(kv)), kv);
}

TEST(Plot, SingleCurveWithSwitchMarker) {
  std::vector<double> lambda(11, 10.0);
  for (int i = 0; i < 6; ++i) lambda.push_back(3.0 + i);
  const fs::path csv = scratch("single.csv");
  write_metrics_csv(records(lambda, tasks(11, 6)), csv);
  const fs::path out = scratch("single.svg");
  const std::vector<fs::path> in{csv};
  plot_metrics(in, "lambda_max", out);
  const std::string svg = slurp(out);
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  std::size_t curves = 0, markers = 0;
  for (std::size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++curves;
  for (std::size_t p = svg.find("task-switch"); p != std::string::npos; p = svg.find("task-switch", p + 1)) ++markers;
  EXPECT_EQ(curves, 1u);
  EXPECT_EQ(markers, 1u);
}

TEST(Plot, SweepLabelsAndDeterminism) {
  std::vector<fs::path> in;
  for (int w : {32, 64, 128}) {
    const fs::path dir = scratch("sweep") / ("model.width=" + std::to_string(w));
    fs::create_directories(dir);
    std::vector<double> lambda(12, 1.0 * w);
    write_metrics_csv(records(lambda, tasks(6, 6)), dir / "metrics.csv");
    in.push_back(dir / "metrics.csv");
  }
  const fs::path a = scratch("sweep_a.svg"), b = scratch("sweep_b.svg");
  plot_metrics(in, "lambda_max", a);
  plot_metrics(in, "lambda_max", b);
  const std::string svg = slurp(a);
  EXPECT_EQ(svg, slurp(b));
  for (int w : {32, 64, 128}) EXPECT_NE(svg.find("model.width=" + std::to_string(w)), std::string::npos);
}

TEST(Plot, EmptyCsvIsError) {
  const fs::path csv = scratch("empty.csv");
  write_metrics_csv({}, csv);
  const fs::path out = scratch("empty.svg");
  fs::remove(out);
  const std::vector<fs::path> in{csv};
  EXPECT_THROW(plot_metrics(in, "lambda_max", out), DataError);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Plot, UnknownMetricListsValidNames) {
  const fs::path csv = scratch("one.csv");
  write_metrics_csv(records({1.0, 2.0}, {0, 0}), csv);
  const std::vector<fs::path> in{csv};
  try {
    plot_metrics(in, "lambda", scratch("x.svg"));
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("lambda_max"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("task1_test_accuracy"), std::string::npos);
  }
}
