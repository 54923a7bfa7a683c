#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ntklab/keyvalue.hpp"
#include "ntklab/metrics_io.hpp"

namespace ntklab {

/// Detector thresholds. Bump kReactivationDetectorVersion whenever a default changes.
inline constexpr const char* kReactivationDetectorVersion = "reactivation-v1";
inline constexpr double kDefaultRecoveryFraction = 0.05;

struct ReactivationOptions {
  /// Probe steps making up the pre-switch baseline (one epoch).
  std::size_t baseline_span = 1;
  /// Post-switch records searched for the minimum; 0 uses baseline_span.
  std::size_t window = 0;
  /// Absolute tolerance; when unset, recovery_fraction * baseline is used.
  std::optional<double> recovery_tolerance;
  double recovery_fraction = kDefaultRecoveryFraction;
};

struct ReactivationStats {
  /// Global step of the last record trained on the old task.
  std::size_t switch_step = 0;
  std::size_t from_task = 0;
  std::size_t to_task = 0;
  double pre_switch_baseline = 0.0;
  double min_post_switch = 0.0;
  std::size_t min_step = 0;
  /// Signed; negative means lambda_max rose after the switch.
  double drop_depth = 0.0;
  double recovery_tolerance = 0.0;
  /// Steps from switch_step until lambda_max is back within tolerance; nullopt if unrecovered.
  std::optional<std::size_t> recovery_steps;
  double velocity_at_switch = 0.0;
  double pre_switch_velocity = 0.0;
  double velocity_spike_ratio = 1.0;
  double peak_velocity = 0.0;
  double peak_distance_jump = 0.0;
  /// The run ended before the full window was observed.
  bool partial = false;
};

/// One entry per task boundary. Throws ConfigError when there is no boundary or a boundary
/// has less than baseline_span pre-switch records.
std::vector<ReactivationStats> reactivation_stats(const std::vector<MetricRecord>& records,
                                                  const ReactivationOptions& options);

/// Spearman rank correlation with average ranks for ties; 0 if either side is constant.
double spearman_correlation(std::span<const double> x, std::span<const double> y);

struct TrendReport {
  std::size_t levels = 0;
  double drop_correlation = 0.0;
  double distance_jump_correlation = 0.0;
};

/// Needs at least four similarity levels.
TrendReport similarity_trend(const std::vector<std::pair<double, ReactivationStats>>& stats);

/// Machine-readable form: `switch.<i>.<field> = value`.
KeyValues stats_to_key_values(const std::vector<ReactivationStats>& stats);

struct PlotSeries {
  std::string label;
  std::vector<MetricRecord> records;
};

/// Reads each CSV and labels it by its parent directory when that looks like `key=value`,
/// otherwise by the file stem.
std::vector<PlotSeries> load_plot_series(std::span<const std::filesystem::path> csvs);

/// Renders one metric as an SVG line chart with vertical markers at task switches.
/// Throws UsageError for an unknown metric and DataError for a series without records.
std::string render_metric_svg(const std::vector<PlotSeries>& series, const std::string& metric);

void plot_metrics(std::span<const std::filesystem::path> csvs, const std::string& metric,
                  const std::filesystem::path& out);

}  // namespace ntklab
