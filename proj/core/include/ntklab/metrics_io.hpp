#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ntklab {

/// One probe step's measurements. Optional fields are written as empty CSV cells.
/// A poisoned record (run diverged) carries NaN in lambda_max and train_loss.
struct MetricRecord {
  std::size_t global_step = 0;
  std::size_t task_index = 0;
  std::size_t iteration = 0;
  double lambda_max = 0.0;
  double kernel_distance_from_init = 0.0;
  std::optional<double> kernel_distance_from_prev;
  std::optional<double> velocity;
  double alignment = 0.0;
  std::optional<double> train_loss;
  double task1_test_accuracy = 0.0;

  bool poisoned() const;

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

/// First line of every metrics CSV; bump the version when the column set changes.
inline constexpr const char* kMetricsVersionLine = "# ntklab-metrics v1";
inline constexpr const char* kMetricsColumns =
    "global_step,task_index,iteration,lambda_max,kernel_distance_from_init,kernel_distance_from_prev,"
    "velocity,alignment,train_loss,task1_test_accuracy";

const std::vector<std::string>& metric_names();

std::string format_metrics_csv(const std::vector<MetricRecord>& records);
std::vector<MetricRecord> parse_metrics_csv(const std::string& text);

void write_metrics_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& path);
/// Throws VersionError when either header line differs from this build's.
std::vector<MetricRecord> read_metrics_csv(const std::filesystem::path& path);

/// Numeric value of a named column; nullopt for an empty optional cell.
std::optional<double> metric_value(const MetricRecord& r, const std::string& name);

}  // namespace ntklab
