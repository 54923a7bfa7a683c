#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ntklab/continual.hpp"
#include "ntklab/dataset.hpp"
#include "ntklab/keyvalue.hpp"
#include "ntklab/models.hpp"
#include "ntklab/network.hpp"
#include "ntklab/probe.hpp"

namespace ntklab {

enum class DataSource { synthetic, cifar };
enum class LabelKernel { one_hot, signed_binary };

/// One schedule entry as written in a config: `window:START:WIDTH`, `mixture:ALPHA` or
/// `classes:A+B+...`, optionally suffixed with `@EPOCHS`.
struct TaskEntry {
  enum class Kind { window, mixture, classes };
  Kind kind = Kind::window;
  std::size_t start = 0;
  std::size_t width = 1;
  double alpha = 0.0;
  std::vector<std::size_t> classes;
  std::optional<std::size_t> epochs;

  TaskDistribution distribution(std::size_t num_classes) const;
  std::string to_string() const;
  static TaskEntry parse(const std::string& text);

  friend bool operator==(const TaskEntry&, const TaskEntry&) = default;
};

struct DataConfig {
  DataSource source = DataSource::synthetic;
  SyntheticSpec synthetic;
  std::size_t test_per_class = 50;
  std::vector<std::filesystem::path> train_files;
  std::vector<std::filesystem::path> test_files;
  /// Keep at most this many images per class from CIFAR files (0 keeps all).
  std::size_t cifar_per_class = 0;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct ProbeConfig {
  std::size_t size = 32;
  Scalarization scalarization = Scalarization::true_class_logit;
  /// Training iterations between probe steps.
  std::size_t cadence = 10;
  /// Velocity gap in probe steps.
  std::size_t velocity_dt = 1;
  bool centered = false;
  LabelKernel label_kernel = LabelKernel::one_hot;

  friend bool operator==(const ProbeConfig&, const ProbeConfig&) = default;
};

/// Complete, seedable description of a run. Two equal configs produce identical metric streams.
struct ExperimentConfig {
  ModelSpec model;            // input_shape and num_classes are filled from the dataset
  ParamRegime regime;
  std::vector<TaskEntry> schedule;
  std::size_t epochs_per_task = 10;
  std::size_t batch_size = 32;
  LossKind loss = LossKind::cross_entropy;
  SamplingMode sampling = SamplingMode::epoch_pools;
  ProbeConfig probe;
  DataConfig data;
  /// Cap on held-out task-1 samples used for test accuracy (0 uses all).
  std::size_t eval_max_test = 500;
  /// Stop after this many training iterations (truncates the schedule).
  std::optional<std::size_t> iteration_limit;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/default";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

  /// Checks ranges that do not need the dataset; throws ConfigError.
  void validate() const;
};

/// Builds a config from parsed entries, starting from defaults. Unknown keys are errors.
ExperimentConfig config_from_key_values(const KeyValues& entries);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies one `key = value` override on top of an existing config.
void apply_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Canonical rendering of every key, in a fixed order; parsing it gives back an equal config.
KeyValues config_to_key_values(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

/// Every recognised config key, in canonical order.
const std::vector<std::string>& config_keys();

}  // namespace ntklab
