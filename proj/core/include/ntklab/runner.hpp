#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ntklab/config.hpp"
#include "ntklab/dataset.hpp"
#include "ntklab/gram.hpp"
#include "ntklab/metrics_io.hpp"
#include "ntklab/network.hpp"
#include "ntklab/probe.hpp"

namespace ntklab {

inline constexpr const char* kArtifactVersion = "ntklab 0.1.0";

struct PreparedData {
  Dataset train;
  Dataset test;
  std::string id;
};

/// Loads or generates the train/test splits described by `data`.
PreparedData prepare_data(const DataConfig& data);

/// Iteration bookkeeping derived from the config and the task-1 data volume.
struct RunLayout {
  /// Iterations per epoch: ceil(task-1 train samples / batch), rounded up to a whole number
  /// of probe steps. Every task uses the same count so that mixtures get equal budgets.
  std::size_t iterations_per_epoch = 0;
  std::size_t probe_steps_per_epoch = 0;
  std::vector<std::size_t> task_iterations;
  /// Global probe step at the end of each task.
  std::vector<std::size_t> task_end_steps;
  std::size_t total_iterations = 0;
};

RunLayout plan_run(const ExperimentConfig& cfg, const TaskSchedule& schedule, const Dataset& train);

TaskSchedule build_schedule(const ExperimentConfig& cfg, const PreparedData& data);

/// Model, initial parameters and frozen probe set exactly as a run with `cfg` starts.
struct InitialState {
  Architecture arch;
  ParamVector params;
  ProbeSet probe;
};

InitialState initial_state(const ExperimentConfig& cfg, const PreparedData& data);

enum class RunStatus { completed, diverged };

struct RunResult {
  std::vector<MetricRecord> records;
  RunStatus status = RunStatus::completed;
  std::string failure;
  RunLayout layout;
  double learning_rate = 0.0;
  std::size_t param_count = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t probe_hash = 0;
  /// Probe-set digest recomputed at every record.
  std::vector<std::uint64_t> probe_hashes;
  std::size_t sampler_wraps = 0;
  ParamVector final_params;
};

/// State visible to observers at each probe step.
struct ProbeContext {
  const Architecture& arch;
  const ParamVector& params;
  const ProbeSet& probe;
  const GramMatrix& kernel;
  const MetricRecord& record;
};

struct RunHooks {
  std::function<void(const ProbeContext&)> on_probe;
  /// Free-form progress lines (task boundaries, sampler reshuffles).
  std::function<void(const std::string&)> log;
};

/// Trains through the schedule with plain SGD, theta <- theta - lr * mean batch gradient, and
/// measures the empirical NTK on the frozen task-1 probe set every `probe.cadence` iterations.
/// A NumericalError during training ends the run with status diverged and a poisoned record.
RunResult run_experiment(const ExperimentConfig& cfg, const PreparedData& data, const RunHooks& hooks = {});
RunResult run_experiment(const ExperimentConfig& cfg, const RunHooks& hooks = {});

/// run.meta contents: version, hashes, scalarization, centering and the run layout.
KeyValues run_meta(const ExperimentConfig& cfg, const RunResult& result);

/// Writes metrics.csv, run.meta and config.resolved into `dir` (created if missing).
void write_run_outputs(const ExperimentConfig& cfg, const RunResult& result, const std::filesystem::path& dir);

/// Deterministic sub-seed for independent random streams of one run.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace ntklab
