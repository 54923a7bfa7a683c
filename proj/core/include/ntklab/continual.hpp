#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ntklab/dataset.hpp"

namespace ntklab {

/// A task's data law: a mixture over class labels with weights summing to one.
class TaskDistribution {
 public:
  explicit TaskDistribution(std::map<std::size_t, double> weights);
  static TaskDistribution uniform(std::span<const std::size_t> classes);

  const std::map<std::size_t, double>& weights() const { return weights_; }
  double weight(std::size_t cls) const;
  /// Classes with strictly positive weight, ascending.
  std::vector<std::size_t> support() const;
  std::size_t max_class() const { return weights_.rbegin()->first; }

  friend bool operator==(const TaskDistribution&, const TaskDistribution&) = default;

 private:
  std::map<std::size_t, double> weights_;
};

/// Uniform over the `width` consecutive classes start, ..., start + width - 1.
TaskDistribution window_family(std::size_t start, std::size_t width, std::size_t num_classes);

/// (1 - alpha) * uniform(base0) + alpha * uniform(base1).
TaskDistribution mixture_family(double alpha, std::span<const std::size_t> base0,
                                std::span<const std::size_t> base1);
/// Mixture over the fixed base sets {0..4} and {5..9}.
TaskDistribution mixture_family(double alpha);

/// |supp a intersect supp b| / |supp a union supp b|.
double jaccard_similarity(const TaskDistribution& a, const TaskDistribution& b);

/// 1 - |alpha - beta| for two members of the mixture family.
double mixture_similarity(double alpha, double beta);

struct ScheduledTask {
  TaskDistribution distribution;
  std::size_t epochs = 1;
};

struct TaskSchedule {
  std::vector<ScheduledTask> tasks;
  std::string dataset_id;

  /// Throws ConfigError unless there is at least one task and every task has epochs >= 1.
  void validate() const;
};

enum class SamplingMode { epoch_pools, iid };

std::string to_string(SamplingMode mode);

/// Sampler state for one dataset: the RNG plus a shuffled pool per class. With epoch_pools,
/// each class's images are drawn without replacement and the pool is reshuffled once used up.
class SamplerState {
 public:
  SamplerState(const Dataset& data, std::uint64_t seed, SamplingMode mode = SamplingMode::epoch_pools);

  std::mt19937_64& rng() { return rng_; }
  SamplingMode mode() const { return mode_; }
  /// Number of times a class pool was exhausted and reshuffled.
  std::size_t wraps() const { return wraps_; }
  std::size_t dataset_size() const { return dataset_size_; }

  std::size_t draw_from_class(std::size_t cls);

 private:
  std::mt19937_64 rng_;
  SamplingMode mode_;
  std::size_t dataset_size_;
  std::vector<std::vector<std::size_t>> pools_;
  std::vector<std::size_t> cursors_;
  std::size_t wraps_ = 0;
};

/// Draws `batch` dataset indices: the class of each is i.i.d. from the task weights, the image
/// is taken from that class's pool.
std::vector<std::size_t> sample_batch(const TaskDistribution& dist, const Dataset& data, std::size_t batch,
                                      SamplerState& state);

}  // namespace ntklab
