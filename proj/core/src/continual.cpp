#include "ntklab/continual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ntklab/error.hpp"

namespace ntklab {

namespace {

constexpr double kWeightSumTolerance = 1e-12;

}  // namespace

TaskDistribution::TaskDistribution(std::map<std::size_t, double> weights) {
  double total = 0.0;
  for (const auto& [cls, w] : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("class weight for class " + std::to_string(cls) + " must be finite and non-negative");
    }
    total += w;
    if (w > 0.0) weights_.emplace(cls, w);
  }
  if (weights_.empty()) throw ConfigError("task distribution has empty support");
  if (std::abs(total - 1.0) > kWeightSumTolerance) {
    throw ConfigError("class weights sum to " + std::to_string(total) + ", expected 1");
  }
}

TaskDistribution TaskDistribution::uniform(std::span<const std::size_t> classes) {
  if (classes.empty()) throw ConfigError("uniform distribution over no classes");
  std::map<std::size_t, double> w;
  for (std::size_t c : classes) w[c] = 0.0;
  const double share = 1.0 / static_cast<double>(w.size());
  for (auto& [cls, v] : w) v = share;
  return TaskDistribution(std::move(w));
}

double TaskDistribution::weight(std::size_t cls) const {
  auto it = weights_.find(cls);
  return it == weights_.end() ? 0.0 : it->second;
}

std::vector<std::size_t> TaskDistribution::support() const {
  std::vector<std::size_t> out;
  out.reserve(weights_.size());
  for (const auto& [cls, w] : weights_) out.push_back(cls);
  return out;
}

TaskDistribution window_family(std::size_t start, std::size_t width, std::size_t num_classes) {
  if (width == 0) throw ConfigError("window width must be at least 1");
  if (start + width > num_classes) {
    throw ConfigError("class window [" + std::to_string(start) + ", " + std::to_string(start + width - 1) +
                      "] exceeds the dataset's " + std::to_string(num_classes) + " classes");
  }
  std::vector<std::size_t> classes(width);
  std::iota(classes.begin(), classes.end(), start);
  return TaskDistribution::uniform(classes);
}

TaskDistribution mixture_family(double alpha, std::span<const std::size_t> base0, std::span<const std::size_t> base1) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("mixture coefficient alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
  if (base0.empty() || base1.empty()) throw ConfigError("mixture base sets must be non-empty");
  std::map<std::size_t, double> w;
  for (std::size_t c : base0) w[c] += (1.0 - alpha) / static_cast<double>(base0.size());
  for (std::size_t c : base1) {
    if (std::find(base0.begin(), base0.end(), c) != base0.end()) {
      throw ConfigError("mixture base sets must be disjoint");
    }
    w[c] += alpha / static_cast<double>(base1.size());
  }
  return TaskDistribution(std::move(w));
}

TaskDistribution mixture_family(double alpha) {
  static constexpr std::size_t base0[] = {0, 1, 2, 3, 4};
  static constexpr std::size_t base1[] = {5, 6, 7, 8, 9};
  return mixture_family(alpha, base0, base1);
}

double jaccard_similarity(const TaskDistribution& a, const TaskDistribution& b) {
  const auto sa = a.support();
  const auto sb = b.support();
  std::vector<std::size_t> inter, uni;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
  std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(uni));
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

double mixture_similarity(double alpha, double beta) {
  if (!(alpha >= 0.0 && alpha <= 1.0 && beta >= 0.0 && beta <= 1.0)) {
    throw ConfigError("mixture coefficients must lie in [0, 1]");
  }
  return 1.0 - std::abs(alpha - beta);
}

void TaskSchedule::validate() const {
  if (tasks.empty()) throw ConfigError("task schedule needs at least one task");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].epochs == 0) throw ConfigError("task " + std::to_string(i) + " has zero epochs");
  }
}

std::string to_string(SamplingMode mode) { return mode == SamplingMode::iid ? "iid" : "epoch_pools"; }

SamplerState::SamplerState(const Dataset& data, std::uint64_t seed, SamplingMode mode)
    : rng_(seed), mode_(mode), dataset_size_(data.size()), pools_(data.class_index()), cursors_(pools_.size(), 0) {
  if (mode_ == SamplingMode::epoch_pools) {
    for (auto& pool : pools_) std::shuffle(pool.begin(), pool.end(), rng_);
  }
}

std::size_t SamplerState::draw_from_class(std::size_t cls) {
  if (cls >= pools_.size() || pools_[cls].empty()) {
    throw DataError("dataset has no samples of class " + std::to_string(cls));
  }
  auto& pool = pools_[cls];
  if (mode_ == SamplingMode::iid) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    return pool[pick(rng_)];
  }
  std::size_t& cursor = cursors_[cls];
  if (cursor == pool.size()) {
    std::shuffle(pool.begin(), pool.end(), rng_);
    cursor = 0;
    ++wraps_;
  }
  return pool[cursor++];
}

std::vector<std::size_t> sample_batch(const TaskDistribution& dist, const Dataset& data, std::size_t batch,
                                      SamplerState& state) {
  if (data.size() != state.dataset_size()) throw UsageError("sampler state belongs to a different dataset");
  const auto support = dist.support();
  std::vector<double> weights;
  weights.reserve(support.size());
  for (std::size_t c : support) {
    if (c >= data.num_classes) {
      throw DataError("task class " + std::to_string(c) + " not present in a dataset of " +
                      std::to_string(data.num_classes) + " classes");
    }
    weights.push_back(dist.weight(c));
  }
  std::discrete_distribution<std::size_t> pick_class(weights.begin(), weights.end());
  std::vector<std::size_t> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(state.draw_from_class(support[pick_class(state.rng())]));
  return out;
}

}  // namespace ntklab
