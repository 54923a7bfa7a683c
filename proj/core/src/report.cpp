#include "ntklab/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ntklab/error.hpp"

namespace ntklab {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::vector<ReactivationStats> reactivation_stats(const std::vector<MetricRecord>& records,
                                                  const ReactivationOptions& options) {
  if (options.baseline_span == 0) throw ConfigError("baseline span must be positive");
  const std::size_t window = options.window == 0 ? options.baseline_span : options.window;

  // Index of the first record of each task run.
  std::vector<std::size_t> starts{0};
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].poisoned()) break;
    if (records[i].task_index != records[i - 1].task_index) starts.push_back(i);
  }
  if (starts.size() < 2) throw ConfigError("records contain no task boundary");

  std::vector<ReactivationStats> out;
  for (std::size_t b = 1; b < starts.size(); ++b) {
    const std::size_t first = starts[b];
    const std::size_t last_old = first - 1;
    const std::size_t task_end = b + 1 < starts.size() ? starts[b + 1] - 1 : records.size() - 1;
    // The step-0 record measures the initial kernel and does not count towards the baseline.
    const std::size_t old_begin = starts[b - 1] == 0 ? 1 : starts[b - 1];
    if (last_old + 1 < old_begin + options.baseline_span) {
      throw ConfigError("task boundary at step " + std::to_string(records[last_old].global_step) +
                        " has fewer than " + std::to_string(options.baseline_span) + " pre-switch records");
    }

    ReactivationStats s;
    s.switch_step = records[last_old].global_step;
    s.from_task = records[last_old].task_index;
    s.to_task = records[first].task_index;

    std::vector<double> base_lambda, base_velocity;
    for (std::size_t i = last_old + 1 - options.baseline_span; i <= last_old; ++i) {
      base_lambda.push_back(records[i].lambda_max);
      if (records[i].velocity) base_velocity.push_back(*records[i].velocity);
    }
    s.pre_switch_baseline = median(base_lambda);
    s.pre_switch_velocity = base_velocity.empty() ? 0.0 : median(base_velocity);
    s.recovery_tolerance = options.recovery_tolerance.value_or(options.recovery_fraction * s.pre_switch_baseline);

    std::size_t window_end = first + window - 1;
    if (window_end > task_end) {
      s.partial = true;
      window_end = task_end;
    }
    std::size_t argmin = first;
    for (std::size_t i = first; i <= window_end; ++i) {
      const MetricRecord& r = records[i];
      if (r.lambda_max < records[argmin].lambda_max) argmin = i;
      s.peak_velocity = std::max(s.peak_velocity, r.velocity.value_or(0.0));
      s.peak_distance_jump = std::max(s.peak_distance_jump, r.kernel_distance_from_prev.value_or(0.0));
    }
    s.min_post_switch = records[argmin].lambda_max;
    s.min_step = records[argmin].global_step;
    s.drop_depth = s.pre_switch_baseline - s.min_post_switch;

    const double threshold = s.pre_switch_baseline - s.recovery_tolerance;
    if (s.min_post_switch >= threshold) {
      s.recovery_steps = 0;
    } else {
      for (std::size_t i = argmin; i <= task_end; ++i) {
        if (records[i].lambda_max >= threshold) {
          s.recovery_steps = records[i].global_step - s.switch_step;
          break;
        }
      }
    }

    s.velocity_at_switch = records[first].velocity.value_or(0.0);
    if (s.pre_switch_velocity > 0.0) {
      s.velocity_spike_ratio = s.velocity_at_switch / s.pre_switch_velocity;
    } else {
      s.velocity_spike_ratio = s.velocity_at_switch > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    }
    out.push_back(s);
  }
  return out;
}

double spearman_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("rank correlation needs equal-length inputs");
  if (x.size() < 2) throw ConfigError("rank correlation needs at least two points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

TrendReport similarity_trend(const std::vector<std::pair<double, ReactivationStats>>& stats) {
  std::vector<double> sim, drop, jump;
  for (const auto& [s, st] : stats) {
    sim.push_back(s);
    drop.push_back(st.drop_depth);
    jump.push_back(st.peak_distance_jump);
  }
  std::vector<double> levels = sim;
  std::sort(levels.begin(), levels.end());
  const auto distinct = static_cast<std::size_t>(std::unique(levels.begin(), levels.end()) - levels.begin());
  if (distinct < 4) {
    throw ConfigError("similarity trend needs at least 4 similarity levels, got " + std::to_string(distinct));
  }
  TrendReport r;
  r.levels = distinct;
  r.drop_correlation = spearman_correlation(sim, drop);
  r.distance_jump_correlation = spearman_correlation(sim, jump);
  return r;
}

KeyValues stats_to_key_values(const std::vector<ReactivationStats>& stats) {
  KeyValues kv;
  kv.emplace_back("detector", kReactivationDetectorVersion);
  kv.emplace_back("switches", std::to_string(stats.size()));
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const ReactivationStats& s = stats[i];
    const std::string p = "switch." + std::to_string(i) + ".";
    kv.emplace_back(p + "switch_step", std::to_string(s.switch_step));
    kv.emplace_back(p + "from_task", std::to_string(s.from_task));
    kv.emplace_back(p + "to_task", std::to_string(s.to_task));
    kv.emplace_back(p + "pre_switch_baseline", format_double(s.pre_switch_baseline));
    kv.emplace_back(p + "min_post_switch", format_double(s.min_post_switch));
    kv.emplace_back(p + "min_step", std::to_string(s.min_step));
    kv.emplace_back(p + "drop_depth", format_double(s.drop_depth));
    kv.emplace_back(p + "recovery_tolerance", format_double(s.recovery_tolerance));
    kv.emplace_back(p + "recovery_steps", s.recovery_steps ? std::to_string(*s.recovery_steps) : "unrecovered");
    kv.emplace_back(p + "velocity_at_switch", format_double(s.velocity_at_switch));
    kv.emplace_back(p + "pre_switch_velocity", format_double(s.pre_switch_velocity));
    kv.emplace_back(p + "velocity_spike_ratio", format_double(s.velocity_spike_ratio));
    kv.emplace_back(p + "peak_velocity", format_double(s.peak_velocity));
    kv.emplace_back(p + "peak_distance_jump", format_double(s.peak_distance_jump));
    kv.emplace_back(p + "partial", s.partial ? "true" : "false");
  }
  return kv;
}

}  // namespace ntklab
