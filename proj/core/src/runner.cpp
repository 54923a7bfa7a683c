#include "ntklab/runner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>

#include "ntklab/error.hpp"
#include "ntklab/hash.hpp"
#include "ntklab/models.hpp"

namespace ntklab {

namespace {

enum Stream : std::uint64_t { kInitStream = 1, kProbeStream = 2, kTrainStream = 3 };

Dataset cap_per_class(const Dataset& data, std::size_t per_class) {
  if (per_class == 0) return data;
  Dataset out;
  out.image_shape = data.image_shape;
  out.num_classes = data.num_classes;
  out.split = data.split;
  std::vector<std::size_t> taken(data.num_classes, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (taken[data.labels[i]]++ >= per_class) continue;
    out.labels.push_back(data.labels[i]);
    auto img = data.image(i);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
  }
  return out;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Class index for cross-entropy, one-hot vector for squared loss.
Tensor training_target(LossKind loss, std::size_t label, std::size_t num_classes) {
  if (loss == LossKind::cross_entropy) return class_target(label);
  std::vector<double> y(num_classes, 0.0);
  y.at(label) = 1.0;
  return Tensor({num_classes}, std::move(y));
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + stream * 0xBF58476D1CE4E5B9ULL + 0x94D049BB133111EBULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

PreparedData prepare_data(const DataConfig& data) {
  PreparedData out;
  if (data.source == DataSource::synthetic) {
    out.train = synthetic_dataset(data.synthetic, Split::train);
    SyntheticSpec test_spec = data.synthetic;
    test_spec.per_class = data.test_per_class;
    out.test = synthetic_dataset(test_spec, Split::test);
    const auto& s = data.synthetic;
    out.id = "synthetic:classes=" + std::to_string(s.classes) + ":per_class=" + std::to_string(s.per_class) +
             ":shape=" + shape_to_string(s.image_shape) + ":noise=" + format_double(s.noise) +
             ":seed=" + std::to_string(s.seed);
  } else {
    out.train = cap_per_class(load_cifar_binary(data.train_files, Split::train), data.cifar_per_class);
    if (!data.test_files.empty()) {
      out.test = cap_per_class(load_cifar_binary(data.test_files, Split::test), data.test_per_class);
    }
    out.id = "cifar:";
    for (const auto& p : data.train_files) out.id += p.filename().string() + ";";
  }
  return out;
}

TaskSchedule build_schedule(const ExperimentConfig& cfg, const PreparedData& data) {
  TaskSchedule schedule;
  schedule.dataset_id = data.id;
  for (const auto& entry : cfg.schedule) {
    schedule.tasks.push_back({entry.distribution(data.train.num_classes), entry.epochs.value_or(cfg.epochs_per_task)});
  }
  schedule.validate();
  return schedule;
}

RunLayout plan_run(const ExperimentConfig& cfg, const TaskSchedule& schedule, const Dataset& train) {
  schedule.validate();
  const auto support = schedule.tasks.front().distribution.support();
  std::size_t task1_samples = 0;
  for (std::size_t label : train.labels) {
    if (std::binary_search(support.begin(), support.end(), label)) ++task1_samples;
  }
  if (task1_samples == 0) throw ConfigError("training data has no samples of the first task's classes");

  RunLayout layout;
  const std::size_t raw = (task1_samples + cfg.batch_size - 1) / cfg.batch_size;
  layout.iterations_per_epoch = (raw + cfg.probe.cadence - 1) / cfg.probe.cadence * cfg.probe.cadence;
  layout.probe_steps_per_epoch = layout.iterations_per_epoch / cfg.probe.cadence;
  std::size_t remaining = cfg.iteration_limit.value_or(static_cast<std::size_t>(-1));
  for (const auto& task : schedule.tasks) {
    const std::size_t planned = task.epochs * layout.iterations_per_epoch;
    const std::size_t iters = std::min(planned, remaining);
    remaining -= iters;
    layout.task_iterations.push_back(iters);
    layout.total_iterations += iters;
    layout.task_end_steps.push_back(layout.total_iterations / cfg.probe.cadence);
  }
  return layout;
}

InitialState initial_state(const ExperimentConfig& cfg, const PreparedData& data) {
  const TaskSchedule schedule = build_schedule(cfg, data);
  ModelSpec spec = cfg.model;
  spec.input_shape = data.train.image_shape;
  spec.num_classes = data.train.num_classes;
  Architecture arch = build_architecture(spec, cfg.regime.init);
  ParamVector params = initialize(arch, cfg.regime.init, derive_seed(cfg.seed, kInitStream));

  // Probe set: drawn once from the first task, before any training.
  SamplerState probe_sampler(data.train, derive_seed(cfg.seed, kProbeStream), SamplingMode::epoch_pools);
  std::vector<ProbeSample> samples;
  for (std::size_t idx : sample_batch(schedule.tasks.front().distribution, data.train, cfg.probe.size, probe_sampler)) {
    samples.push_back({data.train.tensor(idx), data.train.labels[idx]});
  }
  return InitialState{std::move(arch), std::move(params), ProbeSet(std::move(samples), cfg.probe.scalarization)};
}

RunResult run_experiment(const ExperimentConfig& cfg, const RunHooks& hooks) {
  return run_experiment(cfg, prepare_data(cfg.data), hooks);
}

RunResult run_experiment(const ExperimentConfig& cfg, const PreparedData& data, const RunHooks& hooks) {
  cfg.validate();
  auto log = [&](const std::string& msg) {
    if (hooks.log) hooks.log(msg);
  };

  const TaskSchedule schedule = build_schedule(cfg, data);
  InitialState init = initial_state(cfg, data);
  const Architecture& arch = init.arch;
  ParamVector& params = init.params;
  const ProbeSet& probe = init.probe;
  const TaskDistribution& task1 = schedule.tasks.front().distribution;
  const std::size_t num_classes = data.train.num_classes;

  RunResult result;
  result.layout = plan_run(cfg, schedule, data.train);
  result.learning_rate = effective_learning_rate(cfg.regime, cfg.model.width);
  result.param_count = arch.param_count();
  result.config_hash = config_hash(cfg);
  result.probe_hash = probe.hash();

  Eigen::MatrixXd label_matrix;
  if (cfg.probe.label_kernel == LabelKernel::one_hot) {
    label_matrix = one_hot_labels(probe.labels(), num_classes);
  } else {
    const auto support = task1.support();
    if (support.size() != 2) throw ConfigError("signed label kernel needs a binary first task");
    std::vector<double> signs;
    for (std::size_t label : probe.labels()) signs.push_back(label == support[0] ? 1.0 : -1.0);
    label_matrix = signed_labels(signs);
  }

  // Held-out evaluation set: task-1 classes only.
  std::vector<std::size_t> eval_indices;
  {
    const auto support = task1.support();
    for (std::size_t i = 0; i < data.test.size(); ++i) {
      if (cfg.eval_max_test != 0 && eval_indices.size() >= cfg.eval_max_test) break;
      if (std::binary_search(support.begin(), support.end(), data.test.labels[i])) eval_indices.push_back(i);
    }
  }
  auto test_accuracy = [&]() {
    if (eval_indices.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i : eval_indices) {
      const auto fwd = forward(arch, params, data.test.tensor(i));
      if (argmax(fwd.output.data()) == data.test.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(eval_indices.size());
  };

  log("run: " + std::string(kArtifactVersion) + " scalarization=" + to_string(cfg.probe.scalarization) +
      " centered=" + (cfg.probe.centered ? "true" : "false") + " params=" + std::to_string(result.param_count) +
      " lr=" + format_double(result.learning_rate) + " iterations_per_epoch=" +
      std::to_string(result.layout.iterations_per_epoch));

  const bool centered = cfg.probe.centered;
  const GramMatrix initial_kernel = empirical_ntk(arch, params, probe);
  std::deque<GramMatrix> history;  // last velocity_dt kernels, oldest first
  double loss_sum = 0.0;
  std::size_t loss_count = 0;

  auto record_probe = [&](std::size_t iteration, std::size_t task_index, const GramMatrix* precomputed) {
    const GramMatrix kernel = precomputed ? *precomputed : empirical_ntk(arch, params, probe);
    MetricRecord r;
    r.global_step = iteration / cfg.probe.cadence;
    r.task_index = task_index;
    r.iteration = iteration;
    r.lambda_max = max_eigenvalue(kernel);
    r.kernel_distance_from_init = kernel_distance(initial_kernel, kernel, centered);
    if (!history.empty()) r.kernel_distance_from_prev = kernel_distance(history.back(), kernel, centered);
    if (history.size() == cfg.probe.velocity_dt) {
      r.velocity = kernel_velocity(history.front(), kernel, cfg.probe.velocity_dt, centered);
    }
    r.alignment = kernel_alignment(kernel, label_matrix, centered);
    if (loss_count > 0) r.train_loss = loss_sum / static_cast<double>(loss_count);
    r.task1_test_accuracy = test_accuracy();
    loss_sum = 0.0;
    loss_count = 0;

    history.push_back(kernel);
    if (history.size() > cfg.probe.velocity_dt) history.pop_front();
    result.records.push_back(r);
    result.probe_hashes.push_back(probe.hash());
    if (hooks.on_probe) hooks.on_probe(ProbeContext{arch, params, probe, kernel, result.records.back()});
  };

  record_probe(0, 0, &initial_kernel);

  SamplerState sampler(data.train, derive_seed(cfg.seed, kTrainStream), cfg.sampling);
  ParamVector grad = arch.zero_params();
  std::size_t iteration = 0;
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
  std::size_t last_wraps = 0;
  try {
    for (std::size_t t = 0; t < schedule.tasks.size(); ++t) {
      if (result.layout.task_iterations[t] == 0) break;
      log("task " + std::to_string(t) + " starts at iteration " + std::to_string(iteration) + " (probe step " +
          std::to_string(iteration / cfg.probe.cadence) + ")");
      const TaskDistribution& dist = schedule.tasks[t].distribution;
      for (std::size_t k = 0; k < result.layout.task_iterations[t]; ++k) {
        grad.fill(0.0);
        for (std::size_t idx : sample_batch(dist, data.train, cfg.batch_size, sampler)) {
          const auto fwd = forward(arch, params, data.train.tensor(idx));
          const Tensor target = training_target(cfg.loss, data.train.labels[idx], num_classes);
          const auto out = fwd.output.data();
          const double loss = loss_value(cfg.loss, out, target);
          if (!std::isfinite(loss)) throw NumericalError("non-finite training loss at iteration " + std::to_string(iteration));
          loss_sum += loss;
          ++loss_count;
          accumulate_vjp(fwd.tape, loss_output_gradient(cfg.loss, out, target), inv_batch, grad);
        }
        params.axpy(-result.learning_rate, grad);
        if (!params.all_finite()) throw NumericalError("parameters became non-finite at iteration " + std::to_string(iteration));
        ++iteration;
        if (sampler.wraps() != last_wraps) {
          last_wraps = sampler.wraps();
          log("sampler reshuffled a class pool (" + std::to_string(last_wraps) + " so far)");
        }
        if (iteration % cfg.probe.cadence == 0) record_probe(iteration, t, nullptr);
      }
      log("task " + std::to_string(t) + " ends at iteration " + std::to_string(iteration));
    }
  } catch (const NumericalError& e) {
    result.status = RunStatus::diverged;
    result.failure = e.what();
    MetricRecord poisoned;
    poisoned.global_step = result.records.empty() ? 0 : result.records.back().global_step + 1;
    poisoned.iteration = iteration;
    poisoned.task_index = result.records.empty() ? 0 : result.records.back().task_index;
    poisoned.lambda_max = std::nan("");
    poisoned.kernel_distance_from_init = std::nan("");
    poisoned.alignment = std::nan("");
    poisoned.train_loss = std::nan("");
    poisoned.task1_test_accuracy = std::nan("");
    result.records.push_back(poisoned);
    result.probe_hashes.push_back(probe.hash());
    log("run diverged: " + result.failure);
  }
  result.sampler_wraps = sampler.wraps();
  result.final_params = std::move(params);
  return result;
}

KeyValues run_meta(const ExperimentConfig& cfg, const RunResult& result) {
  KeyValues meta;
  meta.emplace_back("artifact_version", kArtifactVersion);
  meta.emplace_back("metrics_version", kMetricsVersionLine);
  meta.emplace_back("config_hash", hex64(result.config_hash));
  meta.emplace_back("probe_hash", hex64(result.probe_hash));
  meta.emplace_back("scalarization", to_string(cfg.probe.scalarization));
  meta.emplace_back("centered", cfg.probe.centered ? "true" : "false");
  meta.emplace_back("probe_size", std::to_string(cfg.probe.size));
  meta.emplace_back("probe_cadence", std::to_string(cfg.probe.cadence));
  meta.emplace_back("velocity_dt", std::to_string(cfg.probe.velocity_dt));
  meta.emplace_back("learning_rate", format_double(result.learning_rate));
  meta.emplace_back("param_count", std::to_string(result.param_count));
  meta.emplace_back("iterations_per_epoch", std::to_string(result.layout.iterations_per_epoch));
  meta.emplace_back("probe_steps_per_epoch", std::to_string(result.layout.probe_steps_per_epoch));
  std::string ends;
  for (std::size_t s : result.layout.task_end_steps) ends += (ends.empty() ? "" : ",") + std::to_string(s);
  meta.emplace_back("task_end_steps", ends);
  meta.emplace_back("status", result.status == RunStatus::completed ? "completed" : "diverged");
  if (!result.failure.empty()) meta.emplace_back("failure", result.failure);
  return meta;
}

void write_run_outputs(const ExperimentConfig& cfg, const RunResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_metrics_csv(result.records, dir / "metrics.csv");
  {
    std::ofstream meta(dir / "run.meta", std::ios::binary);
    meta << format_key_values(run_meta(cfg, result));
  }
  std::ofstream resolved(dir / "config.resolved", std::ios::binary);
  resolved << format_key_values(config_to_key_values(cfg));
}

}  // namespace ntklab
