// ntklab command-line driver: training runs, sweeps, reports and oracle checks.

#include <CLI11.hpp>

#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ntklab/config.hpp"
#include "ntklab/error.hpp"
#include "ntklab/gram.hpp"
#include "ntklab/keyvalue.hpp"
#include "ntklab/oracle.hpp"
#include "ntklab/probe.hpp"
#include "ntklab/report.hpp"
#include "ntklab/runner.hpp"

namespace fs = std::filesystem;
using namespace ntklab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
  bool quiet = false;
};

ExperimentConfig load_with_overrides(const RunArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_config_value(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  if (a.seed) cfg.seed = *a.seed;
  if (!a.out.empty()) cfg.output_dir = a.out;
  cfg.validate();
  return cfg;
}

RunHooks logging_hooks(bool quiet) {
  RunHooks hooks;
  if (!quiet) hooks.log = [](const std::string& line) { std::cerr << line << '\n'; };
  return hooks;
}

int run_one(const ExperimentConfig& cfg, bool quiet) {
  const RunResult result = run_experiment(cfg, logging_hooks(quiet));
  write_run_outputs(cfg, result, cfg.output_dir);
  std::cout << "wrote " << result.records.size() << " records to " << (cfg.output_dir / "metrics.csv").string()
            << '\n';
  if (result.status == RunStatus::diverged) {
    std::cerr << "error: run diverged: " << result.failure << '\n';
    return kExitDiverged;
  }
  return kExitOk;
}

int cmd_run(const RunArgs& a) { return run_one(load_with_overrides(a), a.quiet); }

int cmd_sweep(const RunArgs& a, const std::string& vary) {
  const auto eq = vary.find('=');
  if (eq == std::string::npos) throw ConfigError("--vary expects key=v1,v2,..., got '" + vary + "'");
  const std::string key = trim(vary.substr(0, eq));
  const auto values = split(vary.substr(eq + 1), ',');
  if (values.empty()) throw ConfigError("--vary lists no values");
  const ExperimentConfig base = load_with_overrides(a);
  int status = kExitOk;
  for (const auto& raw : values) {
    const std::string v = trim(raw);
    ExperimentConfig cfg = base;
    apply_config_value(cfg, key, v);
    cfg.output_dir = base.output_dir / (key + "=" + v);
    cfg.validate();
    if (run_one(cfg, a.quiet) == kExitDiverged) status = kExitDiverged;
  }
  return status;
}

int cmd_plot(const std::string& metric, const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<fs::path> paths(inputs.begin(), inputs.end());
  plot_metrics(paths, metric, out);
  std::cout << "wrote " << out << '\n';
  return kExitOk;
}

int cmd_stats(const std::string& in, std::optional<std::size_t> window, std::optional<std::size_t> span,
              std::optional<double> tol, std::optional<double> tol_frac, const std::string& out) {
  ReactivationOptions opts;
  if (span) {
    opts.baseline_span = *span;
  } else {
    const fs::path meta = fs::path(in).parent_path() / "run.meta";
    if (!fs::exists(meta)) throw ConfigError("no run.meta next to " + in + "; pass --baseline-span");
    const auto kv = read_key_values(meta);
    const auto v = find_value(kv, "probe_steps_per_epoch");
    if (!v) throw ConfigError(meta.string() + " lacks probe_steps_per_epoch; pass --baseline-span");
    opts.baseline_span = std::stoul(*v);
  }
  if (window) opts.window = *window;
  opts.recovery_tolerance = tol;
  if (tol_frac) opts.recovery_fraction = *tol_frac;
  const auto stats = reactivation_stats(read_metrics_csv(in), opts);
  for (const auto& s : stats) {
    if (s.partial) std::cerr << "warning: switch at step " << s.switch_step << " has a partial window\n";
  }
  const std::string text = format_key_values(stats_to_key_values(stats));
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream(out) << text;
    std::cout << "wrote " << out << '\n';
  }
  return kExitOk;
}

InitialState oracle_state(const RunArgs& a, PreparedData& data) {
  const ExperimentConfig cfg = load_with_overrides(a);
  data = prepare_data(cfg.data);
  return initial_state(cfg, data);
}

int cmd_ntk_check(const RunArgs& a) {
  PreparedData data;
  const InitialState s = oracle_state(a, data);
  const GramMatrix fast = empirical_ntk(s.arch, s.params, s.probe);
  const GramMatrix slow = brute_force_ntk(s.arch, s.params, s.probe);
  const double dev = max_relative_deviation(fast.matrix(), slow.matrix());
  std::printf("params=%zu probe=%zu max_relative_deviation=%.3e\n", s.params.dim(), s.probe.size(), dev);
  return kExitOk;
}

int cmd_lazy_check(const RunArgs& a, double eta, std::size_t steps) {
  PreparedData data;
  const InitialState s = oracle_state(a, data);
  const std::vector<double> targets(s.probe.size(), 1.0);
  const LazyCheckReport r = lazy_training_check(s.arch, s.params, s.probe, targets, eta, steps);
  std::printf("step,residual_norm,predicted_norm,deviation\n");
  for (std::size_t t = 0; t < r.deviation.size(); ++t) {
    std::printf("%zu,%.10g,%.10g,%.10g\n", t, r.actual[t].e.norm(), r.predicted[t].e.norm(), r.deviation[t]);
  }
  std::printf("# max_deviation=%.6g final_deviation=%.6g\n", r.max_deviation, r.final_deviation);
  return kExitOk;
}

int cmd_eigenmodes(const RunArgs& a, double eta, std::size_t steps) {
  PreparedData data;
  const InitialState s = oracle_state(a, data);
  const Spectrum spec = eigendecompose(empirical_ntk(s.arch, s.params, s.probe));
  std::printf("mode,eigenvalue,decay_factor,factor_after_%zu_steps\n", steps);
  for (Eigen::Index i = 0; i < spec.eigenvalues.size(); ++i) {
    const double f = 1.0 - eta * spec.eigenvalues(i);
    std::printf("%td,%.10g,%.10g,%.10g\n", i, spec.eigenvalues(i), f, std::pow(f, static_cast<double>(steps)));
  }
  if (spec.eigenvalues(0) > 0.0) std::printf("# stable step size below %.6g\n", 2.0 / spec.eigenvalues(0));
  return kExitOk;
}

void add_config_options(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--config", a.config, "key = value config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--set", a.sets, "override one config key (key=value), repeatable");
  cmd->add_option("--seed", a.seed, "override the config seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ntklab: NTK dynamics under task switches"};
  app.require_subcommand(1);

  RunArgs args;
  auto* run = app.add_subcommand("run", "train one config and write metrics.csv, run.meta, config.resolved");
  add_config_options(run, args);
  run->add_option("--out", args.out, "output directory (overrides config `out`)");
  run->add_flag("--quiet", args.quiet, "suppress progress lines");

  std::string vary;
  auto* sweep = app.add_subcommand("sweep", "run one config per value of a key; outputs go to OUT/key=value");
  add_config_options(sweep, args);
  sweep->add_option("--vary", vary, "key=v1,v2,...")->required();
  sweep->add_option("--out", args.out, "parent output directory");
  sweep->add_flag("--quiet", args.quiet, "suppress progress lines");

  auto* report = app.add_subcommand("report", "plots and reactivation statistics");
  report->require_subcommand(1);
  std::string metric, plot_out;
  std::vector<std::string> plot_in;
  auto* plot = report->add_subcommand("plot", "SVG line chart of one metric");
  plot->add_option("--metric", metric, "column name")->required();
  plot->add_option("--in", plot_in, "metrics CSV files")->required();
  plot->add_option("--out", plot_out, "output .svg")->required();

  std::string stats_in, stats_out;
  std::optional<std::size_t> window, span;
  std::optional<double> tol, tol_frac;
  auto* stats = report->add_subcommand("stats", "per-switch drop, recovery and velocity spike");
  stats->add_option("--in", stats_in, "metrics CSV")->required()->check(CLI::ExistingFile);
  stats->add_option("--window", window, "post-switch probe steps searched for the minimum (default one epoch)");
  stats->add_option("--baseline-span", span, "pre-switch probe steps in the baseline (default from run.meta)");
  stats->add_option("--tol", tol, "absolute recovery tolerance");
  stats->add_option("--tol-frac", tol_frac, "recovery tolerance as a fraction of the baseline (default 0.05)");
  stats->add_option("--out", stats_out, "write the key = value stats here instead of stdout");

  auto* oracle = app.add_subcommand("oracle", "independent checks on a config's initial model");
  oracle->require_subcommand(1);
  double eta = 0.01;
  std::size_t steps = 100;
  auto* ntk_check = oracle->add_subcommand("ntk-check", "fast vs brute-force NTK at initialization");
  add_config_options(ntk_check, args);
  auto* lazy = oracle->add_subcommand("lazy-check", "full-batch GD on the probe set vs the frozen-kernel prediction");
  add_config_options(lazy, args);
  lazy->add_option("--eta", eta, "step size");
  lazy->add_option("--steps", steps, "number of steps");
  auto* modes = oracle->add_subcommand("eigenmodes", "initial NTK spectrum and per-mode decay factors");
  add_config_options(modes, args);
  modes->add_option("--eta", eta, "step size");
  modes->add_option("--steps", steps, "number of steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(args);
    if (sweep->parsed()) return cmd_sweep(args, vary);
    if (plot->parsed()) return cmd_plot(metric, plot_in, plot_out);
    if (stats->parsed()) return cmd_stats(stats_in, window, span, tol, tol_frac, stats_out);
    if (ntk_check->parsed()) return cmd_ntk_check(args);
    if (lazy->parsed()) return cmd_lazy_check(args, eta, steps);
    if (modes->parsed()) return cmd_eigenmodes(args, eta, steps);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
