#include <benchmark/benchmark.h>

#include <random>

#include "ntklab/gram.hpp"
#include "ntklab/models.hpp"
#include "ntklab/oracle.hpp"
#include "ntklab/probe.hpp"

using namespace ntklab;

namespace {

Architecture cnn(std::size_t width) {
  ModelSpec spec;
  spec.width = width;
  return build_architecture(spec, InitScheme::kaiming_normal);
}

ProbeSet gaussian_probe(std::size_t n) {
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ProbeSample> samples;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> px(3 * 8 * 8);
    for (double& v : px) v = u(rng);
    samples.push_back({Tensor({3, 8, 8}, std::move(px)), i % 10});
  }
  return ProbeSet(std::move(samples), Scalarization::true_class_logit);
}

void BM_ForwardBackward(benchmark::State& state) {
  const Architecture arch = cnn(static_cast<std::size_t>(state.range(0)));
  const ParamVector p = initialize(arch, InitScheme::kaiming_normal, 0);
  const ProbeSet probe = gaussian_probe(1);
  for (auto _ : state) {
    const auto r = forward(arch, p, probe.samples()[0].x);
    benchmark::DoNotOptimize(grad_scalar(r.tape, 0));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_EmpiricalNtk(benchmark::State& state) {
  const Architecture arch = cnn(32);
  const ParamVector p = initialize(arch, InitScheme::kaiming_normal, 0);
  const ProbeSet probe = gaussian_probe(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(empirical_ntk(arch, p, probe));
}
BENCHMARK(BM_EmpiricalNtk)->Arg(8)->Arg(32)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_BruteForceNtk(benchmark::State& state) {
  const Architecture arch = cnn(16);
  const ParamVector p = initialize(arch, InitScheme::kaiming_normal, 0);
  const ProbeSet probe = gaussian_probe(8);
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_ntk(arch, p, probe));
}
BENCHMARK(BM_BruteForceNtk)->Unit(benchmark::kMillisecond);

void BM_Eigendecompose(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(n, n);
  const GramMatrix k(a * a.transpose());
  for (auto _ : state) benchmark::DoNotOptimize(eigendecompose(k));
}
BENCHMARK(BM_Eigendecompose)->Arg(32)->Arg(100)->Arg(128)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
