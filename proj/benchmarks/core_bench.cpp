#include <benchmark/benchmark.h>

#include "lipcert/gan.hpp"
#include "lipcert/lipschitz.hpp"
#include "lipcert/nn.hpp"

using namespace lipcert;

namespace {

nn::Mlp bench_net(Eigen::Index width) {
  Rng rng(42);
  nn::InitSpec spec;
  spec.widths = {width, width, width, 1};
  return nn::make_mlp(2, spec, rng);
}

void BM_SpectralNorm(benchmark::State& state) {
  const auto n = state.range(0);
  const Eigen::MatrixXd w = Eigen::MatrixXd::Random(n, n);
  for (auto _ : state) benchmark::DoNotOptimize(lipschitz::spectral_norm(w).value);
}
BENCHMARK(BM_SpectralNorm)->Arg(16)->Arg(64)->Arg(256);

void BM_ForwardBatch(benchmark::State& state) {
  const auto net = bench_net(state.range(0));
  const Eigen::MatrixXd xs = Eigen::MatrixXd::Random(2, 256);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward_batch(net, xs).data());
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_ForwardBatch)->Arg(16)->Arg(64)->Arg(256);

void BM_InputJacobian(benchmark::State& state) {
  const auto net = bench_net(state.range(0));
  const Eigen::VectorXd x = Eigen::VectorXd::Random(2);
  for (auto _ : state) benchmark::DoNotOptimize(nn::input_jacobian(net, x).fro_norm);
}
BENCHMARK(BM_InputJacobian)->Arg(16)->Arg(64);

void BM_EnergyDistance(benchmark::State& state) {
  const auto n = state.range(0);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(2, n);
  const Eigen::MatrixXd b = Eigen::MatrixXd::Random(2, n);
  for (auto _ : state) benchmark::DoNotOptimize(gan::energy_distance(a, b));
}
BENCHMARK(BM_EnergyDistance)->Arg(256)->Arg(1024);

void BM_TrainSteps(benchmark::State& state) {
  gan::GanConfig cfg;
  cfg.steps = 100;
  cfg.telemetry_every = 100;
  cfg.telemetry_batch = 32;
  cfg.energy_samples = 128;
  cfg.sn_mode = static_cast<gan::SnMode>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gan::train(cfg).rows.size());
  state.SetItemsProcessed(state.iterations() * cfg.steps);
}
BENCHMARK(BM_TrainSteps)->Arg(0)->Arg(3)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
