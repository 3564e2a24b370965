#include <benchmark/benchmark.h>

#include "eqa/autodiff.hpp"
#include "eqa/evaluation.hpp"
#include "eqa/layers.hpp"
#include "eqa/networks.hpp"
#include "eqa/training.hpp"
#include "eqa/valuations.hpp"

namespace {

using namespace eqa;

Tensor uniform_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = rng.uniform();
  return t;
}

void BM_ExchangeableForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const ExchangeableLayer layer = ExchangeableLayer::glorot(25, 25, Activation::kTanh, rng);
  const Tensor x = uniform_tensor(Shape{50, n, n, 25}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(layer.forward(x));
}
BENCHMARK(BM_ExchangeableForward)->Arg(2)->Arg(5)->Arg(10);

void BM_ExchangeableBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const ExchangeableLayer layer = ExchangeableLayer::glorot(25, 25, Activation::kTanh, rng);
  const Tensor x = uniform_tensor(Shape{50, n, n, 25}, 2);
  for (auto _ : state) {
    ad::Tape tape;
    ad::Var in = tape.variable(x);
    tape.backward(ad::sum_all(exchangeable(in, layer.bind(tape, true), Activation::kTanh)));
    benchmark::DoNotOptimize(tape.gradient(in));
  }
}
BENCHMARK(BM_ExchangeableBackward)->Arg(2)->Arg(5)->Arg(10);

void BM_MechanismForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = static_cast<std::size_t>(state.range(1));
  const EquivariantNet net(NetworkConfig{}, 3);
  const Tensor bids = sample(DistributionSpec::uniform(n, m), 50, 4).values;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(net, bids));
}
BENCHMARK(BM_MechanismForward)->Args({1, 2})->Args({2, 2})->Args({3, 10});

void BM_RegretNetForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = static_cast<std::size_t>(state.range(1));
  const RegretNet net(n, m, NetworkConfig{}, 3);
  const Tensor bids = sample(DistributionSpec::uniform(n, m), 50, 4).values;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(net, bids));
}
BENCHMARK(BM_RegretNetForward)->Args({1, 2})->Args({2, 2})->Args({3, 10});

void BM_MisreportStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = static_cast<std::size_t>(state.range(1));
  const DistributionSpec spec = DistributionSpec::uniform(n, m);
  const EquivariantNet net(NetworkConfig{}, 5);
  const Tensor values = sample(spec, 50, 6).values;
  Tensor mis = values;
  const AscentOptions one_step{1, 1e-3, AscentRule::kAdam};
  for (auto _ : state) misreport_ascent(net, values, mis, spec, one_step);
}
BENCHMARK(BM_MisreportStep)->Args({1, 2})->Args({2, 2})->Args({3, 10});

void BM_LagrangianGradient(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = static_cast<std::size_t>(state.range(1));
  const DistributionSpec spec = DistributionSpec::uniform(n, m);
  const EquivariantNet net(NetworkConfig{}, 7);
  const Tensor values = sample(spec, 50, 8).values;
  const Tensor mis = sample(spec, 50, 9).values;
  const std::vector<double> lambda(n, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(lagrangian_gradient(net, lambda, 1.0, values, mis));
}
BENCHMARK(BM_LagrangianGradient)->Args({1, 2})->Args({2, 2})->Args({3, 10});

}  // namespace

BENCHMARK_MAIN();
