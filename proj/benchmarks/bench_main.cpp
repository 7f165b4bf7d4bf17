#include <benchmark/benchmark.h>

#include <random>

#include "hyperfit/datagen.hpp"
#include "hyperfit/equilibrium.hpp"
#include "hyperfit/icnn.hpp"
#include "hyperfit/material.hpp"

using namespace hyperfit;

namespace {

IcnnArch arch_for(int width, int depth) {
  return IcnnArch{4, std::vector<int>(static_cast<std::size_t>(depth), width), depth > 1};
}

void BM_IcnnForwardAndGrad(benchmark::State& state) {
  const IcnnArch arch = arch_for(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const Icnn net(arch, init_params(arch, 1));
  const std::vector<double> x{3.2, 3.4, 1.05, -1.05};
  Icnn::Vector g;
  for (auto _ : state) benchmark::DoNotOptimize(net.forward_and_grad(x, g));
  state.counters["params"] = static_cast<double>(net.parameter_count());
}
BENCHMARK(BM_IcnnForwardAndGrad)->Args({24, 1})->Args({16, 2})->Args({32, 3})->Args({76, 4});

void BM_IcnnBackwardParams(benchmark::State& state) {
  const IcnnArch arch = arch_for(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const Icnn net(arch, init_params(arch, 1));
  const std::vector<double> x{3.2, 3.4, 1.05, -1.05};
  const std::vector<double> c{0.3, -0.2, 0.7, 0.1};
  std::vector<double> grad(net.parameter_count(), 0.0);
  for (auto _ : state) {
    net.backward_params(x, 0.5, c, grad);
    benchmark::ClobberMemory();
  }
  state.counters["params"] = static_cast<double>(net.parameter_count());
}
BENCHMARK(BM_IcnnBackwardParams)->Args({24, 1})->Args({16, 2})->Args({32, 3})->Args({76, 4});

struct Strip {
  Mesh mesh = generate_mesh(StripGeometry{});
  std::vector<QuadPoint> quad = precompute_quadrature(mesh);
  Dataset data = forward_solve(mesh, GroundTruthMaterial{MooneyRivlinTruth{}}, KinematicMode::PlaneStrain,
                               std::vector<double>{1.1, 1.2, 1.3, 1.4});
  DofPartition part = [this] {
    const std::vector<std::string> react{"top"}, fixed{"bottom"};
    return make_partition(mesh, react, fixed);
  }();
};

const Strip& strip() {
  static const Strip s;
  return s;
}

void BM_AssembleForces(benchmark::State& state) {
  const auto& s = strip();
  const IcnnArch arch = arch_for(16, 2);
  const Model model = state.range(0) == 0 ? Model{NeoHookeanModel::from_moduli(0.4, 4.0)}
                                          : Model{PannModel::initialized(arch, 1)};
  const auto& u = s.data.steps.back().displacements;
  for (auto _ : state) benchmark::DoNotOptimize(internal_forces(s.mesh, s.quad, model, u));
  state.SetLabel(state.range(0) == 0 ? "neo-hookean" : "pann 16x16");
}
BENCHMARK(BM_AssembleForces)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_LossGradient(benchmark::State& state) {
  const auto& s = strip();
  const IcnnArch arch = arch_for(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const Model model = PannModel::initialized(arch, 1);
  std::vector<const LoadStep*> steps;
  for (const auto& st : s.data.steps) steps.push_back(&st);
  const Execution exec{static_cast<unsigned>(state.range(2))};
  for (auto _ : state) benchmark::DoNotOptimize(loss_gradient(s.mesh, s.quad, model, steps, s.part, 100.0, exec));
  state.counters["params"] = static_cast<double>(count_parameters(arch));
}
BENCHMARK(BM_LossGradient)->Args({16, 2, 1})->Args({76, 4, 1})->Args({16, 2, 4})->Unit(benchmark::kMillisecond);

void BM_ForwardSolve(benchmark::State& state) {
  const Mesh mesh = generate_mesh(StripGeometry{});
  const std::vector<double> stretches{1.1, 1.2};
  for (auto _ : state)
    benchmark::DoNotOptimize(
        forward_solve(mesh, GroundTruthMaterial{MooneyRivlinTruth{}}, KinematicMode::PlaneStrain, stretches));
}
BENCHMARK(BM_ForwardSolve)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
