// Hot paths on random two-scale instances in the plane; the argument is the
// number of finest-scale landmarks (the coarse scale holds half as many).

#include <benchmark/benchmark.h>

#include "mslddmm/checks.hpp"
#include "mslddmm/hamiltonian.hpp"
#include "mslddmm/integrator.hpp"
#include "mslddmm/momentum.hpp"
#include "mslddmm/shooting.hpp"

namespace mslddmm {
namespace {

struct Instance {
  ScaleConfig cfg = ScaleConfig::make(2, {1.0, 0.5});
  PhasePoint x0;
  RegistrationProblem prob;
};

Instance make_instance(Index n) {
  InstanceGenerator gen(n);
  const MultiscaleConfiguration source = gen.configuration(2, {n / 2, n}, 2.0);
  const MultiscaleConfiguration target = gen.configuration(2, {n / 2, n}, 2.0);
  Instance inst;
  inst.x0 = PhasePoint::with_momenta(source, gen.momentum(source, 0.1), gen.sim_momentum(2, 0.1));
  inst.prob = RegistrationProblem::make(source, target, inst.cfg, 1.0, true);
  return inst;
}

void BM_PhaseRhs(benchmark::State& state) {
  const Instance inst = make_instance(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(phase_rhs(inst.cfg, inst.x0));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PhaseRhs)->RangeMultiplier(4)->Range(16, 1024)->Complexity(benchmark::oNSquared);

void BM_ShootRk4(benchmark::State& state) {
  const Instance inst = make_instance(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(shoot(inst.cfg, inst.x0, 50));
}
BENCHMARK(BM_ShootRk4)->RangeMultiplier(4)->Range(16, 256)->Unit(benchmark::kMillisecond);

void BM_ObjectiveGradient(benchmark::State& state) {
  const Instance inst = make_instance(state.range(0));
  const InitialMomenta m0{inst.x0.p, inst.x0.pa};
  for (auto _ : state) benchmark::DoNotOptimize(objective_and_gradient(inst.prob, m0, {}));
}
BENCHMARK(BM_ObjectiveGradient)->RangeMultiplier(4)->Range(16, 256)->Unit(benchmark::kMillisecond);

void BM_AdvectProbes(benchmark::State& state) {
  const Instance inst = make_instance(64);
  const Trajectory traj = shoot(inst.cfg, inst.x0, 50);
  const ProbeSet grid = make_probe_grid(1, Vector{{-4.0, -4.0}}, Vector{{4.0, 4.0}}, {32, 32});
  const auto threads = static_cast<unsigned>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(advect_probes(inst.cfg, traj, grid, threads));
}
BENCHMARK(BM_AdvectProbes)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace
}  // namespace mslddmm

// The packaged benchmark_main archive carries LTO bytecode from another
// compiler release, so the entry point is defined here.
BENCHMARK_MAIN();
