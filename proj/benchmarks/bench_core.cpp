#include <benchmark/benchmark.h>

#include "mgsim/analysis.hpp"
#include "mgsim/equilibrium.hpp"
#include "mgsim/integrator.hpp"
#include "mgsim/scenario.hpp"

using namespace mgsim;

namespace {

struct Setup {
    GridTopology topology = default_topology();
    ScenarioPoint point = nominal_point(topology, 12.66e3, network_omega(topology));
    ReducedModel model{topology, point.loads};
    ControlInput u = ControlInput::zeros(topology.n_converters());
    EquilibriumResult eq = find_equilibrium(model, point.exo, u);
};

const Setup& setup() {
    static const Setup s;
    return s;
}

void BM_OdeRhs(benchmark::State& state) {
    const auto& s = setup();
    Vector dx(s.eq.x_eq.size());
    for (auto _ : state) {
        s.model.ode_rhs(s.eq.x_eq, s.point.exo, s.u, dx);
        benchmark::DoNotOptimize(dx.data());
    }
}
BENCHMARK(BM_OdeRhs);

void BM_ModelAssembly(benchmark::State& state) {
    const auto& s = setup();
    for (auto _ : state) {
        ReducedModel m(s.topology, s.point.loads);
        benchmark::DoNotOptimize(m.M2_inv_M1().data());
    }
}
BENCHMARK(BM_ModelAssembly)->Unit(benchmark::kMicrosecond);

void BM_JacobianFd(benchmark::State& state) {
    const auto& s = setup();
    for (auto _ : state) {
        const Matrix J = jacobian_fd(s.model, s.eq.x_eq, s.point.exo, s.u, s.eq.omega_dev);
        benchmark::DoNotOptimize(J.data());
    }
}
BENCHMARK(BM_JacobianFd)->Unit(benchmark::kMillisecond);

void BM_EquilibriumCold(benchmark::State& state) {
    const auto& s = setup();
    for (auto _ : state) benchmark::DoNotOptimize(find_equilibrium(s.model, s.point.exo, s.u).omega_dev);
}
BENCHMARK(BM_EquilibriumCold)->Unit(benchmark::kMillisecond);

void BM_EquilibriumWarm(benchmark::State& state) {
    const auto& s = setup();
    for (auto _ : state)
        benchmark::DoNotOptimize(find_equilibrium(s.model, s.point.exo, s.u, s.eq.x_eq).omega_dev);
}
BENCHMARK(BM_EquilibriumWarm)->Unit(benchmark::kMillisecond);

void BM_Linearize(benchmark::State& state) {
    const auto& s = setup();
    for (auto _ : state)
        benchmark::DoNotOptimize(linearize(s.model, s.eq.x_eq, s.point.exo, s.u, s.eq.omega_dev).spectral_radius);
}
BENCHMARK(BM_Linearize)->Unit(benchmark::kMillisecond);

// 10 ms of a 10% load step with the trapezoidal integrator.
void BM_TrapezoidalLoadStep(benchmark::State& state) {
    const auto& s = setup();
    auto heavier = s.point.loads;
    for (auto& l : heavier) {
        l.r_L /= 1.1;
        l.L_L /= 1.1;
    }
    const ReducedModel after(s.topology, heavier);
    IntegratorConfig cfg;
    cfg.horizon = 0.01;
    cfg.frame_omega = s.eq.omega_dev;
    cfg.sample_times = {0.0, 0.01};
    for (auto _ : state) {
        const auto tr = integrate(after, s.eq.x_eq, s.point.exo, s.u, cfg);
        state.counters["steps"] = static_cast<double>(tr.accepted_steps);
    }
}
BENCHMARK(BM_TrapezoidalLoadStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
