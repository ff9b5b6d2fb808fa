// Serial reference loop against the OpenMP loop for the episode kernels.

#include "qcdnet/calibration.hpp"
#include "qcdnet/episodes.hpp"
#include "qcdnet/network.hpp"

#include <benchmark/benchmark.h>

using namespace qcdnet;

namespace {

constexpr std::size_t episodes = 2'000;

Scenario bench_scenario() {
    Scenario s = reference_scenario();
    s.seed = 7;
    return s;
}

Execution mode(const benchmark::State &state) {
    return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

void label(benchmark::State &state) {
    state.SetLabel(state.range(0) == 0 ? "serial" : "parallel x" + std::to_string(worker_threads()));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * episodes));
}

void BM_nodm_episodes(benchmark::State &state) {
    const Scenario s = bench_scenario();
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_nodm_episodes(s, 0.95, episodes, 1, mode(state)));
    }
    label(state);
}

void BM_nadm_episodes(benchmark::State &state) {
    const Scenario s = bench_scenario();
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_nadm_episodes(s, 0.98, episodes, 1, mode(state)));
    }
    label(state);
}

void BM_nadm_prechange_maxima(benchmark::State &state) {
    const Scenario s = bench_scenario();
    for (auto _ : state) {
        benchmark::DoNotOptimize(prechange_maxima(Detector::nadm, s, episodes, 1, mode(state)));
    }
    label(state);
}

void BM_batch_sojourn(benchmark::State &state) {
    const Scenario s = bench_scenario();
    for (auto _ : state) {
        benchmark::DoNotOptimize(estimate_batch_sojourn(s.net, {8, 200, 1000}, 1, mode(state)));
    }
    state.SetLabel(state.range(0) == 0 ? "serial" : "parallel x" + std::to_string(worker_threads()));
}

} // namespace

BENCHMARK(BM_nodm_episodes)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_nadm_episodes)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_nadm_prechange_maxima)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_batch_sojourn)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
