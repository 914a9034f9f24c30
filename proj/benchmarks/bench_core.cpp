#include "rdsrnn/contraction.hpp"
#include "rdsrnn/presets.hpp"
#include "rdsrnn/random.hpp"
#include "rdsrnn/rnn.hpp"
#include "rdsrnn/system.hpp"
#include "rdsrnn/train.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace rdsrnn;

namespace {

void BM_SimulateFern(benchmark::State& state) {
    const SystemSpec fern = presets::barnsley_fern_system();
    const auto horizon = static_cast<std::size_t>(state.range(0));
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(simulate(fern, Vector::Zero(2), horizon, ++seed));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateFern)->Arg(1000)->Arg(10000);

void BM_NetworkRunner(benchmark::State& state) {
    Pcg32 rng(1);
    const auto hidden = static_cast<Index>(state.range(0));
    const Network net = init_network(Topology{{2, hidden, 2}, FeedbackKind::last_layer, 0}, rng);
    NetworkRunner runner(net);
    Vector x = Vector::Zero(2);
    const Vector u = Vector::Ones(2);
    for (auto _ : state) benchmark::DoNotOptimize(runner.step(x, u));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_NetworkRunner)->Arg(6)->Arg(64);

void BM_Bptt(benchmark::State& state) {
    const SystemSpec spec = presets::simplified_fern_system();
    const SequenceBatch batch = to_sequences(simulate_batch(spec, Vector::Zero(2), 50, 1, 50), spec);
    Pcg32 rng(2);
    const Network net = init_network(Topology{{2, 6, 2}, FeedbackKind::last_layer, 0}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(bptt_gradient(net, batch));
    state.SetItemsProcessed(state.iterations() * 50 * 50);
}
BENCHMARK(BM_Bptt);

void BM_ExactAffineBound(benchmark::State& state) {
    const MapEnsemble fern = presets::barnsley_fern();
    const auto k = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(exact_affine_bound(fern, k, 1.0));
}
BENCHMARK(BM_ExactAffineBound)->DenseRange(2, 8, 3);

} // namespace

BENCHMARK_MAIN();
