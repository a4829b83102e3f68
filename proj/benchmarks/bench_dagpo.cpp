// Hot-path microbenchmarks: forward corruption, one reverse step, full
// rollouts, and denoiser forward/backward at a few widths.

#include <benchmark/benchmark.h>

#include <vector>

#include "dagpo/denoiser.hpp"
#include "dagpo/diffusion.hpp"
#include "dagpo/search_space.hpp"
#include "dagpo/training.hpp"

using namespace dagpo;

namespace {

OrderedDag sample_graph(RngStream& rng, const SpaceSpec& spec) {
    Dag g = Dag::empty(spec.max_nodes);
    for (int i = 0; i < g.n; ++i)
        g.node_labels[static_cast<std::size_t>(i)] = rng.uniform_int(0, spec.node_cats - 1);
    for (int i = 0; i < g.n; ++i)
        for (int j = i + 1; j < g.n; ++j) g.set_edge(i, j, rng.uniform_int(0, spec.edge_cats - 1));
    return topological_order(g);
}

void bm_forward_sample(benchmark::State& state) {
    SpaceSpec spec = SpaceSpec::synthetic(5, 2, 3);
    NoiseSchedule sch = cosine_schedule(800, 0.008);
    RngStream rng(1);
    OrderedDag g0 = sample_graph(rng, spec);
    int t = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward_sample(g0, t, sch, spec, rng));
        t = t % 800 + 1;
    }
}
BENCHMARK(bm_forward_sample);

void bm_posterior_step(benchmark::State& state) {
    NoiseSchedule sch = cosine_schedule(800, 0.008);
    std::vector<double> probs = {0.2, 0.5, 0.3};
    int t = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(posterior_step_distribution(1, probs, t, sch));
        t = t % 800 + 1;
    }
}
BENCHMARK(bm_posterior_step);

void bm_denoiser_forward(benchmark::State& state) {
    SpaceSpec spec = SpaceSpec::synthetic(5, 2, 3);
    int hidden = static_cast<int>(state.range(0));
    DenoiserDims dims = DenoiserDims::for_space(spec, 8, hidden, 3);
    RngStream rng(2);
    DenoiserParams params = DenoiserParams::init(dims, 800, rng);
    NoiseSchedule sch = cosine_schedule(800, 0.008);
    OrderedDag g0 = sample_graph(rng, spec);
    NoisyGraph gt = forward_sample(g0, 400, sch, spec, rng);
    for (auto _ : state) benchmark::DoNotOptimize(forward(params, gt, 400));
}
BENCHMARK(bm_denoiser_forward)->Arg(64)->Arg(128)->Arg(256);

void bm_denoiser_loss_grad(benchmark::State& state) {
    SpaceSpec spec = SpaceSpec::synthetic(5, 2, 3);
    int hidden = static_cast<int>(state.range(0));
    DenoiserDims dims = DenoiserDims::for_space(spec, 8, hidden, 3);
    RngStream rng(3);
    DenoiserParams params = DenoiserParams::init(dims, 800, rng);
    NoiseSchedule sch = cosine_schedule(800, 0.008);
    OrderedDag g0 = sample_graph(rng, spec);
    NoisyGraph gt = forward_sample(g0, 400, sch, spec, rng);
    for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(params, gt, 400, g0, 5.0, 1.0));
}
BENCHMARK(bm_denoiser_loss_grad)->Arg(64)->Arg(128)->Arg(256);

void bm_reverse_rollout(benchmark::State& state) {
    SpaceSpec spec = SpaceSpec::synthetic(5, 2, 3);
    int T = static_cast<int>(state.range(0));
    DenoiserDims dims = DenoiserDims::for_space(spec, 8, 64, 3);
    RngStream rng(4);
    DenoiserParams params = DenoiserParams::init(dims, T, rng);
    NoiseSchedule sch = cosine_schedule(T, 0.008);
    DenoiserFn fn = make_denoiser_fn(params);
    for (auto _ : state) benchmark::DoNotOptimize(reverse_generate(fn, sch, spec, rng));
}
BENCHMARK(bm_reverse_rollout)->Arg(100)->Arg(400)->Arg(800);

} // namespace

BENCHMARK_MAIN();
