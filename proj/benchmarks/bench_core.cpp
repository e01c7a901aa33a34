#include <memory>
#include <random>

#include <benchmark/benchmark.h>

#include "vpclab/model.hpp"
#include "vpclab/trainer.hpp"

using namespace vpclab;

namespace {

Tensor<float> random_tensor(Shape shape, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1, 1);
    Tensor<float> t(std::move(shape));
    for (auto& v : t.data)
        v = u(rng);
    return t;
}

// First conv layer of the feature extractor: 10x30x3 -> 5x15x32.
void BM_Conv2dForwardBackward(benchmark::State& state)
{
    const auto x = random_tensor({10, 30, 3}, 1);
    const auto w = random_tensor({3, 3, 3, 32}, 2);
    const auto b = random_tensor({32}, 3);
    ad::Graph<float> g;
    for (auto _ : state) {
        g.clear();
        const auto xv = g.constant(x);
        const auto out = ad::conv2d(g, xv, g.leaf(w), g.leaf(b), 2);
        g.backward(ad::sum(g, out));
        benchmark::DoNotOptimize(g.grad(out).data());
    }
}
BENCHMARK(BM_Conv2dForwardBackward);

void BM_LstmStep(benchmark::State& state)
{
    const auto x = random_tensor({64}, 1);
    const auto w = random_tensor({320, 1024}, 2);
    const auto b = random_tensor({1024}, 3);
    const auto h = random_tensor({256}, 4);
    ad::Graph<float> g;
    for (auto _ : state) {
        g.clear();
        const ad::LstmVars s{g.constant(h), g.constant(h)};
        const auto next = ad::lstm_step(g, g.constant(x), s, g.leaf(w), g.leaf(b));
        benchmark::DoNotOptimize(g.values(next.h).data());
    }
}
BENCHMARK(BM_LstmStep);

// One 20-step rollout plus its update for each agent variant.
void BM_RolloutAndUpdate(benchmark::State& state)
{
    const auto variant = static_cast<agent::Variant>(state.range(0));
    const auto maze = std::make_shared<const env::Maze>(env::parse_maze(
        "name=bench\nmax_steps=1000\n############\n#S.........#\n#.########.#\n#.........G#\n############\n"));
    train::TrainConfig cfg;
    cfg.variant = variant;
    cfg.workers = 1;
    train::SharedTrainingState shared(agent::init_params<float>(variant, {}, 0));
    train::Worker worker(0, cfg, maze, shared);
    std::int64_t steps = 0;
    for (auto _ : state) {
        const auto rollout = worker.collect_rollout();
        steps += static_cast<std::int64_t>(rollout.transitions.size());
        benchmark::DoNotOptimize(worker.update(rollout).total);
    }
    state.SetItemsProcessed(steps);
    state.SetLabel(std::string(agent::variant_name(variant)));
}
BENCHMARK(BM_RolloutAndUpdate)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
