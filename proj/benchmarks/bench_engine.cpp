#include "lifsim/engine.hpp"
#include "lifsim/lyapunov.hpp"
#include "lifsim/model.hpp"
#include "lifsim/paths.hpp"

#include <benchmark/benchmark.h>

#include <vector>

namespace {

lifsim::NetworkSpec bench_network(int depth, int width) {
    lifsim::NeuronParams p;
    p.tau_c = 0.2;
    p.sigma = 0.25;
    p.drive.level = 1.2;
    const lifsim::NeuronParams layers[] = {p};
    lifsim::WeightArgs w;
    w.n_exc = width - width / 4;
    w.n_inh = width / 4;
    return lifsim::build_feedforward(depth, width, layers, w, 11);
}

void bm_brownian_fine(benchmark::State& state) {
    const auto n = state.range(0);
    lifsim::BrownianStore store(3, 1.0 / 1024, n, 1);
    std::vector<double> out(static_cast<std::size_t>(n));
    for (auto _ : state) {
        store.fine_increments(0, 0, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bm_brownian_fine)->Arg(1 << 12)->Arg(1 << 16);

void bm_em_simulate(benchmark::State& state) {
    const auto net = bench_network(static_cast<int>(state.range(0)), 24);
    const double horizon = 4.0;
    const double h = 1.0 / 1024;
    lifsim::BrownianStore store(5, h, static_cast<std::int64_t>(horizon / h), static_cast<int>(net.size()));
    for (auto _ : state) {
        auto traj = lifsim::simulate(net, h, horizon, store, 1);
        benchmark::DoNotOptimize(traj.snapshots.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(horizon / h) * net.size());
}
BENCHMARK(bm_em_simulate)->Arg(3)->Arg(9)->Unit(benchmark::kMillisecond);

void bm_ladder(benchmark::State& state) {
    const auto net = bench_network(3, 8);
    const double horizon = 10.0;
    const double h = 1.0 / 1024;
    lifsim::BrownianStore store(5, h, static_cast<std::int64_t>(horizon / h), static_cast<int>(net.size()));
    const int factors[] = {1, 2, 4, 8, 16, 32};
    for (auto _ : state) {
        auto runs = lifsim::simulate_ladder(net, store, factors, horizon);
        benchmark::DoNotOptimize(runs.data());
    }
}
BENCHMARK(bm_ladder)->Unit(benchmark::kMillisecond);

void bm_event_noisy_neuron(benchmark::State& state) {
    lifsim::NeuronParams p;
    p.sigma = 0.25;
    p.drive.level = 1.0;
    const auto net = lifsim::build_recurrent({p}, Eigen::MatrixXd::Zero(1, 1));
    const double horizon = 20.0;
    lifsim::BrownianStore store(9, 1.0 / 1024, static_cast<std::int64_t>(horizon * 1024), 1);
    lifsim::EventOptions eo;
    eo.noise = &store;
    for (auto _ : state) {
        auto traj = lifsim::event_simulate(net, horizon, eo);
        benchmark::DoNotOptimize(traj.spikes.data());
    }
}
BENCHMARK(bm_event_noisy_neuron)->Unit(benchmark::kMillisecond);

void bm_hybrid_product(benchmark::State& state) {
    lifsim::NeuronParams p;
    p.drive.level = 2.0;
    const auto net = lifsim::build_recurrent({p}, Eigen::MatrixXd::Zero(1, 1));
    for (auto _ : state) {
        auto r = lifsim::lambda_hyb_estimate(net, 100.0);
        benchmark::DoNotOptimize(r.lambda);
    }
}
BENCHMARK(bm_hybrid_product)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
