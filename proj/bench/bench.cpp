// Serial reference kernels against their OpenMP counterparts.

#include "chaa2i/identifiability.hpp"
#include "chaa2i/reconstruct.hpp"

#include <benchmark/benchmark.h>

using namespace chaa2i;

namespace {

struct MuFixture {
    LorenzConfig lorenz;
    LorenzSystem system{lorenz};
    SparseSignal signal = generate_sparse(FourierBasis(40), {5, AmplitudeLaw::gaussian, 1});
    std::vector<State> states = sample_attractor_initial_states(lorenz, 8, 2);
    MeasurementPlan plan{0.02};
};

const MuFixture& mu_fixture() {
    static const MuFixture f;
    return f;
}

void averaged_mu_serial_bench(benchmark::State& state) {
    const auto& f = mu_fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(averaged_mu_serial(f.system, f.signal, f.states, f.plan, 2e-3, 1e-3).mean);
    }
}

void averaged_mu_parallel_bench(benchmark::State& state) {
    const auto& f = mu_fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(averaged_mu(f.system, f.signal, f.states, f.plan, 2e-3, 1e-3).mean);
    }
}

struct ReconFixture {
    LorenzConfig lorenz;
    FourierBasis basis{10};
    SparseSignal signal = generate_sparse(basis, {2, AmplitudeLaw::gaussian, 3});
    State x0 = sample_attractor_initial_states(lorenz, 1, 4).front();
    MeasurementVector y = measure(LorenzSystem(lorenz), signal, x0, MeasurementPlan(0.05));
    MsIrnlsConfig config = [] {
        MsIrnlsConfig c;
        c.max_inner = 5;
        c.max_outer = 2;
        c.seed = 5;
        return c;
    }();
    MultiStartOptions options{8};
};

const ReconFixture& recon_fixture() {
    static const ReconFixture f;
    return f;
}

void multi_start_serial_bench(benchmark::State& state) {
    const auto& f = recon_fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            multi_start_reconstruct_serial(f.y, f.lorenz, f.basis, f.x0, f.config, f.options, f.signal.alpha()).score);
    }
}

void multi_start_parallel_bench(benchmark::State& state) {
    const auto& f = recon_fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            multi_start_reconstruct(f.y, f.lorenz, f.basis, f.x0, f.config, f.options, f.signal.alpha()).score);
    }
}

} // namespace

BENCHMARK(averaged_mu_serial_bench)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(averaged_mu_parallel_bench)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(multi_start_serial_bench)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(multi_start_parallel_bench)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
