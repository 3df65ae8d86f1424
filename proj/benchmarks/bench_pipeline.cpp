#include <benchmark/benchmark.h>

#include <cmath>

#include "mxbolo/analysis.hpp"
#include "mxbolo/config.hpp"
#include "mxbolo/dsp.hpp"
#include "mxbolo/experiments.hpp"
#include "mxbolo/frontend.hpp"

using namespace mxbolo;

namespace {

const ExperimentConfig& defaults() {
    static const ExperimentConfig cfg = load_config({});
    return cfg;
}

TimeTrace record(std::size_t n) {
    const auto& c = defaults();
    auto x = make_probe_comb(c.chip.probes, c.chip.sample_rate, Seconds(static_cast<double>(n) / c.chip.sample_rate.value()));
    RandomStream s = derive_stream(1, {n});
    return add_noise(x, c.chip.noise_sigma, s);
}

}  // namespace

static void BM_Brickwall(benchmark::State& state) {
    const auto x = record(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto copy = x;
        benchmark::DoNotOptimize(brickwall_bandpass(copy, FrequencyHz(179.32e6), FrequencyHz(1e6)));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Brickwall)->Arg(100000)->Arg(600000);

static void BM_Demodulate(benchmark::State& state) {
    const auto x = record(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(demodulate(x, FrequencyHz(179.32e6), FrequencyHz(1e6), 100));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Demodulate)->Arg(100000);

static void BM_AddNoise(benchmark::State& state) {
    TimeTrace z{FrequencyHz(1e9), Seconds(0.0), std::vector<double>(100000, 0.0), std::nullopt};
    for (auto _ : state) {
        RandomStream s = derive_stream(2, {});
        benchmark::DoNotOptimize(add_noise(z, Volts(1.0), s));
    }
    state.SetItemsProcessed(state.iterations() * 100000);
}
BENCHMARK(BM_AddNoise);

static void BM_PairwiseMean(benchmark::State& state) {
    const auto make = [](std::size_t k) {
        RandomStream s = derive_stream(3, {k});
        std::vector<double> v(100000);
        s.fill_normal(v);
        return v;
    };
    for (auto _ : state) {
        benchmark::DoNotOptimize(pairwise_mean(static_cast<std::size_t>(state.range(0)), make, 1));
    }
}
BENCHMARK(BM_PairwiseMean)->Arg(16)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_Trigger(benchmark::State& state) {
    const auto& c = defaults();
    const auto pattern = pattern_from_label("111");
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_trigger(c.chip, pattern, c.heater_power, c.timing, c.dsp,
                                             static_cast<std::size_t>(state.range(0)), 7));
    }
}
BENCHMARK(BM_Trigger)->Arg(0)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_FitLorentzian(benchmark::State& state) {
    std::vector<FrequencyHz> f;
    std::vector<double> m;
    for (int i = 0; i < 601; ++i) {
        const double x = 178.5e6 + i * 2.5e3;
        const double u = 2.0 * (x - 179.3e6) / 0.14e6;
        f.emplace_back(x);
        m.push_back(1.0 - 0.9 / (1.0 + u * u));
    }
    for (auto _ : state) benchmark::DoNotOptimize(fit_lorentzian(f, m));
}
BENCHMARK(BM_FitLorentzian);

static void BM_FitCompression(benchmark::State& state) {
    std::vector<PowerDbm> p;
    std::vector<double> r;
    for (double d = -170.0; d <= -80.0; d += 2.5) {
        p.emplace_back(d);
        const double w = dbm_to_watts(p.back()).value();
        r.push_back(1e6 * w / (1.0 + w / 1e-14));
    }
    for (auto _ : state) benchmark::DoNotOptimize(fit_compression(p, r));
}
BENCHMARK(BM_FitCompression);

BENCHMARK_MAIN();
