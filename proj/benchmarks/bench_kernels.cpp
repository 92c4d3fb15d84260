#include <benchmark/benchmark.h>

#include "cdekf/filters.hpp"
#include "cdekf/models.hpp"
#include "cdekf/sim.hpp"

namespace {

using namespace cdekf;

LowerTriangular random_factor(std::size_t n, Rng& rng) {
    LowerTriangular l(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = j + 1; i < n; ++i) l.set(i, j, rng.next_normal());
        l.set(j, j, 1.0 + rng.next_uniform());
    }
    return l;
}

void TriangularizeLower(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(7);
    Matrix pre(n, 2 * n);
    for (std::size_t j = 0; j < pre.cols(); ++j) {
        for (std::size_t i = 0; i < n; ++i) pre(i, j) = rng.next_normal();
    }
    for (auto _ : state) {
        auto l = triangularize_lower(pre);
        benchmark::DoNotOptimize(l);
    }
}
BENCHMARK(TriangularizeLower)->Arg(3)->Arg(8)->Arg(16);

void MeasurementUpdate(benchmark::State& state) {
    const CstrModel model;
    Rng rng(11);
    const LowerTriangular s = random_factor(3, rng);
    GaussianBelief conventional{0.0, model.x0_mean(), gram(s.dense())};
    GaussianBelief sqrt_form{0.0, model.x0_mean(), s};
    const Vector z{18.0};
    const int kind = static_cast<int>(state.range(0));
    for (auto _ : state) {
        GaussianBelief post =
            kind == 0   ? mu_conventional(conventional, 1, z, model, 1e3)
            : kind == 1 ? mu_sr_two_qr(sqrt_form, 1, z, model, 1e3)
                        : mu_sr_block_qr(sqrt_form, 1, z, model, 1e3);
        benchmark::DoNotOptimize(post);
    }
}
BENCHMARK(MeasurementUpdate)->Arg(0)->Arg(1)->Arg(2);

void PredictInterval(benchmark::State& state) {
    const CstrModel model;
    const auto variant = static_cast<FilterVariant>(state.range(0));
    const GaussianBelief belief = initial_belief(variant, model);
    OdeOptions opts;
    for (auto _ : state) {
        auto out = predict(variant, belief, 1.0, model, 1e3, opts);
        benchmark::DoNotOptimize(out);
    }
}
BENCHMARK(PredictInterval)
    ->Arg(static_cast<int>(FilterVariant::StdEkf))
    ->Arg(static_cast<int>(FilterVariant::MdeConventional))
    ->Arg(static_cast<int>(FilterVariant::SpdeConventional))
    ->Arg(static_cast<int>(FilterVariant::SrMdeTwoQr));

void StiffIntegration(benchmark::State& state) {
    const VanDerPolModel model(1e3);
    const GaussianBelief belief = initial_belief(FilterVariant::SrMdeTwoQr, model);
    OdeOptions opts;
    opts.method = OdeMethod::StiffImplicit;
    for (auto _ : state) {
        auto out = predict(FilterVariant::SrMdeTwoQr, belief, 0.2, model, 1e3, opts);
        benchmark::DoNotOptimize(out);
    }
}
BENCHMARK(StiffIntegration);

}  // namespace

BENCHMARK_MAIN();
