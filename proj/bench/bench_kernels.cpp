// Serial reference vs OpenMP kernels on synthetic data.

#include "opra/kernels.hpp"
#include "opra/layout.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace opra;
using kernels::Backend;

namespace {

std::vector<std::vector<double>> random_vectors(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<std::vector<double>> out(n, std::vector<double>(d));
    for (auto& v : out)
        for (auto& x : v) x = g(rng);
    return out;
}

ConceptSpec random_spec(std::size_t d) {
    ConceptSpec spec;
    spec.id = Concept::trust;
    const auto keys = random_vectors(24, d, 5);
    for (std::size_t i = 0; i < 6; ++i) {
        ExpertInstruction e{Concept::trust, i < 3 ? LabelSide::true_side : LabelSide::false_side, "", {}};
        for (std::size_t k = 0; k < 4; ++k) e.keys.push_back(make_key(keys[i * 4 + k]));
        (i < 3 ? spec.true_side : spec.false_side).push_back(e);
    }
    return spec;
}

Backend backend_of(const benchmark::State& state) { return state.range(1) ? Backend::parallel : Backend::serial; }

void BM_CosineDistances(benchmark::State& state) {
    const auto v = random_vectors(static_cast<std::size_t>(state.range(0)), 768, 1);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::cosine_distances(v, backend_of(state)));
}

void BM_CocBatch(benchmark::State& state) {
    const auto v = random_vectors(static_cast<std::size_t>(state.range(0)), 768, 2);
    const auto spec = random_spec(768);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::coc_raw_batch(v, spec, backend_of(state)));
}

void BM_Affinities(benchmark::State& state) {
    const auto v = random_vectors(static_cast<std::size_t>(state.range(0)), 64, 3);
    const Matrix d = kernels::squared_distances(v, Backend::serial);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::conditional_affinities(d, 30.0, backend_of(state)));
}

void BM_TsneGradient(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto v = random_vectors(n, 64, 4);
    const Matrix p = kernels::conditional_affinities(kernels::squared_distances(v, Backend::serial), 30.0,
                                                     Backend::serial);
    const auto y0 = random_vectors(n, 2, 6);
    std::vector<double> y, grad(2 * n);
    for (const auto& r : y0) y.insert(y.end(), r.begin(), r.end());
    for (auto _ : state) {
        kernels::tsne_gradient(p, y, grad, backend_of(state));
        benchmark::DoNotOptimize(grad.data());
    }
}

void BM_GravityStep(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.5, 0.5), c(0, 1);
    const auto geom = OctagonGeometry::standard();
    std::vector<Vec2> pos(n), vel(n);
    std::vector<kernels::Attractor> att;
    for (std::size_t i = 0; i < n; ++i) {
        pos[i] = {u(rng), u(rng)};
        for (Concept k : kAllConcepts) att.push_back(attractor_for(c(rng), k, geom, GravityParams{}));
    }
    const auto consts = GravityParams{}.constants();
    for (auto _ : state) {
        auto p = pos;
        auto v = vel;
        benchmark::DoNotOptimize(kernels::gravity_step(p, v, att, 4, consts, backend_of(state)));
    }
}

void sizes(benchmark::internal::Benchmark* b) {
    for (int n : {200, 1000})
        for (int par : {0, 1}) b->Args({n, par});
    b->ArgNames({"n", "parallel"});
}

}  // namespace

BENCHMARK(BM_CosineDistances)->Apply(sizes);
BENCHMARK(BM_CocBatch)->Apply(sizes);
BENCHMARK(BM_Affinities)->Apply(sizes);
BENCHMARK(BM_TsneGradient)->Apply(sizes);
BENCHMARK(BM_GravityStep)->Apply(sizes);

BENCHMARK_MAIN();
