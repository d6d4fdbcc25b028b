#include "amod/retrieval_reference.hpp"
#include "amod/vector_index.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

amod::VectorIndex gaussian_index(std::size_t n, std::size_t d) {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> g;
    std::vector<amod::ModerationInstance> inst;
    std::vector<amod::EmbeddingVector> vecs;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(d);
        for (auto& x : v) x = g(rng);
        inst.push_back({"id" + std::to_string(i), "", i % 2 ? "A" : "B", {}});
        vecs.push_back(amod::EmbeddingVector::normalized(std::move(v)));
    }
    return amod::VectorIndex::build(inst, vecs, "bench");
}

std::vector<std::string> all_ids(const amod::VectorIndex& index) {
    std::vector<std::string> ids;
    for (std::size_t r = 0; r < index.size(); ++r) ids.push_back(index.id(r));
    return ids;
}

void BM_reference(benchmark::State& state) {
    const auto index = gaussian_index(static_cast<std::size_t>(state.range(0)), 256);
    const auto ids = all_ids(index);
    for (auto _ : state)
        for (const auto& id : ids) benchmark::DoNotOptimize(amod::reference::retrieve_analogies(index, id, 32));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ids.size()));
}

void BM_single_query(benchmark::State& state) {
    const auto index = gaussian_index(static_cast<std::size_t>(state.range(0)), 256);
    const auto ids = all_ids(index);
    for (auto _ : state)
        for (const auto& id : ids) benchmark::DoNotOptimize(amod::retrieve_analogies(index, id, 32));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ids.size()));
}

void BM_batch(benchmark::State& state) {
    const auto index = gaussian_index(static_cast<std::size_t>(state.range(0)), 256);
    const auto ids = all_ids(index);
    for (auto _ : state) benchmark::DoNotOptimize(amod::retrieve_all(index, ids, 32));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ids.size()));
}

}  // namespace

BENCHMARK(BM_reference)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_single_query)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_batch)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
