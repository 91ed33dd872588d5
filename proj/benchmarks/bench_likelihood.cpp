// Sparse inverted-index likelihood updates versus the dense per-location scan.

#include <benchmark/benchmark.h>

#include <vector>

#include "loopdet/chowliu.hpp"
#include "loopdet/fabmap.hpp"
#include "loopdet/rng.hpp"

namespace {

using namespace loopdet;

struct Scenario {
    ChowLiuTree tree;
    DTable dtable;
    std::vector<std::vector<std::uint8_t>> rows;
    std::vector<std::uint8_t> query;
};

Scenario make_scenario(int vocab, int locations, double density) {
    Rng rng(42);
    Scenario s;
    s.tree.root = 0;
    s.tree.parent.resize(vocab);
    s.tree.parent[0] = -1;
    for (int q = 1; q < vocab; ++q) s.tree.parent[q] = static_cast<int>(rng.uniform_int(q));
    s.tree.p_marg.resize(vocab);
    s.tree.p_given_parent1.resize(vocab);
    s.tree.p_given_parent0.resize(vocab);
    for (int q = 0; q < vocab; ++q) {
        s.tree.p_marg[q] = rng.uniform(0.02, 0.5);
        s.tree.p_given_parent1[q] = rng.uniform(0.05, 0.95);
        s.tree.p_given_parent0[q] = rng.uniform(0.05, 0.95);
    }
    s.dtable = precompute_d(s.tree);
    for (int i = 0; i < locations; ++i) {
        std::vector<std::uint8_t> row(vocab);
        for (auto& v : row) v = rng.uniform() < density ? 1 : 0;
        s.rows.push_back(std::move(row));
    }
    s.query.resize(vocab);
    for (auto& v : s.query) v = rng.uniform() < density ? 1 : 0;
    return s;
}

void BM_SparseQuery(benchmark::State& state) {
    const int vocab = static_cast<int>(state.range(0));
    const int locations = static_cast<int>(state.range(1));
    const auto s = make_scenario(vocab, locations, 0.05);
    LocationMap map(s.tree, s.dtable);
    for (const auto& row : s.rows) map.add_location(row);

    for (auto _ : state) {
        auto liks = map.query_likelihoods(s.query);
        benchmark::DoNotOptimize(liks);
    }
    state.SetItemsProcessed(state.iterations() * locations);
}

void BM_DenseQuery(benchmark::State& state) {
    const int vocab = static_cast<int>(state.range(0));
    const int locations = static_cast<int>(state.range(1));
    const auto s = make_scenario(vocab, locations, 0.05);

    for (auto _ : state) {
        std::vector<double> liks;
        liks.reserve(s.rows.size());
        for (const auto& row : s.rows) {
            liks.push_back(dense_likelihood(s.tree, s.dtable, row, s.query));
        }
        benchmark::DoNotOptimize(liks);
    }
    state.SetItemsProcessed(state.iterations() * locations);
}

}  // namespace

BENCHMARK(BM_SparseQuery)->Args({1024, 100})->Args({1024, 1000})->Args({4096, 1000});
BENCHMARK(BM_DenseQuery)->Args({1024, 100})->Args({1024, 1000})->Args({4096, 1000});
