#include <benchmark/benchmark.h>

#include "loopdet/codebook.hpp"
#include "loopdet/rng.hpp"

namespace {

using namespace loopdet;

Eigen::MatrixXd random_points(int n, int dim) {
    Rng rng(7);
    Eigen::MatrixXd points(n, dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) points(i, j) = rng.uniform();
    return points;
}

void BM_Quantize(benchmark::State& state) {
    const int vocab = static_cast<int>(state.range(0));
    Codebook cb;
    cb.centroids = random_points(vocab, 64);
    const auto points = random_points(2000, 64);

    for (auto _ : state) {
        auto labels = quantize_rows(cb, points);
        benchmark::DoNotOptimize(labels);
    }
    state.SetItemsProcessed(state.iterations() * 2000);
}

void BM_KmeansIteration(benchmark::State& state) {
    const int k = static_cast<int>(state.range(0));
    const auto points = random_points(5000, 32);
    for (auto _ : state) {
        auto cb = kmeans_train_matrix(points, k, 3, 1, 0.0);
        benchmark::DoNotOptimize(cb);
    }
}

}  // namespace

BENCHMARK(BM_Quantize)->Arg(256)->Arg(1024);
BENCHMARK(BM_KmeansIteration)->Arg(64)->Arg(256);
