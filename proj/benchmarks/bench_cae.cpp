#include <benchmark/benchmark.h>

#include "loopdet/cae.hpp"
#include "loopdet/rng.hpp"

namespace {

using namespace loopdet;

Eigen::MatrixXd random_batch(int rows, int cols) {
    Rng rng(9);
    Eigen::MatrixXd batch(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) batch(i, j) = rng.uniform(0.05, 0.95);
    return batch;
}

void BM_Forward(benchmark::State& state) {
    const int input_len = static_cast<int>(state.range(0));
    const auto model = init_cae(input_len, 1);
    const auto batch = random_batch(32, input_len);
    for (auto _ : state) {
        auto out = forward(model, batch);
        benchmark::DoNotOptimize(out);
    }
    state.SetItemsProcessed(state.iterations() * 32);
}

void BM_Backward(benchmark::State& state) {
    const int input_len = static_cast<int>(state.range(0));
    const auto model = init_cae(input_len, 1);
    const auto batch = random_batch(32, input_len);
    for (auto _ : state) {
        auto grads = backward(model, batch, batch);
        benchmark::DoNotOptimize(grads);
    }
    state.SetItemsProcessed(state.iterations() * 32);
}

}  // namespace

BENCHMARK(BM_Forward)->Arg(64)->Arg(128);
BENCHMARK(BM_Backward)->Arg(64)->Arg(128);
