// Serial vs OpenMP for the three parallel hot paths, plus the textbook
// matmul the blocked kernel is checked against. Set OMP_NUM_THREADS to vary
// the parallel side.

#include <benchmark/benchmark.h>

#include <vector>

#include "regscore/encoder.hpp"
#include "regscore/kernels.hpp"
#include "regscore/rng.hpp"
#include "regscore/similarity.hpp"
#include "regscore/synthetic.hpp"

using namespace regscore;
using kernels::Exec;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
    return m;
}

std::vector<DomainName> domains(std::size_t n, std::uint64_t seed) {
    std::vector<DomainName> out;
    for (auto& row : make_text_pattern_dataset(n, seed).rows) out.push_back(std::move(row.domain));
    return out;
}

// Shapes follow the MLP's widest layer: a 512-row batch through 256 x 256.
void matmul_args(benchmark::internal::Benchmark* b) {
    b->Args({64, 256, 256})->Args({512, 256, 256})->Args({512, 4, 256});
}

void BM_matmul_reference(benchmark::State& state) {
    const Matrix a = random_matrix(state.range(0), state.range(1), 1);
    const Matrix b = random_matrix(state.range(1), state.range(2), 2);
    Matrix c;
    for (auto _ : state) {
        kernels::reference::matmul(a, b, c);
        benchmark::DoNotOptimize(c.values().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1) * state.range(2));
}

void BM_matmul(benchmark::State& state, Exec exec) {
    const Matrix a = random_matrix(state.range(0), state.range(1), 1);
    const Matrix b = random_matrix(state.range(1), state.range(2), 2);
    Matrix c;
    for (auto _ : state) {
        kernels::matmul(a, b, c, exec);
        benchmark::DoNotOptimize(c.values().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1) * state.range(2));
}

void BM_best_match_batch(benchmark::State& state, Exec exec) {
    const RegistrantIndex index(domains(static_cast<std::size_t>(state.range(0)), 3));
    const auto queries = domains(256, 4);
    for (auto _ : state) {
        auto results = best_match_batch(index, queries, SimilarityMode::paper, exec);
        benchmark::DoNotOptimize(results.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(queries.size()));
}

void BM_encoder_forward(benchmark::State& state, Exec exec) {
    EncoderConfig cfg;
    cfg.seed = 5;
    const EncoderWeights w = encoder_init(cfg);
    const auto batch = domains(static_cast<std::size_t>(state.range(0)), 6);
    for (auto _ : state) {
        auto out = encode_batch(w, batch, Mode::eval, exec);
        benchmark::DoNotOptimize(out.embedding.values().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_matmul_reference)->Apply(matmul_args);
BENCHMARK_CAPTURE(BM_matmul, serial, Exec::serial)->Apply(matmul_args);
BENCHMARK_CAPTURE(BM_matmul, parallel, Exec::parallel)->Apply(matmul_args);
BENCHMARK_CAPTURE(BM_best_match_batch, serial, Exec::serial)->Arg(2000)->Arg(10000);
BENCHMARK_CAPTURE(BM_best_match_batch, parallel, Exec::parallel)->Arg(2000)->Arg(10000);
BENCHMARK_CAPTURE(BM_encoder_forward, serial, Exec::serial)->Arg(64)->Arg(512);
BENCHMARK_CAPTURE(BM_encoder_forward, parallel, Exec::parallel)->Arg(64)->Arg(512);

BENCHMARK_MAIN();
