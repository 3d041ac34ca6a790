#include <benchmark/benchmark.h>

#include "seqpar/attention.hpp"
#include "seqpar/matrix.hpp"
#include "seqpar/model.hpp"
#include "seqpar/rng.hpp"
#include "seqpar/runner.hpp"

namespace {

seqpar::Matrix random_matrix(int rows, int cols, uint64_t seed, const char* name) {
  auto gen = seqpar::substream(seed, name);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  seqpar::Matrix m(rows, cols);
  for (float& v : m.data) v = dist(gen);
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const seqpar::Matrix a = random_matrix(n, n, 1, "bench.a");
  const seqpar::Matrix b = random_matrix(n, n, 1, "bench.b");
  for (auto _ : state) {
    benchmark::DoNotOptimize(seqpar::matmul(a, b));
  }
  state.SetItemsProcessed(state.iterations() * 2ll * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_CausalAttention(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int d = 64;
  const seqpar::Matrix q = random_matrix(n, d, 2, "bench.q");
  const seqpar::Matrix k = random_matrix(n, d, 2, "bench.k");
  const seqpar::Matrix v = random_matrix(n, d, 2, "bench.v");
  const seqpar::KeySegment seg{&k, &v, seqpar::MaskKind::CausalWithin, nullptr,
                               seqpar::AttnSite::Other};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        seqpar::mha_lse(q, std::span<const seqpar::KeySegment>(&seg, 1), 4));
  }
}
BENCHMARK(BM_CausalAttention)->Arg(256)->Arg(512)->Arg(1024);

void BM_Prefill(benchmark::State& state) {
  seqpar::RunConfig cfg;
  cfg.hosts = static_cast<int>(state.range(0));
  cfg.frames = 64;
  cfg.model.layers = 2;
  cfg.model.d = 64;
  cfg.model.heads = 4;
  cfg.model.ffn_dim = 128;
  for (auto _ : state) {
    benchmark::DoNotOptimize(seqpar::run(cfg));
  }
}
BENCHMARK(BM_Prefill)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
