#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <vector>

#include "doctest.h"
#include "seqpar/metrics.hpp"
#include "seqpar/model.hpp"
#include "seqpar/simhost.hpp"

using namespace seqpar;

namespace {

BlockPlan plan_of(int l_a, int l_b, int l_p, int hosts, int n_t = 0) {
  BlockPlan p;
  p.l_a = l_a;
  p.l_b = l_b;
  p.l_p = l_p;
  p.n_t = n_t;
  p.virtual_hosts = 2 * hosts;
  p.n_v = l_a + p.virtual_hosts * l_b;
  return p;
}

// Geometry chosen so the split has no pad rows and every block holds at
// least l_p real keys, the regime where the analytical formula is exact.
SimulationResult exact_run(uint64_t seed, int hosts, int l_a, int l_b, int l_p, int layers,
                           int d, bool zigzag = true) {
  ModelConfig cfg;
  cfg.layers = layers;
  cfg.d = d;
  cfg.ffn_dim = 2 * d;
  cfg.heads = 2;
  cfg.pool = 8;  // two tokens per frame keeps frame counts flexible
  const int n_v = l_a + 2 * hosts * l_b;
  const int frames = n_v / cfg.tokens_per_frame();
  ModelParams params = init_params(seed, cfg);
  SimInputs inputs;
  inputs.video = make_random_video(seed, cfg, frames);
  inputs.query_tokens = make_random_tokens(seed, cfg, 3);
  SimOptions opt;
  opt.zigzag = zigzag;
  return simulate(hosts, params, inputs, l_a, l_p, opt);
}

}  // namespace

TEST_CASE("analytical per-host FLOPs closed forms") {
  CHECK(attn_flops_per_host(plan_of(4, 8, 2, 2), 2, 16) == 7680);  // 512 + 4096 + 3072
  CHECK(attn_flops_per_host(plan_of(4, 8, 0, 2), 2, 16) ==
        2ull * 4 * 4 * 16 + 4ull * 8 * 8 * 16);
}

TEST_CASE("communication volume closed forms") {
  // 2H * l_p * d * 2 * bytes = 4 * 2 * 16 * 2 * 4
  CommVolume v = comm_volume_per_layer(plan_of(4, 8, 2, 2, 3), 2, 16, 4);
  CHECK(v.passing_bytes == 1024);
  CHECK(v.query_bytes == 408);  // H * n_t * (d + 1) * bytes

  CHECK(comm_volume_per_layer(plan_of(4, 8, 0, 2, 3), 2, 16, 4).passing_bytes == 0);
  // Doubling l_p doubles the passing term exactly.
  CHECK(comm_volume_per_layer(plan_of(4, 8, 4, 2, 3), 2, 16, 4).passing_bytes == 2048);
}

TEST_CASE("instrumented counters match the formula exactly") {
  SimulationResult r = exact_run(31, 2, 4, 8, 2, 2, 16);
  const uint64_t expect = 2ull * attn_flops_per_host(r.plan, 2, 16);  // two layers
  for (const CostCounters& c : r.counters) CHECK(c.balanced_total() == expect);
}

TEST_CASE("balanced mapping gives ratio one, contiguous mapping does not") {
  SimulationResult zig = exact_run(32, 4, 8, 4, 2, 2, 16);
  BalanceReport b = balance_report(zig);
  CHECK(b.max_min_ratio == 1.0);

  SimulationResult naive = exact_run(32, 4, 8, 4, 2, 2, 16, /*zigzag=*/false);
  CHECK(balance_report(naive).max_min_ratio > 1.0);

  SimulationResult single = exact_run(33, 1, 4, 8, 2, 2, 16);
  CHECK(balance_report(single).max_min_ratio == 1.0);
}

TEST_CASE("divergence endpoints against the dense oracle") {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.d = 16;
  cfg.ffn_dim = 32;
  cfg.heads = 2;
  ModelParams params = init_params(34, cfg);
  SimInputs inputs;
  inputs.video = make_random_video(34, cfg, 16);
  inputs.query_tokens = make_random_tokens(34, cfg, 4);
  const Matrix oracle = dense_prefill_oracle(embedded_sequence(params, inputs), params);

  // l_p = l_b: exact.
  SimulationResult full = simulate(2, params, inputs, 8, 30);
  CHECK(full.plan.l_p == full.plan.l_b);
  DivergenceReport d = divergence(full, oracle);
  CHECK(d.max_abs <= 1e-5f);
  CHECK(d.max_abs >= d.mean_abs);
  CHECK(d.cosine_min >= -1.0);
  CHECK(d.cosine_min <= 1.0);
  CHECK(d.selection_recall == 1.0);

  // l_p = 0, l_a = 0: information removed, strictly positive divergence.
  SimulationResult none = simulate(2, params, inputs, 0, 0);
  CHECK(divergence(none, oracle).max_abs > 0.0f);
}

TEST_CASE("selection heatmap bounds and endpoints") {
  SimulationResult none = exact_run(35, 2, 4, 8, 0, 2, 16);
  for (uint64_t f : needle_heatmap(none).frequency) CHECK(f == 0);

  SimulationResult some = exact_run(35, 2, 4, 8, 3, 2, 16);
  const uint64_t bound = 2ull * (2 * 2 - 1);  // layers * (2H - 1)
  for (uint64_t f : needle_heatmap(some).frequency) CHECK(f <= bound);
}

TEST_CASE("needle tokens are selected more often than background") {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.d = 16;
  cfg.ffn_dim = 32;
  cfg.heads = 2;
  cfg.norm = false;  // amplitude-based needle needs unnormalized keys
  ModelParams params = init_params(36, cfg);
  SimInputs inputs;
  inputs.video = make_random_video(36, cfg, 16);
  inputs.query_tokens = make_random_tokens(36, cfg, 4);
  inputs.needle = true;
  inputs.needle_frame = 8;
  inputs.needle_gain = 8.0f;

  SimulationResult r = simulate(2, params, inputs, 8, 2);
  const int tpf = cfg.tokens_per_frame();
  HeatmapContrast c = heatmap_contrast(needle_heatmap(r), 8 * tpf, 9 * tpf);
  CHECK(c.needle_mean > c.background_mean);
}

TEST_CASE("heatmap contrast arithmetic") {
  SelectionHeatmap map{{4, 0, 2, 0}};
  HeatmapContrast c = heatmap_contrast(map, 0, 1);
  CHECK(c.needle_mean == 4.0);
  CHECK(c.background_mean == doctest::Approx(2.0 / 3.0));
}
