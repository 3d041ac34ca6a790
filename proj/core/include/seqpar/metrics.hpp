#pragma once

#include <cstdint>
#include <vector>

#include "seqpar/partition.hpp"
#include "seqpar/simhost.hpp"

namespace seqpar {

// Per-layer exchange volume in bytes: compressed KV passing plus the query
// partials with their per-head normalizers.
struct CommVolume {
  uint64_t passing_bytes = 0;
  uint64_t query_bytes = 0;
};

struct CostReport {
  std::vector<uint64_t> per_host_flops;  // analytical, per physical host
  CommVolume comm_per_layer;
  uint64_t dense_flops_per_layer = 0;  // full causal attention baseline
  double reduction_ratio = 0.0;        // dense/H divided by per-host count
};

struct BalanceReport {
  std::vector<uint64_t> per_host;  // measured balanced-category FLOPs
  double max_min_ratio = 1.0;
};

struct DivergenceReport {
  float max_abs = 0.0f;
  float mean_abs = 0.0f;
  double cosine_min = 1.0;
  double cosine_mean = 1.0;
  double selection_recall = 1.0;
};

struct SelectionHeatmap {
  std::vector<uint64_t> frequency;  // per video token index
};

// Analytical per-physical-host attention FLOPs of the balanced schedule:
// 2*l_a^2*d + 4*l_b^2*d + 4*(2H-1)*l_p*l_b*d. Identical for every host by
// construction of the interleaved block pairing.
uint64_t attn_flops_per_host(const BlockPlan& plan, int hosts, int d);

// Full causal attention FLOPs per layer over an n-row sequence, 2*n^2*d.
uint64_t dense_attn_flops_per_layer(int n, int d);

CommVolume comm_volume_per_layer(const BlockPlan& plan, int hosts, int d, int bytes_per_scalar);

CostReport cost_report(const BlockPlan& plan, int hosts, int d, int bytes_per_scalar);

// Measured per-host FLOPs restricted to the categories that the balanced
// pairing equalizes (anchor self, own blocks, passing keys).
BalanceReport balance_report(const SimulationResult& result);

// Elementwise and per-row-direction divergence between the distributed run
// and the dense oracle, plus selection recall against a brute-force re-sort
// of the recorded scores.
DivergenceReport divergence(const SimulationResult& result, const Matrix& oracle);

SelectionHeatmap needle_heatmap(const SimulationResult& result);

// Mean selection frequency of tokens [begin, end) vs all other tokens.
struct HeatmapContrast {
  double needle_mean = 0.0;
  double background_mean = 0.0;
};
HeatmapContrast heatmap_contrast(const SelectionHeatmap& map, int begin, int end);

}  // namespace seqpar
