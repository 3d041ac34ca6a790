#include "seqpar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace seqpar {

uint64_t attn_flops_per_host(const BlockPlan& plan, int hosts, int d) {
  const uint64_t la = plan.l_a, lb = plan.l_b, lp = plan.l_p;
  const uint64_t vh = 2ull * hosts;
  return 2 * la * la * d + 4 * lb * lb * d + 4 * (vh - 1) * lp * lb * d;
}

uint64_t dense_attn_flops_per_layer(int n, int d) {
  return 2ull * n * n * d;
}

CommVolume comm_volume_per_layer(const BlockPlan& plan, int hosts, int d, int bytes_per_scalar) {
  CommVolume v;
  v.passing_bytes = 2ull * hosts * plan.l_p * d * 2 * bytes_per_scalar;
  v.query_bytes = static_cast<uint64_t>(hosts) * plan.n_t * (d + 1) * bytes_per_scalar;
  return v;
}

CostReport cost_report(const BlockPlan& plan, int hosts, int d, int bytes_per_scalar) {
  CostReport r;
  const uint64_t per_host = attn_flops_per_host(plan, hosts, d);
  r.per_host_flops.assign(hosts, per_host);
  r.comm_per_layer = comm_volume_per_layer(plan, hosts, d, bytes_per_scalar);
  r.dense_flops_per_layer = dense_attn_flops_per_layer(plan.n_v + plan.n_t, d);
  if (per_host > 0) {
    r.reduction_ratio =
        static_cast<double>(r.dense_flops_per_layer) / hosts / static_cast<double>(per_host);
  }
  return r;
}

BalanceReport balance_report(const SimulationResult& result) {
  BalanceReport r;
  for (const CostCounters& c : result.counters) r.per_host.push_back(c.balanced_total());
  if (!r.per_host.empty()) {
    const auto [mn, mx] = std::minmax_element(r.per_host.begin(), r.per_host.end());
    r.max_min_ratio = *mn == 0 ? (*mx == 0 ? 1.0 : std::numeric_limits<double>::infinity())
                               : static_cast<double>(*mx) / static_cast<double>(*mn);
  }
  return r;
}

DivergenceReport divergence(const SimulationResult& result, const Matrix& oracle) {
  const Matrix& got = result.final_hidden;
  if (!got.same_shape(oracle)) throw std::invalid_argument("divergence: shape mismatch");
  DivergenceReport r;
  double sum_abs = 0.0;
  double sum_cos = 0.0;
  for (int i = 0; i < got.rows; ++i) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int j = 0; j < got.cols; ++j) {
      const float d = std::fabs(got.at(i, j) - oracle.at(i, j));
      r.max_abs = std::max(r.max_abs, d);
      sum_abs += d;
      dot += static_cast<double>(got.at(i, j)) * oracle.at(i, j);
      na += static_cast<double>(got.at(i, j)) * got.at(i, j);
      nb += static_cast<double>(oracle.at(i, j)) * oracle.at(i, j);
    }
    const double denom = std::sqrt(na) * std::sqrt(nb);
    const double cos = denom == 0.0 ? 1.0 : std::clamp(dot / denom, -1.0, 1.0);
    r.cosine_min = std::min(r.cosine_min, cos);
    sum_cos += cos;
  }
  if (got.rows > 0) {
    r.mean_abs = static_cast<float>(sum_abs / (static_cast<double>(got.rows) * got.cols));
    r.cosine_mean = sum_cos / got.rows;
  }

  // Recall of the logged selections against a brute-force re-sort of the
  // logged scores with the same tie rule.
  uint64_t matched = 0, expected = 0;
  for (const SelectionRecord& s : result.selections) {
    std::vector<int> order(s.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return s.scores[a] > s.scores[b]; });
    std::vector<int> oracle_sel;
    for (int idx : order) {
      if (static_cast<int>(oracle_sel.size()) == result.plan.l_p) break;
      if (!std::isfinite(s.scores[idx])) break;
      oracle_sel.push_back(result.plan.block_offset(s.vhost) + idx);
    }
    std::sort(oracle_sel.begin(), oracle_sel.end());
    expected += oracle_sel.size();
    for (int g : s.selected_global) {
      if (std::binary_search(oracle_sel.begin(), oracle_sel.end(), g)) ++matched;
    }
  }
  r.selection_recall = expected == 0 ? 1.0 : static_cast<double>(matched) / expected;
  return r;
}

SelectionHeatmap needle_heatmap(const SimulationResult& result) {
  return {result.selection_counts};
}

HeatmapContrast heatmap_contrast(const SelectionHeatmap& map, int begin, int end) {
  HeatmapContrast c;
  uint64_t in = 0, out = 0;
  int n_in = 0, n_out = 0;
  for (int i = 0; i < static_cast<int>(map.frequency.size()); ++i) {
    if (i >= begin && i < end) {
      in += map.frequency[i];
      ++n_in;
    } else {
      out += map.frequency[i];
      ++n_out;
    }
  }
  if (n_in > 0) c.needle_mean = static_cast<double>(in) / n_in;
  if (n_out > 0) c.background_mean = static_cast<double>(out) / n_out;
  return c;
}

}  // namespace seqpar
