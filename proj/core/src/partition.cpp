#include "seqpar/partition.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace seqpar {

std::pair<int, int> HostTopology::virtual_pair(int h) const {
  if (h < 0 || h >= physical) throw std::out_of_range("virtual_pair: host index");
  if (zigzag) return {h, 2 * physical - 1 - h};
  return {2 * h, 2 * h + 1};
}

int HostTopology::physical_of(int v) const {
  if (v < 0 || v >= virtual_hosts()) throw std::out_of_range("physical_of: virtual index");
  if (zigzag) return v < physical ? v : 2 * physical - 1 - v;
  return v / 2;
}

HostTopology zigzag_map(int hosts) {
  if (hosts < 1) throw std::invalid_argument("zigzag_map: need at least one host");
  return {hosts, true};
}

HostTopology naive_map(int hosts) {
  if (hosts < 1) throw std::invalid_argument("naive_map: need at least one host");
  return {hosts, false};
}

std::vector<int> frame_partition(int frames, int hosts) {
  if (hosts < 1) throw std::invalid_argument("frame_partition: need at least one host");
  std::vector<int> counts(hosts);
  for (int h = 0; h < hosts; ++h) {
    counts[h] = frames / hosts + (h < frames % hosts ? 1 : 0);
  }
  return counts;
}

std::pair<BlockPlan, ContextSplit> split_context(const Matrix& e_v, const Matrix& e_q, int hosts,
                                                 int l_a, int l_p) {
  if (hosts < 1) throw std::invalid_argument("split_context: need at least one host");
  if (l_a < 0 || l_a >= e_v.rows) {
    throw std::invalid_argument("split_context: anchor length must satisfy 0 <= l_a < n_v");
  }
  const int vh = 2 * hosts;
  const int remainder = e_v.rows - l_a;
  const int pad = (vh - remainder % vh) % vh;
  const int l_b = (remainder + pad) / vh;
  if (l_p < 0 || l_p > l_b) {
    throw std::invalid_argument("split_context: l_p must lie in [0, l_b]");
  }

  BlockPlan plan;
  plan.n_v = e_v.rows;
  plan.n_t = e_q.rows;
  plan.l_a = l_a;
  plan.l_b = l_b;
  plan.l_p = l_p;
  plan.pad = pad;
  plan.virtual_hosts = vh;

  ContextSplit split;
  split.anchor = e_v.slice_rows(0, l_a);
  split.query = e_q;
  split.blocks.reserve(vh);
  split.global_offsets.reserve(vh);
  split.pad_mask.reserve(vh);
  for (int v = 0; v < vh; ++v) {
    Matrix block(l_b, e_v.cols);
    std::vector<uint8_t> mask(l_b, 0);
    for (int r = 0; r < l_b; ++r) {
      const int src = l_a + v * l_b + r;
      if (src < e_v.rows) {
        block.paste_rows(r, e_v.slice_rows(src, src + 1));
      } else {
        mask[r] = 1;
      }
    }
    split.blocks.push_back(std::move(block));
    split.global_offsets.push_back(l_a + v * l_b);
    split.pad_mask.push_back(std::move(mask));
  }
  return {plan, split};
}

std::pair<int, int> slice_anchor(int l_a, int hosts, int h) {
  if (h < 0 || h >= hosts) throw std::out_of_range("slice_anchor: host index");
  const int base = l_a / hosts;
  const int extra = l_a % hosts;
  const int start = h * base + std::min(h, extra);
  const int len = base + (h < extra ? 1 : 0);
  return {start, start + len};
}

BlockPlan default_plan(int n, int hosts) {
  if (n < 128) throw std::invalid_argument("default_plan: n must be at least 128");
  const int l_a = n / 64;
  const int vh = 2 * hosts;
  const int remainder = n - l_a;
  const int pad = (vh - remainder % vh) % vh;
  const int l_b = (remainder + pad) / vh;
  if (l_b == 0) throw std::invalid_argument("default_plan: n too small for nonempty blocks");
  BlockPlan plan;
  plan.n_v = n;
  plan.n_t = 0;
  plan.l_a = l_a;
  plan.l_b = l_b;
  plan.l_p = std::min(n / 128, l_b);
  plan.pad = pad;
  plan.virtual_hosts = vh;
  return plan;
}

}  // namespace seqpar
