#pragma once

#include <utility>
#include <vector>

#include "seqpar/matrix.hpp"

namespace seqpar {

// Physical-to-virtual host assignment. Each physical host owns two virtual
// hosts; the zigzag pairing (h, 2H-1-h) keeps per-host attention work equal,
// while the contiguous pairing (2h, 2h+1) is kept as the imbalanced baseline.
struct HostTopology {
  int physical = 0;
  bool zigzag = true;

  int virtual_hosts() const { return 2 * physical; }
  std::pair<int, int> virtual_pair(int h) const;
  int physical_of(int v) const;
};

HostTopology zigzag_map(int hosts);
HostTopology naive_map(int hosts);

// Partition geometry governing every split and mask.
struct BlockPlan {
  int n_v = 0;  // video context length
  int n_t = 0;  // query length
  int l_a = 0;  // anchor length
  int l_b = 0;  // per-virtual-host context block length (pad included)
  int l_p = 0;  // essential KVs passed per block
  int pad = 0;  // zero rows appended to the context

  int virtual_hosts = 0;
  int block_offset(int v) const { return l_a + v * l_b; }
  int query_offset() const { return l_a + virtual_hosts * l_b; }
};

struct ContextSplit {
  Matrix anchor;
  std::vector<Matrix> blocks;  // indexed by virtual host
  Matrix query;
  std::vector<int> global_offsets;             // padded starting index per block
  std::vector<std::vector<uint8_t>> pad_mask;  // per block, 1 marks a pad row
};

// Frame counts per host: floor(F/H) plus one extra for the first F mod H
// hosts; host h owns the contiguous frame range after its predecessors.
std::vector<int> frame_partition(int frames, int hosts);

// Anchor = first l_a rows of the context; the remainder is right-padded with
// zero rows to a multiple of 2H and divided into equal blocks. Pad keys are
// masked invisible everywhere downstream.
std::pair<BlockPlan, ContextSplit> split_context(const Matrix& e_v, const Matrix& e_q, int hosts,
                                                 int l_a, int l_p);

// Contiguous row range [first, second) of the anchor owned by physical host h
// during query attention; the H ranges partition [0, l_a).
std::pair<int, int> slice_anchor(int l_a, int hosts, int h);

// Plan with the default ratios l_a = n/64 and l_p = n/128 (clamped to the
// block length).
BlockPlan default_plan(int n, int hosts);

}  // namespace seqpar
