#pragma once

#include <optional>
#include <span>
#include <vector>

#include "seqpar/attention.hpp"
#include "seqpar/matrix.hpp"
#include "seqpar/model.hpp"
#include "seqpar/partition.hpp"

namespace seqpar {

// Per-key importance of one context block, as seen by the query rows.
struct ScoreVector {
  std::vector<float> scores;  // length l_b; pad keys carry -inf
  int source = 0;             // virtual host owning the block
};

// Compressed essential KV pairs exchanged between virtual hosts.
struct PassingBlock {
  int source = 0;
  std::vector<int> indices;  // global token indices, strictly ascending
  Matrix k;
  Matrix v;
};

// Concatenation of the essential KVs from all strictly earlier virtual hosts.
struct PassingAssembly {
  Matrix k;
  Matrix v;
  std::vector<int> indices;
};

// Importance of each key in a block: per-query-row softmax over the block's
// non-pad keys, summed across query rows. Pad keys score -inf. When
// softmax_aggregation is false the raw scaled logits are summed instead.
ScoreVector score_context(const Matrix& q_qr, const Matrix& k_block, float scale,
                          const std::vector<uint8_t>* pad_mask, int source = 0,
                          bool softmax_aggregation = true, CostCounters* counters = nullptr);

// Top-l_p keys by score, ties broken toward the lower index, returned in
// ascending index order. Pad (-inf) keys are never selected; if fewer than
// l_p keys are selectable, all of them are taken.
PassingBlock select_essential(const Matrix& k_block, const Matrix& v_block,
                              const ScoreVector& scores, int l_p, int global_offset);

// KVs from sources strictly less than v, ascending source order. Virtual
// host 0 receives an empty assembly.
PassingAssembly assemble_passing(int v, std::span<const PassingBlock> all_compressed);

// Q/K/V state of one virtual host's context block for the current layer.
struct BlockQkv {
  int vhost = 0;
  Matrix q, k, v;
  const std::vector<uint8_t>* pad = nullptr;
  int global_offset = 0;
};

// Causal self-attention over the anchor replica; computed once per physical
// host per layer and shared by both of its virtual hosts.
Matrix anchor_attention(const Matrix& q_a, const Matrix& k_a, const Matrix& v_a, int heads,
                        CostCounters* counters = nullptr);

// One context block attending [anchor (visible), passing (visible), own
// block (causal)], pad rows invisible. Pad query rows produce zero rows.
Matrix block_attention(const BlockQkv& block, const Matrix& k_a, const Matrix& v_a,
                       const PassingAssembly& passing, int heads,
                       CostCounters* counters = nullptr);

// Per-host partial query attention: anchor slice + the host's two local
// blocks, plus the query's own keys (causal) only when include_query_self is
// set. Records the padded-global key indices actually attended for the
// disjointness audit before merging.
MultiHeadPartial query_attention(const Matrix& q_qr, const Matrix& anchor_k,
                                 const Matrix& anchor_v, std::pair<int, int> anchor_slice,
                                 const BlockQkv& block_lo, const BlockQkv& block_hi,
                                 const Matrix* query_k, const Matrix* query_v,
                                 bool include_query_self, int heads, int query_offset,
                                 std::vector<int>* key_indices,
                                 CostCounters* counters = nullptr);

}  // namespace seqpar
