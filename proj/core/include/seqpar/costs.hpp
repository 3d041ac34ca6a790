#pragma once

#include <cstdint>

namespace seqpar {

// Attention multiply-accumulate tallies, bucketed by which key segment the
// work belongs to. The convention is 2*m*n*k per matmul; a causal segment
// counts half of the dense score+value cost since only the lower triangle is
// evaluated.
enum class AttnSite {
  AnchorSelf,    // anchor block attending itself
  BlockAnchor,   // context block attending the anchor replica
  BlockPassing,  // context block attending received essential KVs
  BlockOwn,      // context block attending itself
  QueryAttn,     // query rows attending their per-host key set
  EncodeAttn,    // visual encoder self-attention
  Score,         // importance scoring logits
  Other,
};

struct CostCounters {
  uint64_t anchor_self = 0;
  uint64_t block_anchor = 0;
  uint64_t block_passing = 0;
  uint64_t block_own = 0;
  uint64_t query_attn = 0;
  uint64_t encode_attn = 0;
  uint64_t score = 0;
  uint64_t other = 0;

  void add(AttnSite site, uint64_t flops) {
    switch (site) {
      case AttnSite::AnchorSelf: anchor_self += flops; break;
      case AttnSite::BlockAnchor: block_anchor += flops; break;
      case AttnSite::BlockPassing: block_passing += flops; break;
      case AttnSite::BlockOwn: block_own += flops; break;
      case AttnSite::QueryAttn: query_attn += flops; break;
      case AttnSite::EncodeAttn: encode_attn += flops; break;
      case AttnSite::Score: score += flops; break;
      case AttnSite::Other: other += flops; break;
    }
  }

  // The per-host context-attention load that the partitioning is designed to
  // equalize: anchor self-attention plus the two local blocks' own and
  // passing-key work. The anchor-as-key and query terms are identical on
  // every host by construction and excluded from the balance figure.
  uint64_t balanced_total() const { return anchor_self + block_passing + block_own; }

  uint64_t attention_total() const {
    return anchor_self + block_anchor + block_passing + block_own + query_attn;
  }
};

}  // namespace seqpar
